"""Exact solvers for the slack subproblems."""

from .lp import (DEFAULT_TOL, SlackSolution, SolverTolerances, complementary_slackness_violation,
                 slack_feasible, solve_minmax, solve_slack_l1, solve_weighted_slack_lp)
from .qp import solve_weighted_slack_qp
from .simplex import solve_standard_form

__all__ = [
    "DEFAULT_TOL", "SlackSolution", "SolverTolerances", "complementary_slackness_violation",
    "slack_feasible", "solve_minmax", "solve_slack_l1", "solve_weighted_slack_lp",
    "solve_weighted_slack_qp", "solve_standard_form",
]
