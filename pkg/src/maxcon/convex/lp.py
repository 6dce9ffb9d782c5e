"""Slack linear programs over a :class:`~maxcon.model.ResidualSystem`.

The weighted slack LP

    min  sum_g w_g s_g
    s.t. |a_j . theta - b_j| <= eps + s_g(j),   s >= 0,   |theta_k| <= M

is solved through its dual, which has only ``d + n`` equality rows
(``theta`` is recovered from the simplex multipliers). Changing the weights
only changes the dual's right-hand side, so the previous optimal basis is a
dual-feasible warm start for the next reweighting step.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError
from ..model import slacks_at
from .simplex import solve_standard_form

_STATUS = {
    "optimal": "optimal",
    "iteration-limit": "iteration-limit",
    "infeasible": "infeasible-numerics",
    "unbounded": "infeasible-numerics",
}


@dataclass(frozen=True)
class SolverTolerances:
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-8
    max_pivots: int = None
    theta_box: float = 1e6

    def __post_init__(self):
        for name in ("feasibility_tol", "optimality_tol", "theta_box"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.max_pivots is not None and self.max_pivots <= 0:
            raise InvalidArgumentError("max_pivots must be positive")

    def pivots_for(self, system):
        if self.max_pivots is not None:
            return self.max_pivots
        return 50 * (system.n + system.d)


DEFAULT_TOL = SolverTolerances()


@dataclass
class SlackSolution:
    theta: np.ndarray
    slacks: np.ndarray
    objective: float
    status: str
    iterations: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == "optimal"


def _check_weights(weights, n):
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise InvalidArgumentError(f"expected {n} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise InvalidArgumentError("weights must be strictly positive and finite")
    return w


def _check_eps(epsilon):
    if not epsilon >= 0:
        raise InvalidArgumentError(f"epsilon must be >= 0, got {epsilon}")


def _slack_dual(system, epsilon, box):
    """Constraint matrix and costs of the dual slack LP (weights enter via b)."""
    A, b = system.A, system.b
    R, d, n = system.n_rows, system.d, system.n
    ncol = 2 * R + 2 * d + n
    M = np.zeros((d + n, ncol))
    M[:d, :R] = A.T
    M[:d, R:2 * R] = -A.T
    M[:d, 2 * R:2 * R + d] = np.eye(d)
    M[:d, 2 * R + d:2 * R + 2 * d] = -np.eye(d)
    rows = d + system.group
    M[rows, np.arange(R)] = 1.0
    M[rows, R + np.arange(R)] = 1.0
    M[d:, 2 * R + 2 * d:] = np.eye(n)
    cost = np.concatenate([epsilon + b, epsilon - b, np.full(2 * d, box), np.zeros(n)])
    return M, cost


def solve_weighted_slack_lp(system, epsilon, weights, tol=DEFAULT_TOL, warm_start=None):
    """Global optimum of the weighted slack LP.

    ``warm_start`` may be a previous :class:`SlackSolution` for the same
    system and epsilon; its basis seeds the simplex.
    """
    _check_eps(epsilon)
    w = _check_weights(weights, system.n)
    M, cost = _slack_dual(system, epsilon, tol.theta_box)
    rhs = np.concatenate([np.zeros(system.d), w])
    basis = None
    if warm_start is not None:
        basis = warm_start.diagnostics.get("basis")
    res = solve_standard_form(cost, M, rhs, basis=basis, max_pivots=tol.pivots_for(system),
                              tol=tol.feasibility_tol)
    status = _STATUS[res.status]
    d, R = system.d, system.n_rows
    if status != "optimal":
        theta = np.zeros(d)
        s = slacks_at(system, theta, epsilon)
        return SlackSolution(theta, s, float(w @ s), status, res.pivots,
                             {"basis": None, "pivots": res.pivots})
    theta = res.y[:d].copy()
    s = slacks_at(system, theta, epsilon)
    s[s <= tol.feasibility_tol] = 0.0
    z = res.x
    diagnostics = {
        "basis": res.basis,
        "basis_size": int(res.basis.size),
        "pivots": res.pivots,
        "phase1_pivots": res.phase1_pivots,
        "warm": res.warm,
        "dual_objective": -float(res.objective),
        "row_multipliers": z[:R] - z[R:2 * R],
        "group_multipliers": z[2 * R + 2 * d:],
        "rank": int(np.linalg.matrix_rank(system.A)),
    }
    return SlackSolution(theta, s, float(w @ s), status, res.pivots, diagnostics)


def solve_slack_l1(system, epsilon, tol=DEFAULT_TOL, warm_start=None):
    """Unweighted slack LP: minimize the plain sum of shrinkage residuals."""
    return solve_weighted_slack_lp(system, epsilon, np.ones(system.n), tol, warm_start)


def _chebyshev(A, b, offset, tol, max_pivots):
    """min t  s.t.  |A theta - b| <= offset + t, solved through its dual."""
    R, d = A.shape
    box = tol.theta_box
    M = np.zeros((d + 1, 2 * R + 2 * d))
    M[:d, :R] = A.T
    M[:d, R:2 * R] = -A.T
    M[:d, 2 * R:2 * R + d] = np.eye(d)
    M[:d, 2 * R + d:] = -np.eye(d)
    M[d, :2 * R] = 1.0
    cost = np.concatenate([b + offset, offset - b, np.full(2 * d, box)])
    rhs = np.zeros(d + 1)
    rhs[d] = 1.0
    res = solve_standard_form(cost, M, rhs, max_pivots=max_pivots, tol=tol.feasibility_tol)
    return res.y[:d].copy(), -float(res.y[d]), _STATUS[res.status], res.pivots


def solve_minmax(system, subset=None, tol=DEFAULT_TOL):
    """Chebyshev fit: ``theta`` minimizing the largest group residual over ``subset``.

    Returns ``(theta, t)`` with ``t`` recomputed from ``theta``. Raises
    :class:`~maxcon.errors.SolverError` if the LP does not reach optimality.
    """
    from ..errors import SolverError

    groups = np.arange(system.n) if subset is None else np.unique(np.asarray(subset, dtype=int))
    if groups.size == 0:
        raise InvalidArgumentError("minmax subset must be nonempty")
    rows = system.rows_of(groups)
    A, b = system.A[rows], system.b[rows]
    theta, _, status, pivots = _chebyshev(A, b, np.zeros(rows.size), tol,
                                          50 * (rows.size + system.d + 1))
    if status != "optimal":
        raise SolverError(f"minmax LP ended with status {status} after {pivots} pivots")
    t = float(np.abs(A @ theta - b).max())
    return theta, t


def slack_feasible(system, epsilon, s, tol=DEFAULT_TOL):
    """Whether some ``theta`` satisfies ``r_g(theta) <= epsilon + s_g`` for all groups."""
    s = np.asarray(s, dtype=float)
    offset = epsilon + s[system.group]
    _, t, status, _ = _chebyshev(system.A, system.b, offset, tol, 50 * (system.n_rows + system.d))
    return status == "optimal" and t <= tol.feasibility_tol


def complementary_slackness_violation(system, epsilon, solution):
    """Largest violation of the LP complementary-slackness conditions.

    Each row multiplier must vanish unless its residual constraint is active,
    and each group multiplier (dual of ``s_g >= 0``) must vanish unless
    ``s_g == 0``.
    """
    diag = solution.diagnostics
    lam = diag["row_multipliers"]
    mu = diag["group_multipliers"]
    r_row = np.abs(system.A @ solution.theta - system.b)
    gap_row = epsilon + solution.slacks[system.group] - r_row
    worst = float(np.max(np.abs(lam) * np.maximum(gap_row, 0.0), initial=0.0))
    worst = max(worst, float(np.max(mu * solution.slacks, initial=0.0)))
    return worst

