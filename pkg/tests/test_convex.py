import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog, minimize

from maxcon.convex import (DEFAULT_TOL, SolverTolerances, complementary_slackness_violation,
                           slack_feasible, solve_minmax, solve_slack_l1, solve_standard_form,
                           solve_weighted_slack_lp, solve_weighted_slack_qp)
from maxcon.errors import InvalidArgumentError
from maxcon.model import ResidualSystem, residuals
from oracles import vertex_enumeration_lp


def highs_lp(S, eps, w):
    """Weighted slack LP in (theta, s) solved by HiGHS."""
    R, d, n = S.n_rows, S.d, S.n
    E = np.zeros((R, n))
    E[np.arange(R), S.group] = 1.0
    A_ub = np.block([[S.A, -E], [-S.A, -E]])
    b_ub = np.concatenate([eps + S.b, eps - S.b])
    c = np.concatenate([np.zeros(d), w])
    bounds = [(None, None)] * d + [(0, None)] * n
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    assert res.status == 0
    return res.fun


def random_system(r, n, d, grouped=False):
    if grouped:
        group = np.repeat(np.arange(n), 2)
    else:
        group = np.arange(n)
    A = r.normal(size=(group.size, d))
    b = r.normal(size=group.size) * 2
    return ResidualSystem(A, b, group)


# ---------------------------------------------------------------- standard form simplex

def test_simplex_matches_highs_with_warm_restart():
    r = np.random.default_rng(7)
    for _ in range(60):
        m, n = r.integers(2, 6), r.integers(6, 14)
        A = r.normal(size=(m, n))
        x0 = r.uniform(0, 1, size=n)
        b = A @ x0
        c = r.uniform(0.1, 2.0, size=n)
        ref = linprog(c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
        res = solve_standard_form(c, A, b)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(ref.fun, rel=1e-9, abs=1e-9)
        assert np.all(A.T @ res.y <= c + 1e-9)          # dual feasible
        b2 = A @ r.uniform(0, 1, size=n)
        ref2 = linprog(c, A_eq=A, b_eq=b2, bounds=[(0, None)] * n, method="highs")
        res2 = solve_standard_form(c, A, b2, basis=res.basis)
        assert res2.objective == pytest.approx(ref2.fun, rel=1e-9, abs=1e-9)


def test_simplex_infeasible_and_unbounded():
    A = np.array([[1.0, 1.0]])
    assert solve_standard_form([1.0, 1.0], A, [-1.0]).status == "infeasible"
    A = np.array([[1.0, -1.0]])
    assert solve_standard_form([-1.0, -1.0], A, [0.0]).status == "unbounded"


# ---------------------------------------------------------------- weighted slack LP

def test_lp_1d_example_against_grid():
    S = ResidualSystem.ungrouped(np.ones((3, 1)), [0.0, 0.1, 5.0])
    grid = np.linspace(-1, 6, 700001)
    oracle = np.min(np.sum(np.maximum(np.abs(grid[:, None] - S.b) - 0.2, 0), axis=1))
    sol = solve_weighted_slack_lp(S, 0.2, np.ones(3))
    assert sol.ok
    assert sol.objective == pytest.approx(oracle, abs=1e-6)
    assert sol.objective == pytest.approx(4.6, abs=1e-9)
    assert 0.2 - 1e-9 <= sol.theta[0] <= 0.3 + 1e-9


def test_lp_feasible_interior_gives_zero():
    r = np.random.default_rng(3)
    A = r.normal(size=(15, 3))
    theta = r.normal(size=3)
    S = ResidualSystem.ungrouped(A, A @ theta + r.uniform(-0.1, 0.1, size=15))
    sol = solve_weighted_slack_lp(S, 0.2, r.uniform(0.5, 2, size=15))
    assert sol.objective == 0 and np.all(sol.slacks == 0)


def test_lp_weight_scaling():
    r = np.random.default_rng(4)
    S = random_system(r, 12, 2)
    w = r.uniform(0.1, 3, size=12)
    a = solve_weighted_slack_lp(S, 0.3, w)
    b = solve_weighted_slack_lp(S, 0.3, 7.5 * w)
    assert b.objective == pytest.approx(7.5 * a.objective, rel=1e-9)
    # the scaled problem's minimizer is also optimal for the original weights
    assert np.sum(w * b.slacks) == pytest.approx(a.objective, rel=1e-9)


@pytest.mark.parametrize("w", [[1.0, 0.0], [1.0, -2.0], [1.0, np.inf]])
def test_lp_rejects_bad_weights(w):
    S = ResidualSystem.ungrouped(np.ones((2, 1)), [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        solve_weighted_slack_lp(S, 0.1, w)


def test_lp_iteration_limit():
    S = random_system(np.random.default_rng(5), 30, 3)
    sol = solve_weighted_slack_lp(S, 0.1, np.ones(30), tol=SolverTolerances(max_pivots=2))
    assert sol.status == "iteration-limit"


def test_lp_grouped_matches_highs():
    r = np.random.default_rng(6)
    for _ in range(40):
        S = random_system(r, int(r.integers(3, 12)), int(r.integers(1, 4)), grouped=True)
        w = r.uniform(0.1, 2, size=S.n)
        sol = solve_weighted_slack_lp(S, 0.25, w)
        assert sol.objective == pytest.approx(highs_lp(S, 0.25, w), rel=1e-7, abs=1e-9)


def test_lp_duality_gap_and_complementary_slackness():
    r = np.random.default_rng(8)
    for _ in range(40):
        S = random_system(r, int(r.integers(5, 25)), int(r.integers(1, 4)), grouped=bool(r.integers(2)))
        w = r.uniform(0.1, 5, size=S.n)
        sol = solve_weighted_slack_lp(S, 0.3, w)
        assert sol.objective - sol.diagnostics["dual_objective"] <= DEFAULT_TOL.optimality_tol
        assert complementary_slackness_violation(S, 0.3, sol) <= 1e-8
        r_g = residuals(S, sol.theta)
        assert np.all(r_g <= 0.3 + sol.slacks + 1e-9)
        assert np.sum(w * sol.slacks) == pytest.approx(sol.objective, rel=1e-8)


def test_lp_deterministic():
    S = random_system(np.random.default_rng(9), 20, 3)
    w = np.linspace(0.5, 2, 20)
    a, b = solve_weighted_slack_lp(S, 0.2, w), solve_weighted_slack_lp(S, 0.2, w)
    assert np.array_equal(a.theta, b.theta) and a.iterations == b.iterations


def test_lp_warm_start_agrees_with_cold():
    r = np.random.default_rng(10)
    S = random_system(r, 40, 3)
    first = solve_weighted_slack_lp(S, 0.2, np.ones(40))
    w = r.uniform(0.1, 10, size=40)
    warm = solve_weighted_slack_lp(S, 0.2, w, warm_start=first)
    cold = solve_weighted_slack_lp(S, 0.2, w)
    assert warm.diagnostics["warm"]
    assert warm.objective == pytest.approx(cold.objective, rel=1e-9, abs=1e-12)


def test_lp_rank_deficient_reported():
    A = np.column_stack([np.ones(6), np.ones(6)])
    S = ResidualSystem.ungrouped(A, np.arange(6.0))
    sol = solve_weighted_slack_lp(S, 0.5, np.ones(6))
    assert sol.ok and sol.diagnostics["rank"] == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 10), st.integers(1, 2))
def test_lp_against_vertex_enumeration(seed, n, d):
    r = np.random.default_rng(seed)
    S = random_system(r, n, d)
    w = r.uniform(0.1, 3, size=n)
    sol = solve_weighted_slack_lp(S, 0.3, w)
    oracle = vertex_enumeration_lp(np.asarray(S.A), np.asarray(S.b), w, 0.3)
    assert abs(sol.objective - oracle) <= 1e-6


def test_slack_l1_is_unit_weight_lp():
    S = random_system(np.random.default_rng(11), 15, 2)
    a = solve_slack_l1(S, 0.2)
    b = solve_weighted_slack_lp(S, 0.2, np.ones(15))
    assert a.objective == b.objective and np.array_equal(a.theta, b.theta)
    S1 = ResidualSystem.ungrouped(np.ones((3, 1)), [0.0, 0.1, 5.0])
    assert solve_slack_l1(S1, 0.2).objective == pytest.approx(4.6, abs=1e-9)


# ---------------------------------------------------------------- Chebyshev fit

def brute_minmax(A, b):
    R, d = A.shape
    best = np.inf
    for rows in itertools.combinations(range(R), d + 1):
        for signs in itertools.product((-1.0, 1.0), repeat=d + 1):
            M = np.column_stack([A[list(rows)], -np.array(signs)])
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            sol = np.linalg.solve(M, b[list(rows)])
            best = min(best, np.max(np.abs(A @ sol[:d] - b)))
    return best


def test_minmax_midpoint():
    S = ResidualSystem.ungrouped(np.ones((2, 1)), [0.0, 1.0])
    theta, t = solve_minmax(S)
    assert theta[0] == pytest.approx(0.5) and t == pytest.approx(0.5)


def test_minmax_single_point():
    S = ResidualSystem.ungrouped(np.array([[1.0, 2.0], [3.0, 1.0]]), [1.0, 5.0])
    _, t = solve_minmax(S, [1])
    assert t == pytest.approx(0.0, abs=1e-12)


def test_minmax_against_brute_force():
    r = np.random.default_rng(12)
    for _ in range(25):
        S = random_system(r, 8, 2)
        _, t = solve_minmax(S)
        assert t == pytest.approx(brute_minmax(np.asarray(S.A), np.asarray(S.b)), abs=1e-6)


def test_minmax_empty_subset():
    S = ResidualSystem.ungrouped(np.ones((2, 1)), [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        solve_minmax(S, [])


def test_slack_feasible():
    S = ResidualSystem.ungrouped(np.ones((2, 1)), [0.0, 1.0])
    assert slack_feasible(S, 0.5, [0.0, 0.0])
    assert not slack_feasible(S, 0.4, [0.0, 0.0])
    assert slack_feasible(S, 0.4, [0.1, 0.1])


# ---------------------------------------------------------------- weighted slack QP

def test_qp_closed_form_1d():
    S = ResidualSystem.ungrouped(np.ones((2, 1)), [0.0, 4.0])
    sol = solve_weighted_slack_qp(S, 0.0, np.ones(2))
    assert sol.ok
    assert sol.theta[0] == pytest.approx(2.0)
    assert sol.slacks == pytest.approx([2.0, 2.0])
    assert sol.objective == pytest.approx(8.0)


def test_qp_all_inliers():
    r = np.random.default_rng(13)
    A = r.normal(size=(10, 2))
    S = ResidualSystem.ungrouped(A, A @ [1.0, -1.0])
    sol = solve_weighted_slack_qp(S, 0.1, np.ones(10))
    assert sol.objective == 0 and np.all(sol.slacks == 0)


def test_qp_against_smooth_reduction():
    # For one row per point the QP reduces to the C1 convex function
    # F(theta) = sum w_i max(0, |r_i| - eps)^2, minimized here by BFGS restarts.
    r = np.random.default_rng(14)
    for _ in range(20):
        n, d = int(r.integers(4, 12)), int(r.integers(1, 4))
        S = random_system(r, n, d)
        w = r.uniform(0.2, 3, size=n)
        A, b = np.asarray(S.A), np.asarray(S.b)

        def F(th):
            e = A @ th - b
            h = np.maximum(np.abs(e) - 0.2, 0)
            return np.sum(w * h * h), A.T @ (2 * w * h * np.sign(e))

        best = min(minimize(F, r.normal(size=d), jac=True, method="BFGS",
                            options={"gtol": 1e-12}).fun for _ in range(5))
        sol = solve_weighted_slack_qp(S, 0.2, w)
        assert sol.ok and sol.diagnostics["kkt_residual"] <= DEFAULT_TOL.optimality_tol
        assert sol.objective <= best + 1e-9 * (1 + best)
        assert sol.objective >= best - 1e-6 * (1 + best)


def test_qp_not_worse_than_lp_minimizer():
    r = np.random.default_rng(15)
    for _ in range(20):
        S = random_system(r, int(r.integers(4, 15)), int(r.integers(1, 4)), grouped=bool(r.integers(2)))
        w = r.uniform(0.2, 3, size=S.n)
        lp = solve_weighted_slack_lp(S, 0.3, w)
        qp = solve_weighted_slack_qp(S, 0.3, w)
        assert qp.objective <= np.sum(w * lp.slacks ** 2) + 1e-9
