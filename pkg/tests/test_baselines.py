import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from maxcon.baselines import (MlesacConfig, RansacConfig, estimate_mixing, exact_maxcon, exact_work,
                              iterative_l1_fit, iterative_linf_fit, lo_ransac_fit, mlesac_fit,
                              ransac_fit, ransac_iterations)
from maxcon.errors import DegenerateDataError, InvalidArgumentError, LimitExceededError
from maxcon.model import ResidualSystem, residuals, synth_hyperplane


def line_instance(seed, n=12, n_out=5, eps_noise=0.1):
    r = np.random.default_rng(seed)
    A = np.column_stack([r.uniform(-1, 1, n), np.ones(n)])
    b = A @ (r.normal(size=2) * 0.5) + r.normal(0, eps_noise, n)
    b[:n_out] += r.uniform(-2, 2, n_out)
    return ResidualSystem.ungrouped(A, b)


def grid_best(A, b, eps, lo=-3.0, hi=3.0, N=601):
    """Dense grid search over theta, refined three times around the best cell."""
    g = np.linspace(lo, hi, N)
    th = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    c = (np.abs(th @ A.T - b) <= eps).sum(1)
    best, arg = c.max(), th[c.argmax()]
    step = (hi - lo) / (N - 1)
    for _ in range(3):
        g1 = arg[0] + np.linspace(-3 * step, 3 * step, 241)
        g2 = arg[1] + np.linspace(-3 * step, 3 * step, 241)
        th = np.stack(np.meshgrid(g1, g2, indexing="ij"), -1).reshape(-1, 2)
        c = (np.abs(th @ A.T - b) <= eps).sum(1)
        if c.max() >= best:
            best, arg = c.max(), th[c.argmax()]
        step /= 5
    return int(best)


def lp_feasible(S, idx, eps):
    A, b = np.asarray(S.A)[idx], np.asarray(S.b)[idx]
    r = linprog(np.zeros(S.d), A_ub=np.vstack([A, -A]), b_ub=np.r_[b + eps, eps - b],
                bounds=[(None, None)] * S.d, method="highs")
    return r.status == 0


def clean(n=30, d=3, seed=0):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, d))
    return ResidualSystem.ungrouped(A, A @ r.normal(size=d))


# ---------------------------------------------------------------- RANSAC family

def test_ransac_iterations_formula():
    for w in (0.1, 0.3, 0.5, 0.9):
        for m in (2, 4, 8):
            # log1p keeps 1 - w^m accurate when w^m is tiny
            k = math.ceil(math.log(0.01) / math.log1p(-(w ** m)))
            assert ransac_iterations(w, m, 0.99, 10**9) == max(1, k)
    assert ransac_iterations(1.0, 8, 0.99, 100) == 1
    assert ransac_iterations(0.0, 8, 0.99, 100) == 100
    assert ransac_iterations(0.01, 8, 0.99, 100) == 100


def test_ransac_all_inliers_one_iteration():
    res = ransac_fit(clean(), 1e-6)
    assert res.count == 30 and res.iterations == 1 and res.terminated_by == "tolerance"


def test_ransac_bounded_by_oracle():
    for seed in range(10):
        inst = synth_hyperplane(30, 2, outlier_frac=0.5, seed=seed)
        res = ransac_fit(inst.system, 0.3, RansacConfig(seed=seed))
        assert 3 <= res.count <= exact_maxcon(inst.system, 0.3).count


def test_ransac_deterministic_and_capped():
    inst = synth_hyperplane(100, 4, outlier_frac=0.7, seed=1)
    a = ransac_fit(inst.system, 0.3, RansacConfig(seed=5, max_iterations=50))
    b = ransac_fit(inst.system, 0.3, RansacConfig(seed=5, max_iterations=50))
    assert np.array_equal(a.theta, b.theta) and a.iterations == b.iterations
    assert a.info["draws"] <= 50


def test_ransac_time_budget_mode():
    inst = synth_hyperplane(100, 4, outlier_frac=0.5, seed=1)
    res = ransac_fit(inst.system, 0.3, RansacConfig(time_budget=0.05, max_iterations=10**7))
    assert res.terminated_by == "time-budget" and res.wall_time >= 0.05


def test_ransac_degenerate_data():
    S = ResidualSystem.ungrouped(np.ones((10, 2)), np.arange(10.0))
    with pytest.raises(DegenerateDataError):
        ransac_fit(S, 0.1, RansacConfig(max_iterations=20))


def test_ransac_config_validation():
    with pytest.raises(InvalidArgumentError):
        RansacConfig(confidence=1.0)
    with pytest.raises(InvalidArgumentError):
        ransac_fit(ResidualSystem.ungrouped(np.eye(3), np.ones(3))
                   .subsystem([0, 1]), 0.1)


def test_lo_ransac_all_inliers():
    assert lo_ransac_fit(clean(), 1e-6).count == 30


def test_lo_ransac_not_worse_than_ransac():
    lo, va = [], []
    for seed in range(10):
        inst = synth_hyperplane(150, 4, outlier_frac=0.5, seed=seed)
        lo.append(lo_ransac_fit(inst.system, 0.3, RansacConfig(seed=seed)).count)
        va.append(ransac_fit(inst.system, 0.3, RansacConfig(seed=seed)).count)
    assert np.mean(lo) >= np.mean(va) - 1


def test_mlesac_all_inliers():
    assert mlesac_fit(clean(), 1e-3).count == 30


def test_mixing_estimate_recovers_fraction():
    for seed, frac in [(0, 0.3), (1, 0.5), (2, 0.7)]:
        inst = synth_hyperplane(400, 3, sigma_in=0.1, outlier_frac=frac, seed=seed)
        r = residuals(inst.system, inst.ground_truth.theta)
        mix, _ = estimate_mixing(r, 0.1, 10.0, steps=50)
        assert abs(mix - (1 - frac)) <= 0.1


def test_mixing_batch_matches_single():
    r = np.abs(np.random.default_rng(0).normal(size=(3, 40)))
    mix, nll = estimate_mixing(r, 0.5, 5.0)
    for i in range(3):
        m1, n1 = estimate_mixing(r[i], 0.5, 5.0)
        assert m1 == pytest.approx(mix[i]) and n1 == pytest.approx(nll[i])


def test_mlesac_deterministic():
    inst = synth_hyperplane(80, 3, outlier_frac=0.4, seed=3)
    a = mlesac_fit(inst.system, 0.3, MlesacConfig(seed=2, iterations=100))
    b = mlesac_fit(inst.system, 0.3, MlesacConfig(seed=2, iterations=100))
    assert np.array_equal(a.theta, b.theta) and a.iterations == 100


def test_mlesac_needs_sigma_at_zero_threshold():
    with pytest.raises(InvalidArgumentError):
        mlesac_fit(clean(), 0.0)


# ---------------------------------------------------------------- outlier removal loops

def test_l1_all_inliers_single_solve():
    res = iterative_l1_fit(clean(), 1e-3)
    assert res.count == 30 and res.iterations == 1


def test_linf_all_inliers_single_solve():
    res = iterative_linf_fit(clean(), 1e-3)
    assert res.count == 30 and res.iterations == 1


def test_removal_loops_survivors_are_inliers():
    for seed in range(8):
        inst = synth_hyperplane(40, 3, outlier_frac=0.4, seed=seed)
        S = inst.system
        for fit in (iterative_l1_fit, iterative_linf_fit):
            a, b = fit(S, 0.3), fit(S, 0.3)
            keep = a.info["survivors"]
            assert np.all(residuals(S, a.theta)[keep] <= 0.3)
            assert np.array_equal(a.theta, b.theta)
            assert a.iterations <= S.n


# ---------------------------------------------------------------- exact oracle

def test_exact_1d_hand_enumeration():
    S = ResidualSystem.ungrouped(np.ones((4, 1)), [0.0, 0.1, 0.3, 5.0])
    res = exact_maxcon(S, 0.2)
    assert res.count == 3
    assert 0.1 <= res.theta[0] <= 0.2


def test_exact_all_inliers():
    assert exact_maxcon(clean(12, 2), 1e-6).count == 12


def test_exact_limit_guard():
    S = synth_hyperplane(60, 5, seed=0).system
    assert exact_work(S) == math.comb(60, 5) * 32
    with pytest.raises(LimitExceededError):
        exact_maxcon(S, 0.3, limit=1000)


def test_exact_matches_grid_search():
    agree = 0
    for seed in range(100):
        S = line_instance(seed)
        e = exact_maxcon(S, 0.2).count
        g = grid_best(np.asarray(S.A), np.asarray(S.b), 0.2)
        assert g <= e
        if g < e:
            # the grid can miss a sliver-thin feasible cell; settle it with HiGHS
            res = exact_maxcon(S, 0.2)
            assert lp_feasible(S, res.inliers, 0.2 + 1e-12)
            assert not any(lp_feasible(S, list(c), 0.2 - 1e-9)
                           for c in itertools.combinations(range(S.n), e + 1))
        agree += g == e
    assert agree >= 95


def test_exact_grouped_upper_bounds_baselines():
    r = np.random.default_rng(3)
    for _ in range(10):
        n = 8
        A = r.normal(size=(2 * n, 2))
        b = A @ [0.5, -0.2] + r.normal(0, 0.05, 2 * n)
        b[:6] += r.uniform(-3, 3, 6)
        S = ResidualSystem(A, b, np.repeat(np.arange(n), 2))
        best = exact_maxcon(S, 0.2).count
        assert ransac_fit(S, 0.2).count <= best
        assert iterative_l1_fit(S, 0.2).count <= best


def test_linf_equioscillation_tie_keeps_points():
    # the Chebyshev line through three points ties all residuals
    S = ResidualSystem.ungrouped(np.column_stack([[0.0, 1.0, 2.0], np.ones(3)]), [0.0, 1.0, 0.0])
    res = iterative_linf_fit(S, 0.3)
    assert res.count == 2 and res.info["survivors"].size == 2
