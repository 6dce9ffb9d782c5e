"""Comparison methods: RANSAC variants, outlier-removal loops, and an exact oracle."""

import itertools
import math
import time
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .convex.lp import DEFAULT_TOL, solve_minmax, solve_slack_l1
from .errors import DegenerateDataError, InvalidArgumentError, LimitExceededError, SolverError
from .model import consensus, residuals
from .reweight import make_result

# Boundary shrink used when solving subproblems so that points placed exactly
# on the threshold still count as inliers after rounding.
_MARGIN = 1e-9


def method_rng(seed, method):
    """Private generator for ``method`` derived from ``seed`` (PCG64)."""
    return np.random.default_rng([int(seed), zlib.crc32(method.encode())])


@dataclass(frozen=True)
class RansacConfig:
    confidence: float = 0.99
    max_iterations: int = 10000
    min_sample_size: Optional[int] = None
    seed: int = 0
    time_budget: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise InvalidArgumentError(f"confidence must lie in (0, 1), got {self.confidence}")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.min_sample_size is not None and self.min_sample_size < 1:
            raise InvalidArgumentError("min_sample_size must be >= 1")
        if self.time_budget is not None and not self.time_budget > 0:
            raise InvalidArgumentError("time_budget must be > 0")


@dataclass(frozen=True)
class MlesacConfig:
    iterations: int = 500
    em_steps: int = 10
    inlier_sigma: Optional[float] = None
    outlier_span: Optional[float] = None
    min_sample_size: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidArgumentError("iterations must be >= 1")
        if self.em_steps < 1:
            raise InvalidArgumentError("em_steps must be >= 1")
        for name in ("inlier_sigma", "outlier_span"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvalidArgumentError(f"{name} must be > 0")


def ransac_iterations(inlier_ratio, sample_size, confidence, cap):
    """``ceil(log(1 - rho) / log(1 - w^m))`` clipped to ``[1, cap]``."""
    p = inlier_ratio ** sample_size
    if p >= 1.0:
        return 1
    if p <= 0.0:
        return int(cap)
    k = math.log(1.0 - confidence) / math.log1p(-p)
    return int(min(cap, max(1, math.ceil(k))))


def minimal_sample_size(system):
    """Fewest groups whose rows can pin down ``d`` parameters."""
    return int(math.ceil(system.d / system.group_sizes().min()))


def _check_sample_size(system, m):
    if system.n < m:
        raise InvalidArgumentError(f"need at least {m} data points, got {system.n}")


def _fit_rows(system, groups, exact):
    """Exact (square) or least-squares fit to all rows of ``groups``; ``None`` if degenerate."""
    rows = system.rows_of(groups)
    A, b = system.A[rows], system.b[rows]
    if exact and A.shape[0] == A.shape[1]:
        if np.linalg.cond(A) > 1e12:
            return None
        return np.linalg.solve(A, b)
    theta, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
    if rank < system.d or sv[-1] <= 1e-12 * sv[0]:
        return None
    return theta


def _draw(rng, n, m):
    return np.sort(rng.choice(n, size=m, replace=False))


def _sample_batches(system, m, rng, batch=64):
    """Yield ``(thetas, valid)`` for successive batches of minimal samples.

    When every group has the same size and the sampled rows form a square
    system, the exact fits are solved in one batched call.
    """
    sizes = system.group_sizes()
    g = int(sizes[0])
    square = bool(np.all(sizes == g)) and m * g == system.d
    d = system.d
    while True:
        if not square:
            thetas = np.zeros((batch, d))
            valid = np.zeros(batch, dtype=bool)
            for i in range(batch):
                th = _fit_rows(system, _draw(rng, system.n, m), exact=True)
                if th is not None:
                    thetas[i], valid[i] = th, True
            yield thetas, valid
            continue
        keys = rng.random((batch, system.n))
        groups = np.sort(np.argpartition(keys, m - 1, axis=1)[:, :m], axis=1)
        rows = (system._order[system._starts[groups][:, :, None] + np.arange(g)]).reshape(batch, -1)
        A = system.A[rows]
        b = system.b[rows]
        sv = np.linalg.svd(A, compute_uv=False)
        valid = sv[:, -1] > 1e-12 * sv[:, 0]
        thetas = np.zeros((batch, d))
        if valid.any():
            thetas[valid] = np.linalg.solve(A[valid], b[valid][:, :, None])[:, :, 0]
        yield thetas, valid


def _batch_residuals(system, thetas):
    """Group residuals for each row of ``thetas``: shape ``(batch, n)``."""
    r = np.abs(thetas @ system.A.T - system.b)
    return system.group_max(r.T).T


def _stop_reason(cfg, t0, draws, hypotheses, k):
    if draws >= cfg.max_iterations:
        return "iteration-limit"
    if cfg.time_budget is not None:
        if time.perf_counter() - t0 >= cfg.time_budget:
            return "time-budget"
    elif hypotheses >= k:
        return "tolerance"
    return None


def ransac_fit(system, epsilon, cfg=RansacConfig()):
    """Vanilla RANSAC with the adaptive stopping count.

    With ``cfg.time_budget`` set the adaptive stop is ignored and sampling
    continues until the budget (seconds) is spent or the cap is hit.
    """
    t0 = time.perf_counter()
    m = cfg.min_sample_size or minimal_sample_size(system)
    _check_sample_size(system, m)
    rng = method_rng(cfg.seed, "ransac")
    best_theta, best_count = None, -1
    k = cfg.max_iterations
    draws = hypotheses = 0
    stop = None
    for thetas, valid in _sample_batches(system, m, rng):
        counts = (_batch_residuals(system, thetas) <= epsilon).sum(axis=1)
        for theta, ok, count in zip(thetas, valid, counts):
            stop = _stop_reason(cfg, t0, draws, hypotheses, k)
            if stop:
                break
            draws += 1
            if not ok:
                continue
            hypotheses += 1
            if count > best_count:
                best_theta, best_count = theta, int(count)
                k = ransac_iterations(count / system.n, m, cfg.confidence, cfg.max_iterations)
        if stop:
            break
    if best_theta is None:
        raise DegenerateDataError(f"all {draws} minimal samples were degenerate")
    return make_result(system, best_theta, epsilon, wall_time=time.perf_counter() - t0,
                       terminated_by=stop, iterations=hypotheses, method="ransac",
                       info={"draws": draws, "adaptive_k": k})


def _local_optimize(system, epsilon, theta, m, rng, inner_resamples=10, anneal=4.0, steps=4):
    """Inner RANSAC on the inlier set followed by threshold-annealed least squares."""
    idx, count = consensus(system, theta, epsilon)
    best_theta, best_count = theta, count
    size = min(14, idx.size // 2)
    starts = []
    if size >= m and size > 0:
        for _ in range(inner_resamples):
            sub = np.sort(rng.choice(idx, size=size, replace=False))
            fit = _fit_rows(system, sub, exact=False)
            if fit is not None:
                starts.append(fit)
    else:
        starts.append(theta)
    for start in starts:
        cand = start
        for mult in np.linspace(anneal, 1.0, steps):
            inl = np.flatnonzero(residuals(system, cand) <= mult * epsilon)
            if inl.size < m:
                break
            fit = _fit_rows(system, inl, exact=False)
            if fit is None:
                break
            cand = fit
        c = consensus(system, cand, epsilon)[1]
        if c > best_count:
            best_theta, best_count = cand, c
    return best_theta, best_count


def lo_ransac_fit(system, epsilon, cfg=RansacConfig()):
    """RANSAC with local optimization run whenever a new best model appears."""
    t0 = time.perf_counter()
    m = cfg.min_sample_size or minimal_sample_size(system)
    _check_sample_size(system, m)
    rng = method_rng(cfg.seed, "lo-ransac")
    lo_rng = method_rng(cfg.seed, "lo-ransac-inner")
    best_theta, best_count = None, -1
    k = cfg.max_iterations
    draws = hypotheses = lo_runs = 0
    stop = None
    sampler = _sample_batches(system, m, rng)
    for thetas, valid in sampler:
        counts = (_batch_residuals(system, thetas) <= epsilon).sum(axis=1)
        for theta, ok, count in zip(thetas, valid, counts):
            stop = _stop_reason(cfg, t0, draws, hypotheses, k)
            if stop:
                break
            draws += 1
            if not ok:
                continue
            hypotheses += 1
            if count > best_count:
                lo_runs += 1
                theta, count = _local_optimize(system, epsilon, theta, m, lo_rng)
                best_theta, best_count = theta, count
                k = ransac_iterations(count / system.n, m, cfg.confidence, cfg.max_iterations)
        if stop:
            break
    if best_theta is None:
        raise DegenerateDataError(f"all {draws} minimal samples were degenerate")
    return make_result(system, best_theta, epsilon, wall_time=time.perf_counter() - t0,
                       terminated_by=stop, iterations=hypotheses, method="lo-ransac",
                       info={"draws": draws, "adaptive_k": k, "local_optimizations": lo_runs})


def _mixture_terms(r, sigma, span):
    p_in = np.sqrt(2.0 / np.pi) / sigma * np.exp(-0.5 * (r / sigma) ** 2)
    return p_in, 1.0 / span


def estimate_mixing(r, sigma, span, steps=10, start=0.5):
    """EM estimate of the inlier fraction for half-normal inliers and uniform outliers.

    ``r`` may be one residual vector or a batch (one row per hypothesis).
    Returns ``(mixing, negative_log_likelihood)``.
    """
    r = np.abs(np.asarray(r, dtype=float))
    p_in, p_out = _mixture_terms(r, sigma, span)
    mix = np.full(r.shape[:-1] + (1,), float(start))
    for _ in range(steps):
        num = mix * p_in
        z = num / (num + (1.0 - mix) * p_out)
        mix = np.clip(z.mean(axis=-1, keepdims=True), 1e-12, 1.0 - 1e-12)
    nll = -np.sum(np.log(mix * p_in + (1.0 - mix) * p_out), axis=-1)
    if r.ndim == 1:
        return float(mix[0]), float(nll)
    return mix[:, 0], nll


def _default_span(system, epsilon):
    theta, *_ = np.linalg.lstsq(system.A, system.b, rcond=None)
    return max(float(residuals(system, theta).max()), 4.0 * epsilon, 1e-12)


def mlesac_fit(system, epsilon, cfg=MlesacConfig()):
    """Sample hypotheses and keep the one with the best mixture likelihood.

    Defaults: ``inlier_sigma = epsilon / 2``; ``outlier_span`` is the largest
    residual of an all-data least-squares fit, at least ``4 * epsilon``.
    """
    t0 = time.perf_counter()
    m = cfg.min_sample_size or minimal_sample_size(system)
    _check_sample_size(system, m)
    sigma = cfg.inlier_sigma if cfg.inlier_sigma is not None else epsilon / 2.0
    if not sigma > 0:
        raise InvalidArgumentError("inlier_sigma must be > 0 (set it explicitly when epsilon = 0)")
    span = cfg.outlier_span if cfg.outlier_span is not None else _default_span(system, epsilon)
    rng = method_rng(cfg.seed, "mlesac")
    best_theta, best_nll, best_mix = None, np.inf, np.nan
    draws = 0
    for thetas, valid in _sample_batches(system, m, rng):
        take = min(len(valid), cfg.iterations - draws)
        thetas, valid = thetas[:take], valid[:take]
        draws += take
        if valid.any():
            mix, nll = estimate_mixing(_batch_residuals(system, thetas[valid]), sigma, span,
                                       cfg.em_steps)
            k = int(np.argmin(nll))
            if nll[k] < best_nll:
                best_theta, best_nll, best_mix = thetas[valid][k], float(nll[k]), float(mix[k])
        if draws >= cfg.iterations:
            break
    if best_theta is None:
        raise DegenerateDataError(f"all {draws} minimal samples were degenerate")
    return make_result(system, best_theta, epsilon, wall_time=time.perf_counter() - t0,
                       terminated_by="iteration-limit", iterations=draws, method="mlesac",
                       info={"mixing": best_mix, "nll": best_nll, "sigma": sigma, "span": span})


def iterative_l1_fit(system, epsilon, tol=DEFAULT_TOL):
    """Repeatedly solve the slack l1 problem and drop points with positive slack."""
    t0 = time.perf_counter()
    keep = np.arange(system.n)
    eps = epsilon * (1.0 - _MARGIN)
    rounds = 0
    sol = None
    while True:
        sub = system.subsystem(keep)
        sol = solve_slack_l1(sub, eps, tol)
        rounds += 1
        if not sol.ok:
            raise SolverError(f"slack l1 subproblem ended with status {sol.status}")
        pos = sol.slacks > tol.feasibility_tol
        if not pos.any():
            break
        if pos.all():
            # never empty the set: drop only the largest slack
            pos = np.zeros_like(pos)
            pos[np.argmax(sol.slacks)] = True
        keep = keep[~pos]
        if keep.size == 0:
            raise DegenerateDataError("iterative l1 removed every point")
    return make_result(system, sol.theta, epsilon, wall_time=time.perf_counter() - t0,
                       terminated_by="tolerance", iterations=rounds, method="l1",
                       info={"survivors": keep})


def iterative_linf_fit(system, epsilon, tol=DEFAULT_TOL):
    """Repeatedly fit the Chebyshev model and drop the points attaining the max residual."""
    t0 = time.perf_counter()
    keep = np.arange(system.n)
    eps = epsilon * (1.0 - _MARGIN)
    rounds = 0
    while True:
        theta, t = solve_minmax(system, keep, tol)
        rounds += 1
        if t <= eps:
            break
        r = residuals(system, theta)[keep]
        worst = r >= t - tol.feasibility_tol * max(1.0, t)
        if worst.all():
            # an equioscillating fit ties every point; drop the first one only
            worst = np.zeros_like(worst)
            worst[0] = True
        keep = keep[~worst]
        if keep.size == 0:
            raise DegenerateDataError("iterative l-infinity removed every point")
    return make_result(system, theta, epsilon, wall_time=time.perf_counter() - t0,
                       terminated_by="tolerance", iterations=rounds, method="linf",
                       info={"survivors": keep})


def exact_work(system):
    """Number of candidate vertices ``C(rows, d) * 2^d`` exact_maxcon would examine."""
    return math.comb(system.n_rows, system.d) * 2 ** system.d


def exact_maxcon(system, epsilon, limit=5_000_000, chunk=4096):
    """Globally optimal consensus by enumerating boundary vertices.

    For linear residuals some optimal ``theta`` lies where ``d`` row
    constraints hold with equality, ``a_j . theta - b_j = +-epsilon``. Every
    such vertex (plus the exact fit of each ``d``-subset) is solved and
    scored. Raises :class:`LimitExceededError` when the candidate count
    exceeds ``limit``.
    """
    t0 = time.perf_counter()
    work = exact_work(system)
    if work > limit:
        raise LimitExceededError(f"exact enumeration needs {work} candidates (> limit {limit})")
    d = system.d
    eps = epsilon * (1.0 - _MARGIN)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=d)) + [[0.0] * d]).T  # (d, P)

    best_theta, best_count = None, -1
    combos = itertools.combinations(range(system.n_rows), d)
    examined = 0
    while True:
        batch = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if batch.size == 0:
            break
        A = system.A[batch]                       # (B, d, d)
        b = system.b[batch]                       # (B, d)
        det = np.abs(np.linalg.det(A))
        scale = np.prod(np.linalg.norm(A, axis=2), axis=1)
        ok = det > 1e-12 * np.maximum(scale, 1e-300)
        if not ok.any():
            continue
        A, b = A[ok], b[ok]
        rhs = b[:, :, None] + eps * signs[None]  # (B, d, P)
        th = np.linalg.solve(A, rhs).transpose(0, 2, 1).reshape(-1, d)
        r = np.abs(th @ system.A.T - system.b)   # (K, rows)
        inl = (system.group_max(r.T) <= epsilon)  # (n, K)
        counts = inl.sum(axis=0)
        examined += th.shape[0]
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_theta, best_count = th[k], int(counts[k])
            if best_count == system.n:
                break
    if best_theta is None:
        best_theta, *_ = np.linalg.lstsq(system.A, system.b, rcond=None)
    return make_result(system, best_theta, epsilon, wall_time=time.perf_counter() - t0,
                       terminated_by="tolerance", iterations=examined, method="exact",
                       info={"work": work})
