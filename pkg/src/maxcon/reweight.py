"""Iteratively reweighted slack programs for maximum consensus.

Both schemes minimize the log surrogate ``G(s) = sum log(s_i + gamma)`` by
majorization: each outer step solves a convex slack problem whose weights
come from the previous slacks. IR-LP uses ``w = 1 / (s + gamma)`` with a
weighted slack LP; IR-QP uses ``w = 1 / (s^2 + gamma)`` with a weighted
slack QP.
"""

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import lsq_linear

from .convex.lp import DEFAULT_TOL, solve_weighted_slack_lp
from .convex.qp import solve_weighted_slack_qp
from .errors import InvalidArgumentError, SolverError
from .model import consensus, residuals, row_residuals, slacks_at

INIT_MODES = ("ones", "linf", "ransac", "custom")


@dataclass(frozen=True)
class IRConfig:
    """Outer-loop settings.

    ``margin`` shrinks the threshold the subproblems see to
    ``epsilon * (1 - margin)`` so that inliers placed exactly on the
    boundary by a simplex vertex still pass the inclusive consensus test
    after rounding.
    """

    epsilon: float = 0.3
    gamma: float = 0.01
    max_iters: int = 25
    zeta: float = 1e-4
    init: str = "ones"
    seed: int = 0
    margin: float = 1e-9

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InvalidArgumentError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be > 0, got {self.gamma}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidArgumentError(f"max_iters must be an integer >= 1, got {self.max_iters}")
        if not self.zeta > 0:
            raise InvalidArgumentError(f"zeta must be > 0, got {self.zeta}")
        if self.init not in INIT_MODES:
            raise InvalidArgumentError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if not 0 <= self.margin < 1:
            raise InvalidArgumentError("margin must lie in [0, 1)")

    @property
    def fit_epsilon(self):
        return self.epsilon * (1.0 - self.margin)


@dataclass
class IterRecord:
    surrogate: float
    weighted_objective: float
    criterion: float
    count: int
    slack_sum: float
    slack_max: float
    n_positive: int


@dataclass
class IterTrace:
    """Per-iteration records, one per subproblem solved.

    ``initial_surrogate`` is ``G(s^0)``. With ``init="ones"`` the starting
    slacks need not be attainable by any ``theta``, so descent is only
    guaranteed from the first solved iterate onwards.
    """

    initial_surrogate: float = np.nan
    records: List[IterRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def surrogates(self):
        return np.array([r.surrogate for r in self.records])

    @property
    def criteria(self):
        return np.array([r.criterion for r in self.records])

    @property
    def counts(self):
        return np.array([r.count for r in self.records], dtype=int)


@dataclass
class ConsensusResult:
    theta: np.ndarray
    inliers: np.ndarray
    count: int
    trace: IterTrace
    wall_time: float
    terminated_by: str
    iterations: int = 0
    method: str = ""
    slacks: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)


def _check_slacks(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise InvalidArgumentError("slacks must be finite and non-negative")
    return s


def _check_gamma(gamma):
    if not gamma > 0:
        raise InvalidArgumentError(f"gamma must be > 0, got {gamma}")


def surrogate_value(s, gamma):
    """``sum(log(s_i + gamma))``."""
    _check_gamma(gamma)
    s = _check_slacks(s)
    return float(np.sum(np.log(s + gamma)))


def update_weights_lp(s, gamma):
    _check_gamma(gamma)
    return 1.0 / (_check_slacks(s) + gamma)


def update_weights_qp(s, gamma):
    _check_gamma(gamma)
    s = _check_slacks(s)
    return 1.0 / (s * s + gamma)


def make_result(system, theta, epsilon, *, trace=None, wall_time=0.0, terminated_by="tolerance",
                iterations=0, method="", slacks=None, info=None):
    """Package ``theta`` with its inclusive consensus set at ``epsilon``."""
    theta = np.asarray(theta, dtype=float)
    idx, count = consensus(system, theta, epsilon)
    return ConsensusResult(theta, idx, count, trace if trace is not None else IterTrace(),
                           wall_time, terminated_by, iterations, method, slacks, info or {})


def _initial_theta(system, config, init_theta):
    if init_theta is not None:
        theta = np.asarray(init_theta, dtype=float).reshape(-1)
        if theta.shape[0] != system.d:
            raise InvalidArgumentError(f"init theta has dimension {theta.shape[0]}, expected {system.d}")
        return theta
    if config.init == "ones":
        return None
    if config.init == "custom":
        raise InvalidArgumentError("init='custom' requires an initial theta")
    from . import baselines

    if config.init == "linf":
        return baselines.iterative_linf_fit(system, config.epsilon).theta
    return baselines.ransac_fit(system, config.epsilon, baselines.RansacConfig(seed=config.seed)).theta


def _reweighted_fit(system, config, init_theta, tol, solve, update, objective, method):
    t0 = time.perf_counter()
    eps = config.fit_epsilon
    theta0 = _initial_theta(system, config, init_theta)
    if theta0 is None:
        s = np.ones(system.n)
        attainable = False
    else:
        s = slacks_at(system, theta0, eps)
        attainable = True
    trace = IterTrace(initial_surrogate=surrogate_value(s, config.gamma))

    sol = None
    theta = theta0 if theta0 is not None else np.zeros(system.d)
    terminated = "iteration-limit"
    iters = 0
    for it in range(1, config.max_iters + 1):
        w = update(s, config.gamma)
        sol = solve(system, eps, w, tol, sol)
        if not sol.ok:
            raise SolverError(f"{method} subproblem ended with status {sol.status} at iteration {it}")
        iters = it
        theta = sol.theta
        s_new = sol.slacks
        crit = float(objective(w, s) - objective(w, s_new))
        trace.records.append(IterRecord(
            surrogate=surrogate_value(s_new, config.gamma),
            weighted_objective=float(objective(w, s_new)),
            criterion=crit,
            count=consensus(system, theta, config.epsilon)[1],
            slack_sum=float(s_new.sum()),
            slack_max=float(s_new.max()),
            n_positive=int(np.count_nonzero(s_new)),
        ))
        # A zero slack vector is the global minimizer of the surrogate.
        done = not np.any(s_new) or (attainable and crit <= config.zeta)
        s = s_new
        attainable = True
        if done:
            terminated = "tolerance"
            break

    return make_result(system, theta, config.epsilon, trace=trace,
                       wall_time=time.perf_counter() - t0, terminated_by=terminated,
                       iterations=iters, method=method, slacks=s,
                       info={"last_solution": sol})


def irlp_fit(system, config=IRConfig(), init_theta=None, tol=DEFAULT_TOL):
    """IR-LP: weighted slack LPs with weights ``1 / (s + gamma)``.

    The stopping test ``sum w^l (s^l - s^(l+1)) <= zeta`` is applied once
    ``s^l`` is the slack vector of an actual ``theta``; from ``s^0 = 1`` the
    first step always runs and its ``theta`` seeds ``s^1``.
    """
    return _reweighted_fit(system, config, init_theta, tol, solve_weighted_slack_lp,
                           update_weights_lp, lambda w, s: w @ s, "irlp")


def irqp_fit(system, config=IRConfig(), init_theta=None, tol=DEFAULT_TOL):
    """IR-QP: weighted slack QPs with weights ``1 / (s^2 + gamma)``."""
    return _reweighted_fit(system, config, init_theta, tol, solve_weighted_slack_qp,
                           update_weights_qp, lambda w, s: w @ (s * s), "irqp")


def kkt_stationarity_gap(system, theta, epsilon, gamma, band=None):
    """Norm of the stationarity residual of the log-surrogate problem at ``theta``.

    Outliers (``r_i > epsilon + band``) contribute their gradient weighted by
    ``1 / (r_i - epsilon + gamma)``. Points within ``band`` of the threshold
    carry a free multiplier in ``[0, 1 / gamma]``, which is what the KKT
    conditions allow when both the residual and the ``s_i >= 0`` constraint
    are active; the returned gap is the smallest norm over those choices.
    With ``band=0`` only strict outliers contribute. Rows tied for a group's
    maximum share that group's weight through a convex combination.
    """
    _check_gamma(gamma)
    if band is None:
        band = 1e-6 * max(1.0, epsilon)
    e = row_residuals(system, theta)
    r = residuals(system, theta)
    grad = np.sign(e)[:, None] * system.A
    tie = np.abs(e) >= r[system.group] - band

    fixed = np.zeros(system.d)
    cols, lo, hi, sums = [], [], [], []
    for g in np.flatnonzero(r > epsilon - band):
        rows = np.flatnonzero((system.group == g) & tie)
        if r[g] > epsilon + band:
            weight = 1.0 / (r[g] - epsilon + gamma)
            if rows.size == 1:
                fixed += weight * grad[rows[0]]
                continue
            sums.append((len(cols), rows.size, weight))
            for j in rows:
                cols.append(grad[j]); lo.append(0.0); hi.append(weight)
        else:
            for j in rows:
                cols.append(grad[j]); lo.append(0.0); hi.append(1.0 / gamma)
    if not cols:
        return float(np.linalg.norm(fixed))

    M = np.array(cols).T
    rhs = -fixed
    if sums:
        # convex combinations over tied outlier rows, enforced by a stiff penalty
        pen = 1e6 * max(1.0, float(np.abs(M).max()))
        P = np.zeros((len(sums), M.shape[1]))
        for k, (start, size, weight) in enumerate(sums):
            P[k, start:start + size] = pen
        M = np.vstack([M, P])
        rhs = np.concatenate([rhs, [pen * wgt for _, _, wgt in sums]])
    res = lsq_linear(M, rhs, bounds=(np.array(lo), np.array(hi)), method="bvls", tol=1e-14)
    lam = res.x
    return float(np.linalg.norm(fixed + np.array(cols).T @ lam))
