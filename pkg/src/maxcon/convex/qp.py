"""Weighted slack QP via a primal active-set method.

    min  sum_g w_g s_g^2
    s.t. |a_j . theta - b_j| <= eps + s_g(j),   s >= 0,   |theta_k| <= M

The Hessian is singular in ``theta``; the equality-constrained subproblems
are solved in the null space of the working set, and zero-curvature
descent directions are followed until a constraint blocks (the box
guarantees one does).
"""

import numpy as np
import scipy.linalg as sla

from ..model import row_residuals, slacks_at
from .lp import DEFAULT_TOL, SlackSolution, _check_eps, _check_weights


def _constraints(system, epsilon, box):
    A, b = system.A, system.b
    R, d, n = system.n_rows, system.d, system.n
    E = np.zeros((R, n))
    E[np.arange(R), system.group] = 1.0
    G = np.block([
        [A, -E],
        [-A, -E],
        [np.zeros((n, d)), -np.eye(n)],
        [np.eye(d), np.zeros((d, n))],
        [-np.eye(d), np.zeros((d, n))],
    ])
    h = np.concatenate([epsilon + b, epsilon - b, np.zeros(n), np.full(2 * d, box)])
    return G, h


def _initial_working_set(system, theta, s, G, h, tol):
    """One active constraint per group: its worst row if s_g > 0, else s_g >= 0."""
    R, n = system.n_rows, system.n
    e = row_residuals(system, theta)
    W = []
    worst = np.full(n, -1)
    best = np.full(n, -np.inf)
    for j in range(R):
        g = system.group[j]
        if abs(e[j]) > best[g]:
            best[g], worst[g] = abs(e[j]), j
    for g in range(n):
        if s[g] > tol:
            j = worst[g]
            W.append(j if e[j] >= 0 else R + j)
        else:
            W.append(2 * R + g)
    return W


def _null_space(GW, N):
    if GW.shape[0] == 0:
        return np.eye(N)
    Q, Rm = sla.qr(GW.T, mode="full")
    k = GW.shape[0]
    return Q[:, k:]


def active_set_qp(H, c, G, h, x0, W0, *, max_iter, tol):
    """Convex QP ``min 1/2 x'Hx + c'x  s.t.  Gx <= h`` from a feasible ``x0``.

    ``W0`` is a list of linearly independent constraints active at ``x0``.
    Returns ``(x, multipliers, working_set, status, iterations, kkt_residual)``.
    """
    x = np.array(x0, dtype=float)
    W = list(W0)
    N = x.size
    scale = max(1.0, float(np.abs(np.diag(H)).max()))
    for it in range(1, max_iter + 1):
        g = H @ x + c
        GW = G[W]
        Z = _null_space(GW, N)
        unbounded = False
        if Z.shape[1]:
            Hr = Z.T @ H @ Z
            gr = Z.T @ g
            evals, evecs = np.linalg.eigh(Hr)
            pos = evals > 1e-12 * scale
            flat = evecs[:, ~pos]
            gz = flat.T @ gr
            if gz.size and np.linalg.norm(gz) > tol * (1.0 + np.linalg.norm(g)):
                u = -flat @ gz
                unbounded = True
            else:
                Vp = evecs[:, pos]
                u = -Vp @ ((Vp.T @ gr) / evals[pos])
            p = Z @ u
        else:
            p = np.zeros(N)

        if np.linalg.norm(p) <= 1e-12 * (1.0 + np.linalg.norm(x)):
            if W:
                lam, *_ = np.linalg.lstsq(GW.T, -g, rcond=None)
            else:
                lam = np.zeros(0)
            if lam.size == 0 or lam.min() >= -tol:
                kkt = float(np.linalg.norm(g + GW.T @ lam)) if W else float(np.linalg.norm(g))
                return x, lam, W, "optimal", it, kkt
            W.pop(int(np.argmin(lam)))
            continue

        Gp = G @ p
        slack = h - G @ x
        inW = np.zeros(G.shape[0], dtype=bool)
        inW[W] = True
        cand = np.flatnonzero((Gp > 1e-12) & ~inW)
        alpha = np.inf if unbounded else 1.0
        block = None
        if cand.size:
            ratios = np.maximum(slack[cand], 0.0) / Gp[cand]
            k = int(np.argmin(ratios))
            if ratios[k] < alpha:
                alpha, block = ratios[k], int(cand[k])
        if not np.isfinite(alpha):
            return x, np.zeros(len(W)), W, "infeasible-numerics", it, np.inf
        x = x + alpha * p
        if block is not None:
            W.append(block)
    return x, np.zeros(len(W)), W, "iteration-limit", max_iter, np.inf


def solve_weighted_slack_qp(system, epsilon, weights, tol=DEFAULT_TOL, warm_start=None,
                            theta0=None):
    """Global optimum of the weighted slack QP (strictly convex in the slacks)."""
    _check_eps(epsilon)
    w = _check_weights(weights, system.n)
    d, n = system.d, system.n
    G, h = _constraints(system, epsilon, tol.theta_box)
    H = np.zeros((d + n, d + n))
    H[d:, d:] = np.diag(2.0 * w)
    c = np.zeros(d + n)

    if warm_start is not None and warm_start.diagnostics.get("working_set") is not None:
        theta = warm_start.theta
        W0 = list(warm_start.diagnostics["working_set"])
        x0 = np.concatenate([theta, slacks_at(system, theta, epsilon)])
        # warm point must still be feasible for the same system/epsilon
        if np.any(G[W0] @ x0 - h[W0] > 1e-7) or np.any(G @ x0 - h > 1e-7):
            W0 = None
    else:
        W0 = None
    if W0 is None:
        theta = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float)
        s0 = slacks_at(system, theta, epsilon)
        x0 = np.concatenate([theta, s0])
        W0 = _initial_working_set(system, theta, s0, G, h, tol.feasibility_tol)

    max_iter = tol.max_pivots or 50 * (n + d)
    x, lam, W, status, iters, kkt = active_set_qp(H, c, G, h, x0, W0, max_iter=max_iter,
                                                   tol=tol.optimality_tol)
    theta = x[:d]
    s = slacks_at(system, theta, epsilon)
    s[s <= tol.feasibility_tol] = 0.0
    diagnostics = {"working_set": W, "kkt_residual": kkt, "multipliers": lam,
                   "active_constraints": len(W)}
    return SlackSolution(theta, s, float(w @ s**2), status, iters, diagnostics)
