"""Dense tableau simplex for standard-form linear programs.

Solves ``min c @ x  s.t.  A @ x == b, x >= 0`` with a two-phase primal
method. Entering columns are priced by Dantzig's rule; after a run of
degenerate pivots the solver falls back to Bland's rule, which cannot
cycle, and returns to Dantzig once the objective moves again.

A previously optimal basis can be passed back in. When only ``b`` changed
since that solve the old basis stays dual feasible, so the solver repairs
primal feasibility with dual simplex pivots instead of starting over.
"""

from dataclasses import dataclass, field

import numpy as np

_PIVOT_TOL = 1e-11
_DEGENERATE_RUN = 20


@dataclass
class SimplexResult:
    x: np.ndarray
    y: np.ndarray
    objective: float
    status: str
    pivots: int
    basis: np.ndarray
    phase1_pivots: int = 0
    warm: bool = False
    info: dict = field(default_factory=dict)


class _Tableau:
    """Rows ``0..m-1`` hold ``B^-1 [A | b]``; row ``m`` holds reduced costs and ``-z``."""

    def __init__(self, T, basis):
        self.T = T
        self.basis = basis
        self.pivots = 0

    @property
    def m(self):
        return self.T.shape[0] - 1

    def pivot(self, r, q):
        T = self.T
        T[r] /= T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, q] = 0.0
        T[r, q] = 1.0
        self.basis[r] = q
        self.pivots += 1

    def primal(self, allowed, tol, max_pivots):
        """Run primal simplex pivots over the columns flagged in ``allowed``."""
        T = self.T
        m = self.m
        degenerate = 0
        while True:
            if self.pivots >= max_pivots:
                return "iteration-limit"
            d = T[m, :-1]
            cand = np.flatnonzero((d < -tol) & allowed)
            if cand.size == 0:
                return "optimal"
            if degenerate >= _DEGENERATE_RUN:
                q = cand[0]
            else:
                q = cand[np.argmin(d[cand])]
            col = T[:m, q]
            rows = np.flatnonzero(col > _PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol]
            r = ties[np.argmin(self.basis[ties])]
            degenerate = degenerate + 1 if T[r, -1] <= tol else 0
            self.pivot(r, q)

    def dual(self, allowed, tol, max_pivots):
        """Dual simplex pivots; the tableau must be dual feasible on entry."""
        T = self.T
        m = self.m
        while True:
            if self.pivots >= max_pivots:
                return "iteration-limit"
            rhs = T[:m, -1]
            neg = np.flatnonzero(rhs < -tol)
            if neg.size == 0:
                return "optimal"
            r = neg[np.argmin(rhs[neg])]
            row = T[r, :-1]
            cand = np.flatnonzero((row < -_PIVOT_TOL) & allowed)
            if cand.size == 0:
                return "infeasible"
            ratios = np.maximum(T[m, cand], 0.0) / -row[cand]
            best = ratios.min()
            q = cand[np.flatnonzero(ratios <= best + tol)[0]]
            self.pivot(r, q)


def _finish(A, b, c, basis, tol):
    """Recompute primal and dual values from the original data for accuracy."""
    m, n = A.shape
    B = A[:, basis]
    xb = np.linalg.solve(B, b)
    x = np.zeros(n)
    x[basis] = np.where(np.abs(xb) <= tol, 0.0, xb)
    y = np.linalg.solve(B.T, c[basis])
    return x, y


def _warm_tableau(A, b, c, basis):
    m, n = A.shape
    basis = np.asarray(basis, dtype=int)
    if basis.shape != (m,) or np.unique(basis).size != m or basis.max(initial=-1) >= n:
        return None
    B = A[:, basis]
    try:
        body = np.linalg.solve(B, np.column_stack([A, b]))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(body)):
        return None
    T = np.empty((m + 1, n + 1))
    T[:m] = body
    T[m, :n] = c - c[basis] @ body[:, :n]
    T[m, n] = -c[basis] @ body[:, n]
    T[m, basis] = 0.0
    return _Tableau(T, basis.copy())


def solve_standard_form(c, A, b, *, basis=None, max_pivots=None, tol=1e-9):
    """Minimize ``c @ x`` subject to ``A @ x == b`` and ``x >= 0``.

    ``A`` must have full row rank. Returns a :class:`SimplexResult` whose
    ``y`` holds the simplex multipliers (``A.T @ y <= c`` at optimality) and
    whose ``basis`` can be fed back as a warm start.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if max_pivots is None:
        max_pivots = 50 * (m + n)
    allowed = np.ones(n, dtype=bool)

    if basis is not None:
        tab = _warm_tableau(A, b, c, basis)
        if tab is not None:
            T = tab.T
            primal_ok = np.all(T[:m, -1] >= -tol)
            dual_ok = np.all(T[m, :n] >= -tol)
            status = None
            if not primal_ok and dual_ok:
                status = tab.dual(allowed, tol, max_pivots)
                if status == "infeasible":
                    status = None
            elif primal_ok:
                status = "optimal"
            if status is not None:
                if status == "optimal":
                    status = tab.primal(allowed, tol, max_pivots)
                return _result(A, b, c, tab, status, tol, warm=True, phase1=0)

    # Cold start: flip rows so b >= 0, reuse unit columns as the initial basis.
    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign
    basis0 = np.full(m, -1)
    nz = np.count_nonzero(As, axis=0)
    for j in np.flatnonzero(nz == 1):
        i = np.flatnonzero(As[:, j])[0]
        if basis0[i] < 0 and As[i, j] == 1.0:
            basis0[i] = j
    art_rows = np.flatnonzero(basis0 < 0)
    k = art_rows.size
    T = np.zeros((m + 1, n + k + 1))
    T[:m, :n] = As
    T[:m, -1] = bs
    for t, i in enumerate(art_rows):
        T[i, n + t] = 1.0
        basis0[i] = n + t
    tab = _Tableau(T, basis0)
    full_allowed = np.ones(n + k, dtype=bool)

    phase1 = 0
    if k:
        cost1 = np.zeros(n + k)
        cost1[n:] = 1.0
        T[m, :-1] = cost1 - cost1[basis0] @ T[:m, :-1]
        T[m, -1] = -cost1[basis0] @ T[:m, -1]
        status = tab.primal(full_allowed, tol, max_pivots)
        phase1 = tab.pivots
        if status == "iteration-limit":
            return _result(A, b, c, tab, status, tol, warm=False, phase1=phase1, n=n)
        scale = max(1.0, float(np.abs(bs).max(initial=0.0)))
        if -T[m, -1] > tol * scale * max(1, k):
            x = np.zeros(n)
            return SimplexResult(x, np.zeros(m), np.inf, "infeasible", tab.pivots,
                                 tab.basis[:].copy(), phase1)
        # Drive artificials still basic at zero level out of the basis.
        for r in range(m):
            if tab.basis[r] >= n:
                row = T[r, :n]
                cols = np.flatnonzero(np.abs(row) > 1e-9)
                if cols.size == 0:
                    raise np.linalg.LinAlgError("constraint matrix is rank deficient")
                tab.pivot(r, cols[np.argmax(np.abs(row[cols]))])
        T = np.delete(T, np.s_[n:n + k], axis=1)
        tab.T = T

    cb = c[tab.basis]
    T[m, :n] = c - cb @ T[:m, :n]
    T[m, n] = -cb @ T[:m, n]
    status = tab.primal(allowed, tol, max_pivots)
    return _result(A, b, c, tab, status, tol, warm=False, phase1=phase1)


def _result(A, b, c, tab, status, tol, *, warm, phase1, n=None):
    basis = tab.basis.copy()
    if n is not None and np.any(basis >= n):
        x = np.zeros(A.shape[1])
        return SimplexResult(x, np.zeros(A.shape[0]), np.nan, status, tab.pivots, basis,
                             phase1, warm)
    x, y = _finish(A, b, c, basis, tol)
    return SimplexResult(x, y, float(c @ x), status, tab.pivots, basis, phase1, warm)
