"""Majorization, Lorentz curves and Schur-concavity of the log surrogate.

A slack vector with few large entries (most points fit exactly) majorizes a
spread-out one of the same total. The log surrogate reverses that order,
which is why minimizing it favours many zero slacks.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

SUM_TOL = 1e-12

PRECEDES = "s<t"
FOLLOWS = "t<s"
EQUAL = "equal"
INCOMPARABLE = "incomparable"


def _nonneg(s, name="s"):
    s = np.asarray(s, dtype=float).reshape(-1)
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise InvalidArgumentError(f"{name} must be finite and non-negative")
    return s


@dataclass(frozen=True)
class LorentzCurve:
    partial_sums: np.ndarray

    @property
    def total(self):
        return float(self.partial_sums[-1]) if self.partial_sums.size else 0.0

    def points(self):
        """``(k, S[k])`` pairs with ``k = 1..n``."""
        return list(zip(range(1, self.partial_sums.size + 1), self.partial_sums.tolist()))


def lorentz_partial_sums(s):
    """Cumulative sums of ``s`` sorted in non-increasing order."""
    s = _nonneg(s)
    return LorentzCurve(np.cumsum(np.sort(s)[::-1]))


def majorizes(s, t, tol=SUM_TOL):
    """Majorization relation between two non-negative vectors.

    Returns ``"s<t"`` when ``s`` is majorized by ``t``, ``"t<s"`` for the
    reverse, ``"equal"`` when the sorted vectors coincide, and
    ``"incomparable"`` when the totals differ or the Lorentz curves cross.
    """
    S = lorentz_partial_sums(s).partial_sums
    T = lorentz_partial_sums(_nonneg(t, "t")).partial_sums
    if S.size != T.size:
        raise InvalidArgumentError(f"length mismatch: {S.size} vs {T.size}")
    if abs(S[-1] - T[-1]) > tol:
        return INCOMPARABLE
    le = np.all(S[:-1] <= T[:-1] + tol)
    ge = np.all(S[:-1] >= T[:-1] - tol)
    if le and ge:
        return EQUAL
    if le:
        return PRECEDES
    if ge:
        return FOLLOWS
    return INCOMPARABLE


def schur_condition_check(gamma, s, pair):
    """``(s_i - s_j) * (dG/ds_i - dG/ds_j)`` for ``G = sum log(s + gamma)``.

    Equals ``-(s_i - s_j)^2 / ((s_i + gamma)(s_j + gamma))``; non-positive
    for every pair exactly when ``G`` is Schur-concave.
    """
    if not gamma > 0:
        raise InvalidArgumentError(f"gamma must be > 0, got {gamma}")
    s = _nonneg(s)
    i, j = pair
    gi, gj = 1.0 / (s[i] + gamma), 1.0 / (s[j] + gamma)
    return float((s[i] - s[j]) * (gi - gj))


def surrogate_gradient(s, gamma):
    return 1.0 / (_nonneg(s) + gamma)


def zero_count(s, tol=0.0):
    """Number of entries ``<= tol``: the inliers a slack vector encodes."""
    return int(np.count_nonzero(np.asarray(s) <= tol))


def write_lorentz_csv(path, curves):
    """Write ``label,k,S`` rows for each ``(label, LorentzCurve)`` pair."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "k", "S"])
        for label, curve in curves:
            for k, v in curve.points():
                w.writerow([label, k, repr(float(v))])
