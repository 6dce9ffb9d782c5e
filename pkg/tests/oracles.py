"""Independent brute-force oracles shared by the test modules."""

import itertools

import numpy as np


def vertex_enumeration_lp(A, b, w, eps):
    """min_theta sum w_i max(0, |a_i theta - b_i| - eps) by scanning arrangement vertices."""
    R, d = A.shape
    best = np.inf
    for rows in itertools.combinations(range(R), d):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        for signs in itertools.product((-1.0, 1.0), repeat=d):
            theta = np.linalg.solve(M, b[list(rows)] + eps * np.array(signs))
            val = np.sum(w * np.maximum(np.abs(A @ theta - b) - eps, 0.0))
            best = min(best, val)
    return best
