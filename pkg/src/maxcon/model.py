"""Residual systems, consensus counting, match linearization and synthetic data.

A :class:`ResidualSystem` stores linear residual rows ``|a_j . theta - b_j|``
grouped into data points. A point's residual is the maximum over its rows,
so a linearized homography correspondence (two algebraic equations) still
makes a single inlier/outlier decision.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateDataError, InvalidArgumentError

IMAGE_SIZE = (640.0, 480.0)


@dataclass(frozen=True, eq=False)
class ResidualSystem:
    """Linear residual rows ``A @ theta - b`` partitioned into groups.

    ``group[j]`` is the data point (0-based) that row ``j`` belongs to.
    """

    A: np.ndarray
    b: np.ndarray
    group: np.ndarray
    _order: np.ndarray = field(init=False, repr=False, compare=False)
    _starts: np.ndarray = field(init=False, repr=False, compare=False)
    _trivial: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        group = np.asarray(self.group).reshape(-1)
        if A.shape[0] != b.shape[0] or group.shape[0] != b.shape[0]:
            raise InvalidArgumentError(
                f"row count mismatch: A has {A.shape[0]}, b {b.shape[0]}, group {group.shape[0]}")
        if A.shape[0] == 0 or A.shape[1] == 0:
            raise InvalidArgumentError("a residual system needs at least one row and one parameter")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidArgumentError("coefficients and offsets must be finite")
        if not np.issubdtype(group.dtype, np.integer):
            if not np.all(group == np.round(group)):
                raise InvalidArgumentError("group labels must be integers")
            group = group.astype(np.int64)
        n = int(group.max()) + 1
        if group.min() < 0 or np.unique(group).size != n:
            raise InvalidArgumentError("group labels must cover 0..n-1 with every group nonempty")
        order = np.argsort(group, kind="stable")
        starts = np.searchsorted(group[order], np.arange(n))
        for name, value in (("A", A), ("b", b), ("group", group), ("_order", order),
                            ("_starts", starts)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        # one row per group, in group order: skip the reduction machinery
        object.__setattr__(self, "_trivial", bool(np.array_equal(group, np.arange(group.shape[0]))))

    @classmethod
    def ungrouped(cls, A, b):
        """One row per data point."""
        b = np.asarray(b, dtype=float).reshape(-1)
        return cls(A, b, np.arange(b.shape[0]))

    @property
    def d(self):
        return self.A.shape[1]

    @property
    def n(self):
        return self._starts.shape[0]

    @property
    def n_rows(self):
        return self.A.shape[0]

    def group_sizes(self):
        return np.diff(np.append(self._starts, self.n_rows))

    def rows_of(self, groups):
        """Row indices belonging to the given groups, in row order."""
        if self._trivial:
            return np.unique(np.asarray(groups, dtype=int))
        mask = np.isin(self.group, np.asarray(groups))
        return np.flatnonzero(mask)

    def subsystem(self, groups):
        """Restrict to ``groups`` (relabelled 0..k-1 in the given sorted order)."""
        groups = np.unique(np.asarray(groups, dtype=int))
        if groups.size == 0:
            raise InvalidArgumentError("subsystem needs at least one group")
        rows = self.rows_of(groups)
        relabel = np.searchsorted(groups, self.group[rows])
        return ResidualSystem(self.A[rows], self.b[rows], relabel)

    def group_max(self, row_values):
        """Per-group maximum of a per-row array."""
        if self._trivial:
            return np.asarray(row_values)
        return np.maximum.reduceat(np.asarray(row_values)[self._order], self._starts)

    def digest(self):
        """Content hash, used to confirm every method saw the same data."""
        import hashlib

        h = hashlib.sha256()
        for arr in (self.A, self.b, self.group.astype(np.int64)):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


class PointMatch(NamedTuple):
    p: tuple
    q: tuple


@dataclass
class GroundTruth:
    theta: np.ndarray
    inlier_mask: np.ndarray
    model: Optional[np.ndarray] = None


@dataclass
class ProblemInstance:
    system: ResidualSystem
    epsilon: float
    ground_truth: Optional[GroundTruth] = None

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InvalidArgumentError(f"epsilon must be >= 0, got {self.epsilon}")
        gt = self.ground_truth
        if gt is not None and len(gt.inlier_mask) != self.system.n:
            raise InvalidArgumentError("ground-truth inlier mask length must equal n")


def _theta(system, theta):
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != system.d:
        raise InvalidArgumentError(f"theta has dimension {theta.shape[0]}, system expects {system.d}")
    return theta


def row_residuals(system, theta):
    """Signed per-row residuals ``A @ theta - b``."""
    return system.A @ _theta(system, theta) - system.b


def residuals(system, theta):
    """Per-point residual: the largest absolute row residual within each group."""
    return system.group_max(np.abs(row_residuals(system, theta)))


def consensus(system, theta, epsilon):
    """Inlier indices (residual <= epsilon, inclusive) and their count."""
    if not epsilon >= 0:
        raise InvalidArgumentError(f"epsilon must be >= 0, got {epsilon}")
    idx = np.flatnonzero(residuals(system, theta) <= epsilon)
    return idx, int(idx.size)


def slacks_at(system, theta, epsilon):
    """Shrinkage residuals ``max(0, r_i - epsilon)``: the cheapest feasible slack for ``theta``."""
    return np.maximum(residuals(system, theta) - epsilon, 0.0)


def support_count(s, tol=0.0):
    """Number of strictly positive slacks, i.e. the outlier count the slacks encode."""
    return int(np.count_nonzero(np.asarray(s) > tol))


# --------------------------------------------------------------------------
# Correspondences
# --------------------------------------------------------------------------

def as_match_array(matches):
    """Coerce a list of :class:`PointMatch` or an ``(n, 4)`` array to ``(n, 4)`` floats."""
    if len(matches) and isinstance(matches[0], PointMatch):
        arr = np.array([[*m.p, *m.q] for m in matches], dtype=float)
    else:
        arr = np.asarray(matches, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise InvalidArgumentError(f"matches must have shape (n, 4), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("match coordinates must be finite")
    return arr


def _similarity(points):
    centroid = points.mean(axis=0)
    spread = np.sqrt(np.mean(np.sum((points - centroid) ** 2, axis=1)))
    if spread <= 1e-12 * max(1.0, float(np.abs(points).max())):
        raise DegenerateDataError("all points coincide; cannot normalize")
    s = np.sqrt(2.0) / spread
    return np.array([[s, 0.0, -s * centroid[0]],
                     [0.0, s, -s * centroid[1]],
                     [0.0, 0.0, 1.0]])


def apply_transform(T, points):
    """Apply a 3x3 projective transform to ``(n, 2)`` points."""
    h = np.column_stack([points, np.ones(len(points))]) @ T.T
    return h[:, :2] / h[:, 2:3]


def normalize_matches(matches):
    """Center each image's points at the origin with RMS distance sqrt(2).

    Returns ``(normalized, T1, T2)`` where ``T1``/``T2`` are the similarity
    transforms applied to the first/second image points.
    """
    m = as_match_array(matches)
    if len(m) < 1:
        raise InvalidArgumentError("need at least one match")
    T1 = _similarity(m[:, :2])
    T2 = _similarity(m[:, 2:])
    out = np.column_stack([apply_transform(T1, m[:, :2]), apply_transform(T2, m[:, 2:])])
    return out, T1, T2


def linearize_homography(matches):
    """DLT rows for ``q ~ H p`` with ``h33 = 1``; both rows of a match share a group."""
    m = as_match_array(matches)
    n = len(m)
    if n < 5:
        raise InvalidArgumentError(f"homography linearization needs >= 5 matches, got {n}")
    x, y, u, v = m.T
    zero, one = np.zeros(n), np.ones(n)
    rows_u = np.column_stack([x, y, one, zero, zero, zero, -x * u, -y * u])
    rows_v = np.column_stack([zero, zero, zero, x, y, one, -x * v, -y * v])
    A = np.empty((2 * n, 8))
    A[0::2], A[1::2] = rows_u, rows_v
    b = np.empty(2 * n)
    b[0::2], b[1::2] = u, v
    return ResidualSystem(A, b, np.repeat(np.arange(n), 2))


def linearize_fundamental(matches):
    """Epipolar rows ``q^T F p = 0`` with ``f33 = 1``; one row per match."""
    m = as_match_array(matches)
    n = len(m)
    if n < 9:
        raise InvalidArgumentError(f"fundamental linearization needs >= 9 matches, got {n}")
    x, y, u, v = m.T
    A = np.column_stack([u * x, u * y, u, v * x, v * y, v, x, y])
    return ResidualSystem(A, -np.ones(n), np.arange(n))


def homography_theta(H):
    H = np.asarray(H, dtype=float)
    return (H / H[2, 2]).reshape(-1)[:8]


def fundamental_theta(F):
    F = np.asarray(F, dtype=float)
    return (F / F[2, 2]).reshape(-1)[:8]


def theta_matrix(theta):
    """Rebuild a 3x3 matrix from 8 parameters with the last entry fixed to 1."""
    return np.append(np.asarray(theta, dtype=float), 1.0).reshape(3, 3)


def normalize_homography(H, T1, T2):
    """Express ``q ~ H p`` in normalized coordinates: ``T2 H T1^-1``."""
    return T2 @ H @ np.linalg.inv(T1)


def normalize_fundamental(F, T1, T2):
    """Express ``q^T F p = 0`` in normalized coordinates: ``T2^-T F T1^-1``."""
    return np.linalg.inv(T2).T @ F @ np.linalg.inv(T1)


# --------------------------------------------------------------------------
# Synthetic data (numpy PCG64 via default_rng)
# --------------------------------------------------------------------------

def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_frac(outlier_frac):
    if not 0.0 <= outlier_frac <= 1.0:
        raise InvalidArgumentError(f"outlier_frac must lie in [0, 1], got {outlier_frac}")


def synth_hyperplane(n, d, sigma_in=0.1, outlier_frac=0.0, outlier_range=10.0, seed=0,
                     epsilon=0.3):
    """Noisy points around a random unit-norm hyperplane ``b = a . theta``.

    Each row is ``a = (x, 1)`` with ``x ~ U[-1, 1]^(d-1)`` (``d = 1`` gives an
    intercept-only model). Inliers get Gaussian noise; ``floor(frac * n)``
    points additionally get a uniform offset in ``[-outlier_range, outlier_range]``.
    """
    if not (isinstance(n, (int, np.integer)) and isinstance(d, (int, np.integer))):
        raise InvalidArgumentError("n and d must be integers")
    if d < 1 or n <= d:
        raise InvalidArgumentError(f"need n > d >= 1, got n={n}, d={d}")
    if not sigma_in > 0 or not outlier_range > 0:
        raise InvalidArgumentError("sigma_in and outlier_range must be positive")
    _check_frac(outlier_frac)
    rng = _rng(seed)
    theta = rng.normal(size=d)
    theta /= np.linalg.norm(theta)
    A = np.column_stack([rng.uniform(-1.0, 1.0, size=(n, d - 1)), np.ones(n)])
    b = A @ theta + rng.normal(scale=sigma_in, size=n)
    k = int(np.floor(outlier_frac * n))
    out = rng.permutation(n)[:k]
    b[out] += rng.uniform(-outlier_range, outlier_range, size=k)
    mask = np.ones(n, dtype=bool)
    mask[out] = False
    system = ResidualSystem.ungrouped(A, b)
    return ProblemInstance(system, epsilon, GroundTruth(theta, mask))


def _homography_from_points(src, dst):
    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.asarray(rows))
    H = vt[-1].reshape(3, 3)
    return H / H[2, 2]


def _random_homography(rng, size):
    w, h = size
    corners = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=float)
    moved = corners + rng.uniform(-0.15, 0.15, size=(4, 2)) * np.array([w, h])
    return _homography_from_points(corners, moved)


def _skew(t):
    return np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])


def _rotation(rng, max_angle):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    K = _skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def min_matches(kind):
    return {"homography": 5, "fundamental": 9}[kind]


def synth_matches(kind, n, noise=1.0, outlier_frac=0.0, seed=0, image_size=IMAGE_SIZE):
    """Random correspondences consistent with a ground-truth homography or
    fundamental matrix, plus Gaussian pixel noise and uniform outliers.

    Returns ``(matches, GroundTruth)``; ``GroundTruth.model`` is the 3x3 matrix
    in pixel coordinates (last entry 1) and ``theta`` its 8 free entries.
    """
    if kind not in ("homography", "fundamental"):
        raise InvalidArgumentError(f"unknown match kind {kind!r}")
    if not isinstance(n, (int, np.integer)) or n < min_matches(kind):
        raise InvalidArgumentError(f"{kind} needs at least {min_matches(kind)} matches, got {n}")
    if noise < 0:
        raise InvalidArgumentError("noise must be >= 0")
    _check_frac(outlier_frac)
    rng = _rng(seed)
    w, h = image_size
    k = int(np.floor(outlier_frac * n))
    out = rng.permutation(n)[:k]
    mask = np.ones(n, dtype=bool)
    mask[out] = False

    if kind == "homography":
        M = _random_homography(rng, image_size)
        p = rng.uniform([0, 0], [w, h], size=(n, 2))
        q = apply_transform(M, p)
        p = p + rng.normal(scale=noise, size=p.shape) if noise else p
        q = q + rng.normal(scale=noise, size=q.shape) if noise else q
    else:
        f = 1.2 * w
        K = np.array([[f, 0, w / 2], [0, f, h / 2], [0, 0, 1.0]])
        R = _rotation(rng, 0.15)
        t = rng.normal(size=3)
        t[2] *= 0.2
        t /= np.linalg.norm(t)
        X = np.column_stack([rng.uniform(-2, 2, size=(n, 2)), rng.uniform(4, 8, size=n)])
        p = apply_transform(K, X[:, :2] / X[:, 2:3])
        Xc = X @ R.T + t
        q = apply_transform(K, Xc[:, :2] / Xc[:, 2:3])
        Kinv = np.linalg.inv(K)
        M = Kinv.T @ _skew(t) @ R @ Kinv
        M = M / M[2, 2]
        if noise:
            p = p + rng.normal(scale=noise, size=p.shape)
            q = q + rng.normal(scale=noise, size=q.shape)

    p[out] = rng.uniform([0, 0], [w, h], size=(k, 2))
    q[out] = rng.uniform([0, 0], [w, h], size=(k, 2))
    matches = np.column_stack([p, q])
    theta = homography_theta(M) if kind == "homography" else fundamental_theta(M)
    return matches, GroundTruth(theta, mask, M)
