"""k-nearest-neighbor (KSG) estimators of mutual and conditional mutual information.

All distances are max-norm (Chebyshev). The estimators follow the KSG
"algorithm 1" convention: neighbor radii come from the joint space (k-th
neighbor, self excluded) and marginal counts are strict (< radius).
Estimates are in nats and can be slightly negative by estimation noise.

Two execution paths produce bit-identical results:

* :class:`NeighborIndex` / :func:`ksg_mi` / :func:`ksg_cmi` query a kd-tree
  per call; fine for one-off estimates.
* :class:`CmiWorkspace` precomputes pairwise-distance tables for a fixed
  (target, conditioning) pair and scores many candidate columns cheaply;
  this is what the embedding scheme and the surrogate tests use, where
  hundreds of columns are evaluated against the same conditioning block.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange
from scipy.spatial import cKDTree
from scipy.special import digamma

# Above this length the O(n^2) distance tables get too large and the
# workspace falls back to per-call tree queries.
MAX_TABLE_N = 3100


class NotEnoughPoints(ValueError):
    """k-th neighbor requested with k >= number of points."""


class DegenerateDistances(ValueError):
    """Too many duplicate points: > 5% of k-th neighbor distances are zero."""


def as_point_cloud(points) -> np.ndarray:
    """Coerce to an (n, d) float64 matrix; 1-D input becomes a single column."""
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError(f"expected (n, d) points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


class NeighborIndex:
    """Exact max-norm neighbor search over a fixed point cloud.

    Queries for points of the cloud exclude the query point itself.
    """

    def __init__(self, points):
        self.points = as_point_cloud(points)
        self._tree = cKDTree(self.points)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def kth_distances(self, k: int) -> np.ndarray:
        """Distance to the k-th nearest neighbor (self excluded) for every point."""
        if k < 1 or k >= self.n_points:
            raise NotEnoughPoints(f"need 1 <= k < n, got k={k}, n={self.n_points}")
        dd, _ = self._tree.query(self.points, k=k + 1, p=np.inf)
        # The query point sits at distance 0, the row minimum, so dropping it
        # shifts every order statistic by exactly one position (ties included).
        return dd[:, k]

    def counts_within(self, radii: np.ndarray, strict: bool = True) -> np.ndarray:
        """Number of points (self excluded) within each point's radius."""
        radii = np.asarray(radii, dtype=np.float64)
        if np.any(radii < 0):
            raise ValueError("radii must be >= 0")
        if strict:
            # d < r for floats is d <= nextafter(r, -inf); r == 0 handled below
            r_eff = np.where(radii > 0, np.nextafter(radii, -np.inf), 0.0)
        else:
            r_eff = radii
        counts = self._tree.query_ball_point(self.points, r_eff, p=np.inf, return_length=True)
        counts = counts - 1  # self is always inside (distance 0)
        if strict:
            counts = np.where(radii > 0, counts, 0)
        return counts


def knn_distance(index: NeighborIndex, i: int, k: int) -> float:
    """Max-norm distance from point i to its k-th nearest neighbor (self excluded)."""
    if k < 1 or k >= index.n_points:
        raise NotEnoughPoints(f"need 1 <= k < n, got k={k}, n={index.n_points}")
    dd, _ = index._tree.query(index.points[i], k=k + 1, p=np.inf)
    return float(dd[k])


def count_within(index: NeighborIndex, i: int, radius: float, strict: bool = True) -> int:
    """Number of points (self excluded) with distance < radius (strict) or <= radius."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if strict:
        if radius == 0:
            return 0
        r_eff = np.nextafter(radius, -np.inf)
    else:
        r_eff = radius
    return len(index._tree.query_ball_point(index.points[i], r_eff, p=np.inf)) - 1


def _check_degenerate(eps: np.ndarray) -> None:
    frac = float(np.mean(eps == 0.0))
    if frac > 0.05:
        raise DegenerateDistances(
            f"{frac:.1%} of points have zero k-th neighbor distance (duplicate-heavy data)"
        )


def _mi_from_counts(k: int, n: int, n_x: np.ndarray, n_y: np.ndarray) -> float:
    return float(digamma(k) + digamma(n) - np.mean(digamma(n_x + 1) + digamma(n_y + 1)))


def _cmi_from_counts(k: int, n_xz: np.ndarray, n_yz: np.ndarray, n_z: np.ndarray) -> float:
    return float(
        digamma(k) - np.mean(digamma(n_xz + 1) + digamma(n_yz + 1) - digamma(n_z + 1))
    )


def ksg_mi(xcloud, ycloud, k: int = 10) -> float:
    """KSG estimate of I(X; Y) in nats.

    Duplicate-heavy data (e.g. Y an exact copy of X) raises
    DegenerateDistances once more than 5% of joint-space k-th neighbor
    distances collapse to zero; tiny jitter instead yields a large finite
    value, as expected for a near-deterministic relation.
    """
    x = as_point_cloud(xcloud)
    y = as_point_cloud(ycloud)
    if x.shape[0] != y.shape[0]:
        raise ValueError("clouds must have equal length")
    n = x.shape[0]
    joint = NeighborIndex(np.hstack([x, y]))
    eps = joint.kth_distances(k)
    _check_degenerate(eps)
    n_x = NeighborIndex(x).counts_within(eps, strict=True)
    n_y = NeighborIndex(y).counts_within(eps, strict=True)
    return _mi_from_counts(k, n, n_x, n_y)


def ksg_cmi(xcloud, ycloud, zcloud, k: int = 10) -> float:
    """KSG estimate of I(X; Y | Z) in nats; Z empty reduces exactly to ksg_mi."""
    if zcloud is None:
        return ksg_mi(xcloud, ycloud, k)
    z = np.asarray(zcloud, dtype=np.float64)
    if z.size == 0:
        return ksg_mi(xcloud, ycloud, k)
    x = as_point_cloud(xcloud)
    y = as_point_cloud(ycloud)
    z = as_point_cloud(z)
    if not (x.shape[0] == y.shape[0] == z.shape[0]):
        raise ValueError("clouds must have equal length")
    joint = NeighborIndex(np.hstack([x, y, z]))
    eps = joint.kth_distances(k)
    _check_degenerate(eps)
    n_xz = NeighborIndex(np.hstack([x, z])).counts_within(eps, strict=True)
    n_yz = NeighborIndex(np.hstack([y, z])).counts_within(eps, strict=True)
    n_z = NeighborIndex(z).counts_within(eps, strict=True)
    return _cmi_from_counts(k, n_xz, n_yz, n_z)


# ---------------------------------------------------------------------------
# Fast shared-table path
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _pairwise_chebyshev(a):  # pragma: no cover - exercised through callers
    n, d = a.shape
    out = np.empty((n, n))
    for i in prange(n):
        for j in range(n):
            m = 0.0
            for c in range(d):
                v = abs(a[i, c] - a[j, c])
                if v > m:
                    m = v
            out[i, j] = m
    return out


@njit(cache=True)
def _count_below(row, value):
    # first index with row[idx] >= value, i.e. count of entries < value
    lo, hi = 0, row.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if row[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True, parallel=True)
def _cmi_counts_table(cand, dyz_vals, dyz_idx, dz_vals, dz_idx, k):
    n, dc = cand.shape
    n_xz = np.zeros(n, np.int64)
    n_yz = np.zeros(n, np.int64)
    n_z = np.zeros(n, np.int64)
    eps_out = np.empty(n)
    for i in prange(n):
        # k-th joint distance by sweeping (target, cond) distances ascending:
        # joint = max(cand dist, dyz) >= dyz, so once the k best joint
        # distances are all <= the current dyz the sweep can stop.
        best = np.full(k, np.inf)
        worst = np.inf
        filled = 0
        for p in range(n):
            dyz = dyz_vals[i, p]
            if filled == k and dyz >= worst:
                break
            j = dyz_idx[i, p]
            if j == i:
                continue
            m = 0.0
            for c in range(dc):
                v = abs(cand[i, c] - cand[j, c])
                if v > m:
                    m = v
            dj = m if m > dyz else dyz
            if filled < k:
                best[filled] = dj
                filled += 1
                if filled == k:
                    worst = best.max()
            elif dj < worst:
                mx_pos = 0
                mx = best[0]
                for q in range(1, k):
                    if best[q] > mx:
                        mx = best[q]
                        mx_pos = q
                best[mx_pos] = dj
                worst = best.max()
        eps = worst
        eps_out[i] = eps
        if eps <= 0.0:
            continue
        n_yz[i] = _count_below(dyz_vals[i], eps) - 1  # minus self (distance 0)
        n_z[i] = _count_below(dz_vals[i], eps) - 1
        cnt = 0
        for p in range(n):
            dz = dz_vals[i, p]
            if dz >= eps:
                break
            j = dz_idx[i, p]
            if j == i:
                continue
            m = 0.0
            for c in range(dc):
                v = abs(cand[i, c] - cand[j, c])
                if v > m:
                    m = v
            if m < eps:
                cnt += 1
        n_xz[i] = cnt
    return n_xz, n_yz, n_z, eps_out


@njit(cache=True, parallel=True)
def _mi_counts_table(cand, cand_sorted, dy_vals, dy_idx, k):
    n = cand.shape[0]
    n_x = np.zeros(n, np.int64)
    n_y = np.zeros(n, np.int64)
    eps_out = np.empty(n)
    for i in prange(n):
        best = np.full(k, np.inf)
        worst = np.inf
        filled = 0
        for p in range(n):
            dy = dy_vals[i, p]
            if filled == k and dy >= worst:
                break
            j = dy_idx[i, p]
            if j == i:
                continue
            v = abs(cand[i, 0] - cand[j, 0])
            dj = v if v > dy else dy
            if filled < k:
                best[filled] = dj
                filled += 1
                if filled == k:
                    worst = best.max()
            elif dj < worst:
                mx_pos = 0
                mx = best[0]
                for q in range(1, k):
                    if best[q] > mx:
                        mx = best[q]
                        mx_pos = q
                best[mx_pos] = dj
                worst = best.max()
        eps = worst
        eps_out[i] = eps
        if eps <= 0.0:
            continue
        n_y[i] = _count_below(dy_vals[i], eps) - 1
        # expand around c_i in the sorted column; |c - c_i| is monotone on
        # each side so the first failing comparison ends the scan, and the
        # comparison is the same rounded subtraction the tree path uses
        ci = cand[i, 0]
        pos = _count_below(cand_sorted, ci)
        cnt = 0
        r = pos
        while r < n and abs(cand_sorted[r] - ci) < eps:
            cnt += 1
            r += 1
        l = pos - 1
        while l >= 0 and abs(cand_sorted[l] - ci) < eps:
            cnt += 1
            l -= 1
        n_x[i] = cnt - 1  # minus self
    return n_x, n_y, eps_out


class CmiWorkspace:
    """Precomputed tables for scoring many columns against one (target, cond) pair.

    ``cmi(cand)`` returns the KSG estimate of I(cand; target | cond), using
    the same joint radii and strict counts as :func:`ksg_cmi`. With an empty
    conditioning block it returns I(cand; target) as :func:`ksg_mi` does.
    For series longer than ``MAX_TABLE_N`` the quadratic tables are skipped
    and each call queries kd-trees instead (slower, identical results).
    """

    def __init__(self, target, cond, k: int):
        self.target = as_point_cloud(target)
        self.k = int(k)
        self.n = self.target.shape[0]
        if self.target.shape[1] != 1:
            raise ValueError("target must be a single column")
        if cond is None:
            cond = np.empty((self.n, 0))
        self.cond = np.ascontiguousarray(np.atleast_2d(cond), dtype=np.float64)
        if self.cond.shape[0] != self.n:
            raise ValueError("cond length must match target")
        if not 1 <= self.k < self.n:
            raise NotEnoughPoints(f"need 1 <= k < n, got k={self.k}, n={self.n}")
        self._tables = self.n <= MAX_TABLE_N
        if self._tables:
            self._build_tables()

    def _build_tables(self):
        if self.cond.shape[1] > 0:
            dz = _pairwise_chebyshev(self.cond)
            dyz = np.maximum(dz, _pairwise_chebyshev(self.target))
            self._dz_idx = np.argsort(dz, axis=1).astype(np.int32)
            self._dz_vals = np.take_along_axis(dz, self._dz_idx, axis=1)
            self._dyz_idx = np.argsort(dyz, axis=1).astype(np.int32)
            self._dyz_vals = np.take_along_axis(dyz, self._dyz_idx, axis=1)
        else:
            dy = _pairwise_chebyshev(self.target)
            self._dy_idx = np.argsort(dy, axis=1).astype(np.int32)
            self._dy_vals = np.take_along_axis(dy, self._dy_idx, axis=1)

    def cmi(self, cand) -> float:
        cand = as_point_cloud(cand)
        if cand.shape[0] != self.n:
            raise ValueError("candidate length must match target")
        if not self._tables:
            return ksg_cmi(cand, self.target, self.cond if self.cond.shape[1] else None, self.k)
        if self.cond.shape[1] > 0:
            n_xz, n_yz, n_z, eps = _cmi_counts_table(
                cand, self._dyz_vals, self._dyz_idx, self._dz_vals, self._dz_idx, self.k
            )
            _check_degenerate(eps)
            return _cmi_from_counts(self.k, n_xz, n_yz, n_z)
        if cand.shape[1] != 1:
            # multi-column candidate against empty cond: rare, use the tree path
            return ksg_mi(cand, self.target, self.k)
        n_x, n_y, eps = _mi_counts_table(cand, np.sort(cand[:, 0]), self._dy_vals, self._dy_idx, self.k)
        _check_degenerate(eps)
        return _mi_from_counts(self.k, self.n, n_x, n_y)
