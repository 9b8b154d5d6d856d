"""Standardized similarity kernels, candidate pools, and Gram helpers.

Every kernel here is standardized, meaning k(x, x) = 1 on valid inputs.
That keeps the squared-MMD objective of the selection algorithms inside
[0, 1] and makes the Schur-complement independence test used by the
quadrature state meaningful.  ``check_standardized`` verifies the property
on a concrete pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

STANDARDIZATION_TOL = 1e-10


class ZeroNormFeature(ValueError):
    """A feature vector with zero norm has no defined cosine similarity."""


class StandardizationError(ValueError):
    """Kernel diagonal deviates from 1 on the given pool."""


def as_point_matrix(X) -> np.ndarray:
    """Coerce a point or a batch of points to a float (n, d) array."""
    A = np.asarray(X, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise ValueError(f"points must be a vector or a 2-d array, got shape {A.shape}")
    return A


def _check_same_dim(X: np.ndarray, Y: np.ndarray) -> None:
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")


class Kernel:
    """Base class for standardized kernels.

    Subclasses implement the vectorized ``gram`` (cross Gram matrix),
    ``pairwise`` (elementwise similarity of two equal-length batches) and
    ``self_similarities`` (the diagonal k(x, x) per point).
    """

    def gram(self, X, Y) -> np.ndarray:
        raise NotImplementedError

    def pairwise(self, X, Y) -> np.ndarray:
        raise NotImplementedError

    def self_similarities(self, X) -> np.ndarray:
        return self.pairwise(X, X)

    def __call__(self, x, y) -> float:
        return float(self.gram(as_point_matrix(x), as_point_matrix(y))[0, 0])


@dataclass(frozen=True)
class RBFKernel(Kernel):
    """Gaussian kernel exp(-||x - y||^2 / (2 * bandwidth^2))."""

    bandwidth: float

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be a positive finite number, got {self.bandwidth}")

    def gram(self, X, Y) -> np.ndarray:
        X, Y = as_point_matrix(X), as_point_matrix(Y)
        _check_same_dim(X, Y)
        if X.shape[0] == 0 or Y.shape[0] == 0:
            return np.zeros((X.shape[0], Y.shape[0]))
        sq = cdist(X, Y, "sqeuclidean")
        return np.exp(-sq / (2.0 * self.bandwidth**2))

    def pairwise(self, X, Y) -> np.ndarray:
        X, Y = as_point_matrix(X), as_point_matrix(Y)
        _check_same_dim(X, Y)
        if X.shape[0] != Y.shape[0]:
            raise ValueError("pairwise needs equal-length batches")
        sq = np.sum((X - Y) ** 2, axis=1)
        return np.exp(-sq / (2.0 * self.bandwidth**2))

    def self_similarities(self, X) -> np.ndarray:
        return np.ones(as_point_matrix(X).shape[0])


@dataclass(frozen=True)
class NormalizedFeatureKernel(Kernel):
    """Cosine similarity of an explicit finite-dimensional feature map.

    ``feature_map`` maps an (n, d) batch of points to an (n, m) batch of
    features; ``None`` means the identity map.  Features are scaled to unit
    length before the inner product, so the diagonal is 1 by construction.
    A zero-norm feature raises ``ZeroNormFeature``.
    """

    feature_map: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def _unit_features(self, X: np.ndarray) -> np.ndarray:
        F = X if self.feature_map is None else np.asarray(self.feature_map(X), dtype=float)
        if F.ndim != 2 or F.shape[0] != X.shape[0]:
            raise ValueError("feature map must return one feature row per input point")
        norms = np.linalg.norm(F, axis=1)
        if np.any(norms == 0.0):
            raise ZeroNormFeature("zero-norm feature vector: cosine similarity undefined")
        return F / norms[:, None]

    def gram(self, X, Y) -> np.ndarray:
        X, Y = as_point_matrix(X), as_point_matrix(Y)
        _check_same_dim(X, Y)
        if X.shape[0] == 0 or Y.shape[0] == 0:
            return np.zeros((X.shape[0], Y.shape[0]))
        return self._unit_features(X) @ self._unit_features(Y).T

    def pairwise(self, X, Y) -> np.ndarray:
        X, Y = as_point_matrix(X), as_point_matrix(Y)
        _check_same_dim(X, Y)
        if X.shape[0] != Y.shape[0]:
            raise ValueError("pairwise needs equal-length batches")
        return np.sum(self._unit_features(X) * self._unit_features(Y), axis=1)

    def self_similarities(self, X) -> np.ndarray:
        X = as_point_matrix(X)
        self._unit_features(X)  # surfaces zero-norm features
        return np.ones(X.shape[0])


@dataclass(frozen=True)
class PrecomputedKernel(Kernel):
    """Explicit symmetric similarity matrix, mainly for test fixtures.

    Points for this kernel are 1-d index vectors: entry i of the matrix is
    addressed by the point ``[i]``.  ``index_pool`` builds the matching
    candidate pool.  The matrix must be symmetric; the unit-diagonal check
    can be disabled to construct deliberately non-standardized fixtures.
    """

    matrix: np.ndarray
    require_unit_diag: bool = True

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("similarity matrix must be square")
        if not np.allclose(M, M.T, atol=1e-12, rtol=0.0):
            raise ValueError("similarity matrix must be symmetric")
        if self.require_unit_diag and np.max(np.abs(np.diag(M) - 1.0)) > STANDARDIZATION_TOL:
            raise ValueError(
                "similarity matrix diagonal must equal 1 "
                "(pass require_unit_diag=False for non-standardized fixtures)"
            )

    def _indices(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != 1:
            raise ValueError("precomputed kernels take 1-d index points")
        idx = np.rint(X[:, 0]).astype(int)
        if np.any(np.abs(X[:, 0] - idx) > 1e-9):
            raise ValueError("index points must be integral")
        n = self.matrix.shape[0]
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError(f"index point out of range for a {n} x {n} matrix")
        return idx

    def gram(self, X, Y) -> np.ndarray:
        X, Y = as_point_matrix(X), as_point_matrix(Y)
        return self.matrix[np.ix_(self._indices(X), self._indices(Y))]

    def pairwise(self, X, Y) -> np.ndarray:
        X, Y = as_point_matrix(X), as_point_matrix(Y)
        if X.shape[0] != Y.shape[0]:
            raise ValueError("pairwise needs equal-length batches")
        return self.matrix[self._indices(X), self._indices(Y)]

    def self_similarities(self, X) -> np.ndarray:
        X = as_point_matrix(X)
        idx = self._indices(X)
        return self.matrix[idx, idx]

    def index_pool(self) -> "CandidatePool":
        n = self.matrix.shape[0]
        return CandidatePool.from_points(np.arange(n, dtype=float)[:, None])


@dataclass(frozen=True)
class CandidatePool:
    """A finite indexed candidate set: (n, d) coordinates plus integer ids.

    Freshly built pools number their points 0..n-1; pools produced by
    ``subset`` keep the original ids so that selections remain traceable
    across shards.
    """

    points: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        ids = np.asarray(self.ids, dtype=int)
        if pts.ndim != 2:
            raise ValueError("pool points must form a 2-d array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("pool points must be finite")
        if ids.ndim != 1 or ids.shape[0] != pts.shape[0]:
            raise ValueError("need exactly one id per pool point")
        if np.unique(ids).size != ids.size:
            raise ValueError("pool ids must be unique")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_points(cls, points) -> "CandidatePool":
        pts = np.asarray(points, dtype=float)
        return cls(points=pts, ids=np.arange(pts.shape[0]))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, keep_ids) -> "CandidatePool":
        """Sub-pool containing the given ids, ordered by ascending id."""
        keep = np.unique(np.asarray(keep_ids, dtype=int))
        mask = np.isin(self.ids, keep)
        if mask.sum() != keep.size:
            missing = set(keep.tolist()) - set(self.ids.tolist())
            raise KeyError(f"ids not in pool: {sorted(missing)}")
        rows = np.flatnonzero(mask)
        order = rows[np.argsort(self.ids[rows])]
        return CandidatePool(points=self.points[order], ids=self.ids[order])

    def point_by_id(self, pool_id: int) -> np.ndarray:
        rows = np.flatnonzero(self.ids == int(pool_id))
        if rows.size == 0:
            raise KeyError(f"id {pool_id} not in pool")
        return self.points[rows[0]]


def gram_row(kernel: Kernel, x, points) -> np.ndarray:
    """Row vector k(x, p) for every point p; empty input gives an empty row."""
    P = as_point_matrix(points) if np.asarray(points).size else np.zeros((0, np.asarray(x).size))
    if P.shape[0] == 0:
        return np.zeros(0)
    return kernel.gram(as_point_matrix(x), P)[0]


def check_standardized(kernel: Kernel, pool: CandidatePool, tol: float = STANDARDIZATION_TOL) -> bool:
    """True when max_i |k(x_i, x_i) - 1| <= tol over the pool."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if len(pool) == 0:
        return True
    dev = np.abs(kernel.self_similarities(pool.points) - 1.0)
    return bool(np.max(dev) <= tol)
