import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from herdquad.kernels import (
    STANDARDIZATION_TOL,
    CandidatePool,
    NormalizedFeatureKernel,
    PrecomputedKernel,
    RBFKernel,
    ZeroNormFeature,
    check_standardized,
    gram_row,
)


def test_rbf_diagonal_is_one(rbf_unit):
    x = np.array([0.3, -1.7])
    assert rbf_unit(x, x) == 1.0


def test_rbf_known_value(rbf_unit):
    assert rbf_unit(np.array([0.0]), np.array([2.0])) == pytest.approx(np.exp(-2.0), rel=1e-15)


def test_rbf_rejects_nonpositive_bandwidth():
    with pytest.raises(ValueError):
        RBFKernel(0.0)
    with pytest.raises(ValueError):
        RBFKernel(-1.5)


def test_rbf_dimension_mismatch(rbf_unit):
    with pytest.raises(ValueError):
        rbf_unit.gram(np.zeros((2, 2)), np.zeros((2, 3)))


def test_gram_row_matches_full_gram(rbf_unit, rng):
    pts = rng.normal(size=(7, 3))
    x = rng.normal(size=3)
    row = gram_row(rbf_unit, x, pts)
    full = rbf_unit.gram(x.reshape(1, -1), pts)[0]
    np.testing.assert_allclose(row, full, rtol=0, atol=0)


def test_gram_row_empty_subset(rbf_unit):
    assert gram_row(rbf_unit, np.array([1.0, 2.0]), np.zeros((0, 2))).shape == (0,)


points_strategy = hnp.arrays(
    dtype=float,
    shape=st.tuples(st.integers(2, 12), st.integers(1, 4)),
    elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False),
)


@given(X=points_strategy, bw=st.floats(0.2, 4.0))
def test_rbf_gram_symmetric_psd_bounded(X, bw):
    kern = RBFKernel(bw)
    K = kern.gram(X, X)
    assert np.max(np.abs(K - K.T)) <= 1e-14
    assert np.min(np.linalg.eigvalsh(K)) >= -1e-8
    assert np.all(K <= 1.0 + 1e-12) and np.all(K >= -1.0 - 1e-12)


@given(X=points_strategy)
def test_normalized_feature_gram_symmetric_psd(X):
    # shift away from the origin so no feature row can have zero norm
    X = X + 10.0
    kern = NormalizedFeatureKernel()
    K = kern.gram(X, X)
    assert np.max(np.abs(K - K.T)) <= 1e-14
    assert np.min(np.linalg.eigvalsh(K)) >= -1e-8
    np.testing.assert_allclose(np.diag(K), 1.0, atol=1e-12)


def test_normalized_feature_cosine_value():
    kern = NormalizedFeatureKernel()
    v = kern(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    assert v == pytest.approx(1.0 / np.sqrt(2.0), rel=1e-14)


def test_normalized_feature_zero_norm_rejected():
    kern = NormalizedFeatureKernel()
    with pytest.raises(ZeroNormFeature):
        kern.gram(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[1.0, 0.0]]))


def test_normalized_feature_custom_map():
    kern = NormalizedFeatureKernel(feature_map=lambda X: np.hstack([X, np.ones((X.shape[0], 1))]))
    x = np.array([[0.0]])
    np.testing.assert_allclose(kern.gram(x, x), [[1.0]], atol=1e-15)


def test_precomputed_requires_symmetry():
    with pytest.raises(ValueError, match="symmetric"):
        PrecomputedKernel(np.array([[1.0, 0.2], [0.3, 1.0]]))


def test_precomputed_requires_unit_diag_by_default():
    M = np.array([[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="diagonal"):
        PrecomputedKernel(M)
    kern = PrecomputedKernel(M, require_unit_diag=False)
    assert kern(np.array([0.0]), np.array([0.0])) == 2.0


def test_precomputed_lookup_and_pool():
    M = np.array([[1.0, 0.0], [0.0, 1.0]])
    kern = PrecomputedKernel(M)
    pool = kern.index_pool()
    assert len(pool) == 2
    assert kern(pool.points[0], pool.points[1]) == 0.0
    with pytest.raises(IndexError):
        kern(np.array([5.0]), np.array([0.0]))


def test_pool_ids_survive_subset():
    pool = CandidatePool.from_points(np.arange(10.0).reshape(-1, 2))
    sub = pool.subset([4, 1])
    np.testing.assert_array_equal(sub.ids, [1, 4])
    np.testing.assert_array_equal(sub.point_by_id(4), pool.points[4])
    with pytest.raises(KeyError):
        pool.subset([99])


def test_pool_rejects_duplicate_ids():
    with pytest.raises(ValueError, match="unique"):
        CandidatePool(points=np.zeros((2, 1)), ids=np.array([3, 3]))


def test_pool_rejects_nonfinite_points():
    with pytest.raises(ValueError, match="finite"):
        CandidatePool.from_points(np.array([[np.nan], [0.0]]))


def test_check_standardized_accepts_rbf(rbf_unit, rng):
    pool = CandidatePool.from_points(rng.normal(size=(6, 2)))
    assert check_standardized(rbf_unit, pool, STANDARDIZATION_TOL)


def test_check_standardized_flags_bad_diagonal():
    M = np.array([[1.0, 0.1], [0.1, 0.5]])
    kern = PrecomputedKernel(M, require_unit_diag=False)
    pool = kern.index_pool()
    assert not check_standardized(kern, pool)
