import numpy as np
import pytest

from herdquad.kernels import NormalizedFeatureKernel, RBFKernel
from herdquad.targets import (
    DiscreteTarget,
    GaussianMixtureTarget,
    MonteCarloTarget,
    SamplerUnavailable,
    TargetEmbedding,
    UnsupportedKernel,
    mc_mean_embed,
    mc_self_energy,
)
from tests.conftest import random_mixture

# Closed-form constants for p = N(0,1) with the unit-bandwidth RBF kernel:
# z(0) = (1 + 1)^{-1/2} and c = (1 + 2)^{-1/2}.  Both were frozen after
# cross-checking against the seeded Monte Carlo estimators below.
Z_AT_ZERO = 0.7071067811865475
SELF_ENERGY = 0.5773502691896258


def test_std_normal_mean_embed_at_zero(std_normal_target):
    assert std_normal_target.mean_embed(np.array([0.0])) == pytest.approx(Z_AT_ZERO, abs=1e-14)


def test_std_normal_self_energy(std_normal_target):
    assert std_normal_target.self_energy() == pytest.approx(SELF_ENERGY, abs=1e-14)


def test_std_normal_closed_forms_match_mc_oracle(std_normal_target):
    est, se = mc_mean_embed(std_normal_target, np.array([0.0]), n_samples=10**6, seed=11)
    assert abs(est - Z_AT_ZERO) <= 3 * se
    est, se = mc_self_energy(std_normal_target, n_pairs=10**6, seed=12)
    assert abs(est - SELF_ENERGY) <= 3 * se


def test_discrete_two_point_values(two_point_discrete):
    expected = 0.5 * (1.0 + np.exp(-2.0))
    assert two_point_discrete.mean_embed(np.array([0.0])) == pytest.approx(expected, abs=1e-15)
    assert two_point_discrete.self_energy() == pytest.approx(expected, abs=1e-15)


def test_discrete_self_energy_in_unit_interval(rng):
    pts = rng.normal(size=(9, 2))
    target = DiscreteTarget.uniform(pts, RBFKernel(0.7))
    assert 0.0 < target.self_energy() <= 1.0


def test_discrete_weighted_embedding_matches_manual(rng):
    pts = rng.normal(size=(5, 2))
    probs = np.array([0.4, 0.1, 0.2, 0.2, 0.1])
    kern = RBFKernel(1.3)
    target = DiscreteTarget(support=pts, probs=probs, kernel=kern)
    x = rng.normal(size=2)
    manual = sum(p * kern(x, y) for p, y in zip(probs, pts))
    assert target.mean_embed(x) == pytest.approx(manual, rel=1e-14)


def test_discrete_rejects_bad_probs():
    with pytest.raises(ValueError):
        DiscreteTarget(support=np.zeros((2, 1)), probs=np.array([0.7, 0.7]), kernel=RBFKernel(1.0))


def test_mixture_requires_rbf():
    with pytest.raises(UnsupportedKernel):
        GaussianMixtureTarget(
            weights=np.array([1.0]),
            means=np.zeros((1, 2)),
            covs=np.stack([np.eye(2)]),
            kernel=NormalizedFeatureKernel(),
        )


def test_mixture_rejects_inconsistent_shapes():
    with pytest.raises(ValueError):
        GaussianMixtureTarget(
            weights=np.array([0.5, 0.5]),
            means=np.zeros((1, 2)),
            covs=np.stack([np.eye(2)]),
            kernel=RBFKernel(1.0),
        )


def test_mixture_mean_embed_many_matches_scalar(rng):
    target = random_mixture(rng)
    X = rng.normal(size=(6, 2))
    batch = target.mean_embed_many(X)
    singles = np.array([target.mean_embed(x) for x in X])
    np.testing.assert_allclose(batch, singles, rtol=1e-13)


def test_mixture_closed_forms_match_mc_on_random_configs(rng):
    for trial in range(5):
        target = random_mixture(rng, components=int(rng.integers(1, 4)))
        x = rng.normal(size=2)
        est, se = mc_mean_embed(target, x, n_samples=200_000, seed=100 + trial)
        assert abs(est - target.mean_embed(x)) <= 4 * se
        est, se = mc_self_energy(target, n_pairs=200_000, seed=200 + trial)
        assert abs(est - target.self_energy()) <= 4 * se


def test_mixture_sampling_is_seeded(rng):
    target = random_mixture(rng)
    a = target.sample(50, np.random.default_rng(5))
    b = target.sample(50, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (50, 2)


def test_mixture_sample_moments(rng):
    mean = np.array([[1.0, -2.0]])
    target = GaussianMixtureTarget(
        weights=np.array([1.0]),
        means=mean,
        covs=np.stack([np.diag([0.2, 0.5])]),
        kernel=RBFKernel(1.0),
    )
    draws = target.sample(200_000, np.random.default_rng(0))
    np.testing.assert_allclose(draws.mean(axis=0), mean[0], atol=0.01)
    np.testing.assert_allclose(draws.var(axis=0), [0.2, 0.5], atol=0.01)


def test_monte_carlo_target_is_deterministic(std_normal_target):
    mc = MonteCarloTarget(
        sampler=lambda n, rng: rng.standard_normal((n, 1)),
        kernel=RBFKernel(1.0),
        n_samples=50_000,
        seed=3,
    )
    again = MonteCarloTarget(
        sampler=lambda n, rng: rng.standard_normal((n, 1)),
        kernel=RBFKernel(1.0),
        n_samples=50_000,
        seed=3,
    )
    x = np.array([0.4])
    assert mc.mean_embed(x) == again.mean_embed(x)
    assert mc.self_energy() == again.self_energy()
    assert mc.mean_embed(x) == pytest.approx(std_normal_target.mean_embed(x), abs=0.01)


def test_mc_mean_embed_single_sample_has_inf_se(std_normal_target):
    _, se = mc_mean_embed(std_normal_target, np.array([0.0]), n_samples=1, seed=0)
    assert np.isinf(se)


def test_base_target_cannot_sample():
    class Bare(TargetEmbedding):
        def mean_embed_many(self, X):
            return np.zeros(len(X))

        def self_energy(self):
            return 1.0

    with pytest.raises(SamplerUnavailable):
        Bare().sample(3, np.random.default_rng(0))
