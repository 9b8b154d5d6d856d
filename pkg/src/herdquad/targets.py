"""Target-distribution functionals consumed by the quadrature objective.

A target couples a distribution p with a standardized kernel and exposes
the two quantities every selection algorithm reads:

* the mean-embedding function  z(x) = E_{x'~p}[k(x, x')], and
* the self-energy              c = E_{x,y~p}[k(x, y)].

Closed forms are implemented for Gaussian mixtures under an RBF kernel and
for discrete targets under any kernel; a seeded Monte Carlo fallback covers
everything else.  ``mc_mean_embed`` / ``mc_self_energy`` are the sampling
oracles used to verify the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .kernels import Kernel, RBFKernel, as_point_matrix


class UnsupportedKernel(TypeError):
    """The target's closed form does not exist for this kernel family."""


class SamplerUnavailable(TypeError):
    """The target variant cannot draw samples."""


class TargetEmbedding:
    """Base class; subclasses implement ``mean_embed_many`` and ``self_energy``."""

    kernel: Kernel

    def mean_embed_many(self, X) -> np.ndarray:
        raise NotImplementedError

    def mean_embed(self, x) -> float:
        return float(self.mean_embed_many(as_point_matrix(x))[0])

    def self_energy(self) -> float:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise SamplerUnavailable(f"{type(self).__name__} cannot draw samples")


def _spd_cholesky(mat: np.ndarray, what: str) -> np.ndarray:
    try:
        return cholesky(mat, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own type
        raise ValueError(f"{what} is not symmetric positive definite") from exc


@dataclass
class GaussianMixtureTarget(TargetEmbedding):
    """Gaussian mixture p = sum_j pi_j N(m_j, S_j) under an RBF kernel.

    With bandwidth sigma the Gaussian convolution identity gives

        z(x) = sum_j pi_j |I + S_j/sigma^2|^{-1/2}
                      exp(-(x - m_j)^T (S_j + sigma^2 I)^{-1} (x - m_j) / 2)

        c    = sum_{j,l} pi_j pi_l |I + (S_j + S_l)/sigma^2|^{-1/2}
                      exp(-(m_j - m_l)^T (S_j + S_l + sigma^2 I)^{-1} (m_j - m_l) / 2)

    Determinant factors are evaluated in log space through Cholesky factors
    of the widened covariances, so no explicit inverses are formed.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    kernel: RBFKernel

    def __post_init__(self):
        if not isinstance(self.kernel, RBFKernel):
            raise UnsupportedKernel("Gaussian-mixture closed forms require an RBF kernel")
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        S = np.asarray(self.covs, dtype=float)
        if m.ndim != 2:
            raise ValueError("means must form a (components, dim) array")
        k, d = m.shape
        if w.shape != (k,) or S.shape != (k, d, d):
            raise ValueError("weights, means and covs disagree on the component count")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if not np.allclose(S, np.transpose(S, (0, 2, 1)), atol=1e-12, rtol=0.0):
            raise ValueError("covariances must be symmetric")
        self.weights, self.means, self.covs = w, m, S
        sigma2 = self.kernel.bandwidth**2
        eye = np.eye(d)
        self._cov_chols = [_spd_cholesky(S[j], f"covariance {j}") for j in range(k)]
        self._conv_chols = [_spd_cholesky(S[j] + sigma2 * eye, f"widened covariance {j}") for j in range(k)]
        log_sigma_d = d * np.log(self.kernel.bandwidth)
        self._amps = np.array(
            [np.exp(log_sigma_d - np.sum(np.log(np.diag(L)))) for L in self._conv_chols]
        )
        self._self_energy: float | None = None

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def mean_embed_many(self, X) -> np.ndarray:
        X = as_point_matrix(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: points have {X.shape[1]}, target has {self.dim}")
        out = np.zeros(X.shape[0])
        for pi_j, m_j, L_j, a_j in zip(self.weights, self.means, self._conv_chols, self._amps):
            Y = solve_triangular(L_j, (X - m_j).T, lower=True)
            q = np.einsum("dn,dn->n", Y, Y)
            out += pi_j * a_j * np.exp(-0.5 * q)
        return out

    def self_energy(self) -> float:
        if self._self_energy is None:
            sigma = self.kernel.bandwidth
            d = self.dim
            eye = np.eye(d)
            total = 0.0
            for j in range(len(self.weights)):
                for l in range(len(self.weights)):
                    L = _spd_cholesky(self.covs[j] + self.covs[l] + sigma**2 * eye, "pair covariance")
                    amp = np.exp(d * np.log(sigma) - np.sum(np.log(np.diag(L))))
                    y = solve_triangular(L, self.means[j] - self.means[l], lower=True)
                    total += self.weights[j] * self.weights[l] * amp * np.exp(-0.5 * float(y @ y))
            self._self_energy = float(total)
        return self._self_energy

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comps = rng.choice(len(self.weights), size=n, p=self.weights)
        normals = rng.standard_normal((n, self.dim))
        chols = np.stack(self._cov_chols)
        return self.means[comps] + np.einsum("nij,nj->ni", chols[comps], normals)


@dataclass
class DiscreteTarget(TargetEmbedding):
    """Discrete target sum_i q_i delta(y_i) under any standardized kernel."""

    support: np.ndarray
    probs: np.ndarray
    kernel: Kernel

    def __post_init__(self):
        pts = as_point_matrix(self.support)
        q = np.asarray(self.probs, dtype=float)
        if q.ndim != 1 or q.shape[0] != pts.shape[0]:
            raise ValueError("need one probability per support point")
        if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        self.support, self.probs = pts, q
        self._self_energy: float | None = None

    @classmethod
    def uniform(cls, points, kernel: Kernel) -> "DiscreteTarget":
        pts = as_point_matrix(points)
        return cls(support=pts, probs=np.full(pts.shape[0], 1.0 / pts.shape[0]), kernel=kernel)

    def mean_embed_many(self, X) -> np.ndarray:
        return self.kernel.gram(as_point_matrix(X), self.support) @ self.probs

    def self_energy(self) -> float:
        if self._self_energy is None:
            G = self.kernel.gram(self.support, self.support)
            self._self_energy = float(self.probs @ G @ self.probs)
        return self._self_energy

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(self.support.shape[0], size=n, p=self.probs)
        return self.support[idx]


@dataclass
class MonteCarloTarget(TargetEmbedding):
    """Seeded Monte Carlo fallback for targets without a closed form.

    ``sampler(n, rng)`` must return an (n, d) array.  The estimator draws a
    fixed sample at construction (mean embedding) plus an independent paired
    sample (self-energy), so every evaluation is deterministic for a given
    seed and there is no shared mutable state.
    """

    sampler: Callable[[int, np.random.Generator], np.ndarray]
    kernel: Kernel
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("need at least one sample")
        rng = np.random.default_rng(self.seed)
        self._embed_draw = as_point_matrix(self.sampler(self.n_samples, rng))
        self._pair_a = as_point_matrix(self.sampler(self.n_samples, rng))
        self._pair_b = as_point_matrix(self.sampler(self.n_samples, rng))

    def mean_embed_many(self, X) -> np.ndarray:
        return self.kernel.gram(as_point_matrix(X), self._embed_draw).mean(axis=1)

    def self_energy(self) -> float:
        return float(self.kernel.pairwise(self._pair_a, self._pair_b).mean())

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return as_point_matrix(self.sampler(n, rng))


def mc_mean_embed(target: TargetEmbedding, x, n_samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of z(x) with its standard error.

    Draws ``n_samples`` points from the target's sampler under the given
    seed and averages k(x, draw).  With a single sample the standard error
    is reported as ``inf`` (no spread information).
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    draws = target.sample(n_samples, np.random.default_rng(seed))
    vals = target.kernel.gram(as_point_matrix(x), draws)[0]
    est = float(vals.mean())
    if n_samples == 1:
        return est, float("inf")
    return est, float(vals.std(ddof=1) / np.sqrt(n_samples))


def mc_self_energy(target: TargetEmbedding, n_pairs: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of the self-energy from independent sample pairs."""
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    draws = target.sample(2 * n_pairs, np.random.default_rng(seed))
    vals = target.kernel.pairwise(draws[:n_pairs], draws[n_pairs:])
    est = float(vals.mean())
    if n_pairs == 1:
        return est, float("inf")
    return est, float(vals.std(ddof=1) / np.sqrt(n_pairs))
