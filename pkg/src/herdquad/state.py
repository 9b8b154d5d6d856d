"""Incrementally factorized quadrature state.

``QuadratureState`` tracks the selected atoms, the lower Cholesky factor of
their Gram matrix, the optimal weights, and the squared MMD between the
target embedding and the weighted atom embedding:

    mmd_sq = c - z^T K^{-1} z

with z the mean embedding at the atoms and c the target self-energy.
Adding an atom extends the Cholesky factor by one row (cost O(i^2)); an
atom whose Schur complement falls below ``TAU_DEP`` would make the factor
numerically singular and is rejected instead of jittered.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import Kernel, as_point_matrix
from .targets import TargetEmbedding

TAU_DEP = 1e-10


class NearDependentAtom(Exception):
    """Candidate is numerically dependent on the selected atoms."""

    def __init__(self, pool_id: int, schur: float):
        super().__init__(f"atom {pool_id} is numerically dependent (schur complement {schur:.3e})")
        self.pool_id = pool_id
        self.schur = schur


class DuplicateAtom(Exception):
    """Candidate pool id is already among the selected atoms."""


def _chol_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    t = solve_triangular(chol, rhs, lower=True)
    return solve_triangular(chol.T, t, lower=False)


def _solve_weights(chol: np.ndarray, gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # Two refinement sweeps keep the residual z - K w near machine precision
    # even when an accepted atom sits just above the dependence threshold.
    w = _chol_solve(chol, rhs)
    for _ in range(2):
        r = rhs - gram @ w
        w = w + _chol_solve(chol, r)
    return w


class QuadratureState:
    """Mutable selection state for one (target, kernel) pair."""

    def __init__(self, target: TargetEmbedding, kernel: Kernel):
        self.target = target
        self.kernel = kernel
        self.self_energy = float(target.self_energy())
        self.atom_ids: list[int] = []
        self.atoms = np.zeros((0, 0))
        self.chol = np.zeros((0, 0))
        self.gram = np.zeros((0, 0))
        self.embeds = np.zeros(0)
        self.weights = np.zeros(0)
        self.mmd_sq = self.self_energy

    @property
    def size(self) -> int:
        return len(self.atom_ids)

    def copy(self) -> "QuadratureState":
        out = object.__new__(QuadratureState)
        out.target = self.target
        out.kernel = self.kernel
        out.self_energy = self.self_energy
        out.atom_ids = list(self.atom_ids)
        out.atoms = self.atoms.copy()
        out.chol = self.chol.copy()
        out.gram = self.gram.copy()
        out.embeds = self.embeds.copy()
        out.weights = self.weights.copy()
        out.mmd_sq = self.mmd_sq
        return out

    def add_atom(self, x, pool_id: int) -> None:
        """Select point ``x`` (pool id ``pool_id``) and refresh weights.

        Raises ``DuplicateAtom`` for an already-selected id and
        ``NearDependentAtom`` when the Schur complement drops below
        ``TAU_DEP``; the state is unchanged in both cases.
        """
        pool_id = int(pool_id)
        if pool_id in self.atom_ids:
            raise DuplicateAtom(f"pool id {pool_id} already selected")
        x = np.asarray(x, dtype=float).ravel()
        i = self.size
        kxx = float(self.kernel(x, x))
        if i == 0:
            kx = np.zeros(0)
            lrow = np.zeros(0)
            schur = kxx
        else:
            kx = self.kernel.gram(self.atoms, x.reshape(1, -1))[:, 0]
            lrow = solve_triangular(self.chol, kx, lower=True)
            schur = kxx - float(lrow @ lrow)
        if schur < TAU_DEP:
            raise NearDependentAtom(pool_id, schur)

        chol = np.zeros((i + 1, i + 1))
        chol[:i, :i] = self.chol
        chol[i, :i] = lrow
        chol[i, i] = np.sqrt(schur)

        gram = np.empty((i + 1, i + 1))
        gram[:i, :i] = self.gram
        gram[i, :i] = kx
        gram[:i, i] = kx
        gram[i, i] = kxx

        embeds = np.append(self.embeds, self.target.mean_embed(x))
        weights = _solve_weights(chol, gram, embeds)

        self.atoms = x.reshape(1, -1) if i == 0 else np.vstack([self.atoms, x])
        self.atom_ids.append(pool_id)
        self.chol = chol
        self.gram = gram
        self.embeds = embeds
        self.weights = weights
        self.mmd_sq = self.self_energy - float(embeds @ weights)

    def residual_correlations(self, X, embeds=None) -> np.ndarray:
        """z(x) - k_x^T w for a batch of points.

        ``embeds`` may carry precomputed mean-embedding values for ``X`` to
        avoid redundant target evaluations in selection loops.
        """
        X = as_point_matrix(X)
        z = self.target.mean_embed_many(X) if embeds is None else np.asarray(embeds, dtype=float)
        if self.size == 0:
            return z.copy()
        return z - self.kernel.gram(X, self.atoms) @ self.weights

    def residual_correlation(self, x) -> float:
        return float(self.residual_correlations(as_point_matrix(x))[0])

    def schur_complements(self, X) -> np.ndarray:
        """k(x, x) - k_x^T K^{-1} k_x per point; 1 means fully novel."""
        X = as_point_matrix(X)
        diag = self.kernel.self_similarities(X)
        if self.size == 0:
            return diag
        C = self.kernel.gram(self.atoms, X)
        Y = solve_triangular(self.chol, C, lower=True)
        return diag - np.einsum("ij,ij->j", Y, Y)

    def variance_reductions(self, X, embeds=None, return_schur: bool = False):
        """One-step drop of mmd_sq for each candidate.

        For a candidate with residual correlation r and Schur complement s
        the drop is r^2 / s; numerically dependent candidates (s < TAU_DEP)
        report a zero reduction by convention.
        """
        resid = self.residual_correlations(X, embeds=embeds)
        schur = self.schur_complements(X)
        safe = np.maximum(schur, TAU_DEP)
        delta = np.where(schur >= TAU_DEP, resid**2 / safe, 0.0)
        if return_schur:
            return delta, schur
        return delta

    def posterior_variance_reduction(self, x) -> float:
        return float(self.variance_reductions(as_point_matrix(x))[0])


def new_state(target: TargetEmbedding, kernel: Kernel) -> QuadratureState:
    """Empty state: no atoms, mmd_sq equal to the target self-energy."""
    return QuadratureState(target, kernel)
