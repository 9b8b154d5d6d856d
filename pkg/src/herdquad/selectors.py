"""Greedy atom-selection rules and the per-run driver.

Four methods share one driver:

* ``WKH``        greedy selection by residual correlation, optimal weights.
* ``SBQ``        greedy selection by one-step variance reduction, optimal
                 weights; per-iteration it dominates WKH by construction.
* ``KH_UNIFORM`` classic herding with uniform weights; the driver draws
                 fresh points by default, repeats behind a flag.
* ``MC_RANDOM``  uniform draws without replacement; the returned state is
                 optimally reweighted, the trace reports the plain
                 uniform-weight estimate a baseline comparison plots.

Selection is deterministic: ties go to the lowest pool id unless the
random tie policy is requested, and a fixed (method, pool, target, kernel,
k, seed) tuple always reproduces the same id sequence.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    STANDARDIZATION_TOL,
    CandidatePool,
    Kernel,
    StandardizationError,
    check_standardized,
)
from .state import TAU_DEP, NearDependentAtom, QuadratureState, new_state
from .targets import TargetEmbedding

G_STOP = 1e-14


class EmptyPool(Exception):
    """No candidates left to score."""


class AllDependent(Exception):
    """Every remaining candidate is numerically dependent on the atoms."""


class Method(str, enum.Enum):
    WKH = "WKH"
    SBQ = "SBQ"
    KH_UNIFORM = "KH_UNIFORM"
    MC_RANDOM = "MC_RANDOM"


@dataclass
class TraceRow:
    iteration: int
    chosen_id: int
    mmd_sq: float
    delta: float
    score: float
    elapsed_ms: float


@dataclass
class RunTrace:
    method: str
    seed: int
    rows: list[TraceRow] = field(default_factory=list)
    stop_reason: str | None = None

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r.iteration for r in self.rows], dtype=int)

    @property
    def mmd_values(self) -> np.ndarray:
        return np.array([r.mmd_sq for r in self.rows])

    @property
    def chosen_ids(self) -> list[int]:
        return [r.chosen_id for r in self.rows]

    @property
    def final_mmd_sq(self) -> float:
        return self.rows[-1].mmd_sq if self.rows else float("nan")


def _pick(scores: np.ndarray, candidate_rows: np.ndarray, ids: np.ndarray,
          tie_break: str, rng: np.random.Generator | None) -> int:
    """Row index of the best-scoring candidate; ties per the policy."""
    vals = scores[candidate_rows]
    best = vals.max()
    ties = candidate_rows[vals == best]
    if ties.size == 1:
        return int(ties[0])
    if tie_break == "lowest_id":
        return int(ties[np.argmin(ids[ties])])
    if tie_break == "random":
        if rng is None:
            raise ValueError("random tie-breaking needs a generator")
        return int(rng.choice(ties))
    raise ValueError(f"unknown tie policy {tie_break!r}")


def wkh_select(state: QuadratureState, pool: CandidatePool, excluded_ids=()) -> int:
    """Pool id with the largest residual correlation z(x) - k_x^T w."""
    mask = ~np.isin(pool.ids, np.asarray(list(excluded_ids), dtype=int))
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise EmptyPool("no candidates left")
    scores = state.residual_correlations(pool.points)
    return int(pool.ids[_pick(scores, rows, pool.ids, "lowest_id", None)])


def sbq_select(state: QuadratureState, pool: CandidatePool, excluded_ids=()) -> int:
    """Pool id with the largest one-step variance reduction.

    Candidates whose Schur complement falls below the dependence threshold
    are not eligible; if no candidate is eligible ``AllDependent`` is
    raised.
    """
    mask = ~np.isin(pool.ids, np.asarray(list(excluded_ids), dtype=int))
    if not mask.any():
        raise EmptyPool("no candidates left")
    delta, schur = state.variance_reductions(pool.points, return_schur=True)
    rows = np.flatnonzero(mask & (schur >= TAU_DEP))
    if rows.size == 0:
        raise AllDependent("every candidate is numerically dependent")
    return int(pool.ids[_pick(delta, rows, pool.ids, "lowest_id", None)])


class UniformAccumulator:
    """Herding state under uniform weights 1/n.

    Tracks chosen atoms (repeats allowed), their mean-embedding values and
    the running pairwise similarity sum, so the uniform-weight squared MMD

        c - 2 mean_i z_i + mean_{i,j} k(x_i, x_j)

    is available after every step.
    """

    def __init__(self, target: TargetEmbedding, kernel: Kernel):
        self.target = target
        self.kernel = kernel
        self.self_energy = float(target.self_energy())
        self.atom_ids: list[int] = []
        self.atoms: list[np.ndarray] = []
        self.embeds: list[float] = []
        self._pair_sum = 0.0

    @property
    def size(self) -> int:
        return len(self.atom_ids)

    @property
    def mmd_sq(self) -> float:
        n = self.size
        if n == 0:
            return self.self_energy
        return self.self_energy - 2.0 * float(np.mean(self.embeds)) + self._pair_sum / n**2

    def atoms_matrix(self) -> np.ndarray:
        return np.vstack(self.atoms)

    def add(self, x, pool_id: int) -> None:
        x = np.asarray(x, dtype=float).ravel()
        cross = 0.0
        if self.size:
            cross = float(np.sum(self.kernel.gram(x.reshape(1, -1), self.atoms_matrix())[0]))
        self._pair_sum += 2.0 * cross + float(self.kernel(x, x))
        self.atom_ids.append(int(pool_id))
        self.atoms.append(x)
        self.embeds.append(self.target.mean_embed(x))


def kh_uniform_step(acc: UniformAccumulator, pool: CandidatePool, excluded_ids=()) -> int:
    """Pool id maximizing z(x) - sum_i k(x, x_i) / (n + 1).

    With no exclusions this is classic herding: re-selecting an already
    chosen point is allowed.
    """
    mask = ~np.isin(pool.ids, np.asarray(list(excluded_ids), dtype=int))
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise EmptyPool("no candidates left")
    z = acc.target.mean_embed_many(pool.points)
    if acc.size:
        ksum = acc.kernel.gram(pool.points, acc.atoms_matrix()).sum(axis=1)
    else:
        ksum = np.zeros(len(pool))
    scores = z - ksum / (acc.size + 1)
    return int(pool.ids[_pick(scores, rows, pool.ids, "lowest_id", None)])


def run_greedy(
    method,
    pool: CandidatePool,
    target: TargetEmbedding,
    kernel: Kernel,
    k: int,
    seed: int = 0,
    *,
    tie_break: str = "lowest_id",
    kh_with_replacement: bool = False,
    g_stop: float = G_STOP,
    check_standardization: bool = True,
):
    """Run ``k`` selection iterations of the given method over the pool.

    Returns ``(result, trace)`` where ``result`` is a ``QuadratureState``
    (WKH / SBQ / MC_RANDOM) or a ``UniformAccumulator`` (KH_UNIFORM).  The
    trace records one row per iteration with the objective value after the
    step, the step's objective drop, the winning selector score and wall
    time.  The g column is guaranteed non-increasing only for WKH and SBQ;
    under uniform weights (KH_UNIFORM, and the MC_RANDOM trace, which
    reports the plain sample-average estimate rather than the reweighted
    one) single steps can raise it.  Early-stop reasons: ``objective_floor``
    once mmd_sq <= g_stop (WKH/SBQ), ``all_dependent`` when no independent
    candidate remains, and ``pool_exhausted``.
    """
    method = Method(method)
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(pool) == 0:
        raise EmptyPool("empty candidate pool")
    if check_standardization and not check_standardized(kernel, pool, STANDARDIZATION_TOL):
        raise StandardizationError("kernel is not standardized on this pool")
    rng = np.random.default_rng(seed)
    trace = RunTrace(method=method.value, seed=seed)
    t0 = time.perf_counter()
    z_all = target.mean_embed_many(pool.points)

    def elapsed_ms() -> float:
        return (time.perf_counter() - t0) * 1e3

    if method in (Method.WKH, Method.SBQ):
        state = new_state(target, kernel)
        used = np.zeros(len(pool), dtype=bool)
        for it in range(1, k + 1):
            if state.mmd_sq <= g_stop:
                trace.stop_reason = "objective_floor"
                break
            if used.all():
                trace.stop_reason = "pool_exhausted"
                break
            if method is Method.SBQ:
                scores, schur = state.variance_reductions(pool.points, embeds=z_all, return_schur=True)
                eligible = ~used & (schur >= TAU_DEP)
            else:
                scores = state.residual_correlations(pool.points, embeds=z_all)
                eligible = ~used
            placed = False
            while eligible.any():
                row = _pick(scores, np.flatnonzero(eligible), pool.ids, tie_break, rng)
                try:
                    prev = state.mmd_sq
                    state.add_atom(pool.points[row], pool.ids[row])
                except NearDependentAtom:
                    eligible[row] = False
                    continue
                used[row] = True
                trace.rows.append(TraceRow(it, int(pool.ids[row]), state.mmd_sq,
                                           prev - state.mmd_sq, float(scores[row]), elapsed_ms()))
                placed = True
                break
            if not placed:
                trace.stop_reason = "all_dependent"
                break
        return state, trace

    if method is Method.KH_UNIFORM:
        acc = UniformAccumulator(target, kernel)
        ksum = np.zeros(len(pool))
        used = np.zeros(len(pool), dtype=bool)
        for it in range(1, k + 1):
            candidate_rows = np.arange(len(pool)) if kh_with_replacement else np.flatnonzero(~used)
            if candidate_rows.size == 0:
                trace.stop_reason = "pool_exhausted"
                break
            scores = z_all - ksum / (acc.size + 1)
            row = _pick(scores, candidate_rows, pool.ids, tie_break, rng)
            prev = acc.mmd_sq
            acc.add(pool.points[row], pool.ids[row])
            used[row] = True
            ksum += kernel.gram(pool.points[row].reshape(1, -1), pool.points)[0]
            trace.rows.append(TraceRow(it, int(pool.ids[row]), acc.mmd_sq,
                                       prev - acc.mmd_sq, float(scores[row]), elapsed_ms()))
        return acc, trace

    # MC_RANDOM: every draw counts as one iteration and as a selected point.
    # The returned state optimally reweights the accepted draws (a draw that
    # is numerically dependent on them adds nothing to the span and is
    # skipped), while the trace reports the plain uniform-weight estimate
    # over all draws, which is the number a method comparison plots for the
    # Monte Carlo baseline.
    state = new_state(target, kernel)
    acc = UniformAccumulator(target, kernel)
    order = rng.permutation(len(pool))
    for it, row in enumerate(order[:k], start=1):
        prev = acc.mmd_sq
        score = state.residual_correlations(
            pool.points[row].reshape(1, -1), embeds=z_all[row].reshape(1))[0]
        try:
            state.add_atom(pool.points[row], pool.ids[row])
        except NearDependentAtom:
            pass
        acc.add(pool.points[row], pool.ids[row])
        trace.rows.append(TraceRow(it, int(pool.ids[row]), acc.mmd_sq,
                                   prev - acc.mmd_sq, float(score), elapsed_ms()))
    if len(order) < k:
        trace.stop_reason = "pool_exhausted"
    return state, trace
