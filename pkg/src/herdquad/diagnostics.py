"""Empirical checks of the convergence and approximation behavior.

These routines turn the analytical claims behind the selection algorithms
into testable statements on concrete instances:

* ``fit_rate``                 log-linear decay rate of an objective trace,
* ``brute_force_best_subset``  exhaustive oracle over small subsets,
* ``check_approx_guarantee``   greedy-vs-oracle bound with estimated
                               curvature constants,
* ``estimate_rsc_rss``         spectrum surrogate for those constants,
* ``orthogonality_residual``   weight-optimality audit,
* ``realizability_fixtures``   instances where one or two atoms suffice.

Dense solves here deliberately avoid the incremental Cholesky path of
``QuadratureState`` so the two routes stay independent checks of each
other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .kernels import CandidatePool, Kernel, NormalizedFeatureKernel
from .selectors import Method, RunTrace, run_greedy
from .state import TAU_DEP, QuadratureState
from .targets import DiscreteTarget, TargetEmbedding

G_FLOOR = 1e-13
SUBSET_BUDGET = 10**6


class InsufficientPoints(ValueError):
    """Fewer than three trace points above the numerical floor."""


class CombinatorialBudgetExceeded(ValueError):
    """The subset count is too large for exhaustive search."""


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


@dataclass(frozen=True)
class OracleSubset:
    ids: tuple[int, ...]
    mmd_sq: float
    subsets_examined: int


def fit_rate(trace) -> RateFit:
    """Least-squares fit of log(objective) against the iteration index.

    Accepts a ``RunTrace`` or an iterable of (iteration, value) pairs.
    Values at or below ``G_FLOOR`` carry no rate information (they sit in
    the numerical noise floor) and are excluded; fewer than three usable
    points raise ``InsufficientPoints``.
    """
    if isinstance(trace, RunTrace):
        pairs = [(row.iteration, row.mmd_sq) for row in trace.rows]
    else:
        pairs = [(int(i), float(v)) for i, v in trace]
    usable = [(i, v) for i, v in pairs if np.isfinite(v) and v > G_FLOOR]
    if len(usable) < 3:
        raise InsufficientPoints(f"need >= 3 points above {G_FLOOR:g}, got {len(usable)}")
    x = np.array([i for i, _ in usable], dtype=float)
    y = np.log(np.array([v for _, v in usable]))
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float(yc @ yc)
    if ss_tot == 0.0:
        r_squared = 1.0
    else:
        resid = y - (intercept + slope * x)
        r_squared = 1.0 - float(resid @ resid) / ss_tot
    return RateFit(slope=slope, intercept=intercept, r_squared=r_squared, n_points=len(usable))


def _dense_objective(K: np.ndarray, z: np.ndarray, c: float, rows) -> float:
    """Optimal-weight objective for one subset, by dense LU solves.

    Rows are filtered to their maximal independent prefix: the scan stops
    at the first row whose Schur complement against the accepted prefix
    falls below the dependence threshold.
    """
    kept: list[int] = []
    for r in rows:
        if not kept:
            if K[r, r] < TAU_DEP:
                break
            kept.append(r)
            continue
        sub = np.ix_(kept, kept)
        kv = K[kept, r]
        schur = K[r, r] - float(kv @ np.linalg.solve(K[sub], kv))
        if schur < TAU_DEP:
            break
        kept.append(r)
    if not kept:
        return c
    sub = np.ix_(kept, kept)
    zk = z[kept]
    return c - float(zk @ np.linalg.solve(K[sub], zk))


def brute_force_best_subset(pool: CandidatePool, target: TargetEmbedding,
                            kernel: Kernel, r: int) -> OracleSubset:
    """Exhaustive best subset of size at most ``r`` under optimal weights.

    Guards the budget with C(n, r) <= 10^6.  Ties keep the first subset in
    lexicographic id order, which makes the oracle deterministic.
    """
    n = len(pool)
    if r < 1:
        raise ValueError("subset size must be at least 1")
    if math.comb(n, min(r, n)) > SUBSET_BUDGET:
        raise CombinatorialBudgetExceeded(
            f"C({n}, {r}) = {math.comb(n, min(r, n))} exceeds the {SUBSET_BUDGET} budget")
    z = target.mean_embed_many(pool.points)
    K = kernel.gram(pool.points, pool.points)
    c = target.self_energy()
    best_g = np.inf
    best_rows: tuple[int, ...] = ()
    examined = 0
    for size in range(1, min(r, n) + 1):
        for rows in itertools.combinations(range(n), size):
            examined += 1
            g = _dense_objective(K, z, c, rows)
            if g < best_g:
                best_g = g
                best_rows = rows
    return OracleSubset(ids=tuple(int(pool.ids[i]) for i in best_rows),
                        mmd_sq=float(best_g), subsets_examined=examined)


def estimate_rsc_rss(state: QuadratureState) -> tuple[float, float]:
    """Smallest and largest eigenvalue of the selected-atom Gram matrix.

    These act as plug-in surrogates for the restricted curvature constants
    in the approximation bound; the caveat is that they are measured on the
    greedy run's own atoms rather than on every feasible subset.
    """
    if state.size < 1:
        raise ValueError("need at least one atom")
    eigs = np.linalg.eigvalsh(state.gram)
    return float(eigs[0]), float(eigs[-1])


def orthogonality_residual(state: QuadratureState) -> float:
    """max_j |z_j - (K w)_j| over the atoms; near zero iff weights are optimal."""
    if state.size < 1:
        raise ValueError("need at least one atom")
    return float(np.max(np.abs(state.embeds - state.gram @ state.weights)))


def _spectrum(kernel: Kernel, points: np.ndarray) -> tuple[float, float]:
    eigs = np.linalg.eigvalsh(kernel.gram(points, points))
    return float(eigs[0]), float(eigs[-1])


def check_approx_guarantee(pool: CandidatePool, target: TargetEmbedding,
                           kernel: Kernel, r: int, epsilon: float) -> dict:
    """Test the greedy-vs-oracle bound on one instance.

    Runs WKH and SBQ to the full pool budget, estimates the curvature
    constants from the selected-atom spectrum, evaluates the trace at

        k = ceil(r * (M_hat / m_hat) * ln(1 / epsilon))

    (capped at the trace length; the objective only keeps falling), and
    asserts  g_k <= (1 - epsilon) * g_oracle + epsilon * c + 1e-8.  The
    spectrum over the union of greedy and oracle atoms is reported next to
    the selected-atom one since the analysis constants live on supersets.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    oracle = brute_force_best_subset(pool, target, kernel, r)
    c = target.self_energy()
    bound_slack = 1e-8
    report = {
        "r": r,
        "epsilon": epsilon,
        "self_energy": c,
        "oracle": {"ids": list(oracle.ids), "mmd_sq": oracle.mmd_sq,
                   "subsets_examined": oracle.subsets_examined},
        "methods": {},
        "holds": True,
    }
    oracle_points = np.vstack([pool.point_by_id(i) for i in oracle.ids])
    for method in (Method.WKH, Method.SBQ):
        state, trace = run_greedy(method, pool, target, kernel, k=len(pool), seed=0)
        m_hat, M_hat = estimate_rsc_rss(state)
        union_rows = sorted(set(state.atom_ids) | set(oracle.ids))
        union_points = np.vstack([pool.point_by_id(i) for i in union_rows])
        m_union, M_union = _spectrum(kernel, union_points)
        k_needed = math.ceil(r * (M_hat / m_hat) * math.log(1.0 / epsilon))
        k_used = min(max(k_needed, 1), len(trace.rows))
        g_at_k = trace.rows[k_used - 1].mmd_sq
        bound = (1.0 - epsilon) * oracle.mmd_sq + epsilon * c + bound_slack
        holds = bool(g_at_k <= bound)
        report["methods"][method.value] = {
            "k_needed": k_needed,
            "k_used": k_used,
            "mmd_sq_at_k": g_at_k,
            "bound": bound,
            "m_hat": m_hat,
            "M_hat": M_hat,
            "m_hat_union": m_union,
            "M_hat_union": M_union,
            "holds": holds,
        }
        report["holds"] = report["holds"] and holds
    return report


@dataclass(frozen=True)
class RealizabilityFixture:
    name: str
    pool: CandidatePool
    target: TargetEmbedding
    kernel: Kernel
    expected_r: int


def realizability_fixtures() -> list[RealizabilityFixture]:
    """Two instances pinning the minimal exactly-representing subset size.

    ``line_segment``: a 1-d identity-feature kernel collapses every point
    to a sign, so the embedding of a discretized bell-shaped target lies in
    the span of any single atom (r = 1).

    ``two_clusters``: unit-normalized 2-d features from two angular
    clusters; the mean embedding points between the clusters, so no single
    atom's span contains it but any cross-cluster pair does (r = 2).
    """
    fixtures = []

    grid = np.linspace(-1.0, 1.0, 40).reshape(-1, 1)  # even count avoids the zero point
    kern_a = NormalizedFeatureKernel()
    dens = np.exp(-0.5 * (grid[:, 0] / 0.1) ** 2)
    target_a = DiscreteTarget(support=grid, probs=dens / dens.sum(), kernel=kern_a)
    fixtures.append(RealizabilityFixture(
        name="line_segment",
        pool=CandidatePool.from_points(grid),
        target=target_a,
        kernel=kern_a,
        expected_r=1,
    ))

    rng = np.random.default_rng(7)
    ang_a = 0.3 + 0.08 * rng.standard_normal(12)
    ang_b = 2.2 + 0.08 * rng.standard_normal(12)
    radii = 0.5 + rng.random(24)
    angles = np.concatenate([ang_a, ang_b])
    pts = radii[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])
    kern_b = NormalizedFeatureKernel()
    target_b = DiscreteTarget.uniform(pts, kern_b)
    fixtures.append(RealizabilityFixture(
        name="two_clusters",
        pool=CandidatePool.from_points(pts),
        target=target_b,
        kernel=kern_b,
        expected_r=2,
    ))
    return fixtures


def verify_realizability(fixture: RealizabilityFixture, tol: float = 1e-6) -> dict:
    """Exhaustively check that ``expected_r`` atoms are needed and enough."""
    best_single = brute_force_best_subset(fixture.pool, fixture.target, fixture.kernel, 1)
    report = {
        "name": fixture.name,
        "expected_r": fixture.expected_r,
        "best_singleton_mmd_sq": best_single.mmd_sq,
    }
    if fixture.expected_r == 1:
        report["passes"] = bool(best_single.mmd_sq <= tol)
        return report
    best_pair = brute_force_best_subset(fixture.pool, fixture.target, fixture.kernel, 2)
    report["best_pair_mmd_sq"] = best_pair.mmd_sq
    report["passes"] = bool(best_single.mmd_sq > tol and best_pair.mmd_sq <= tol)
    return report
