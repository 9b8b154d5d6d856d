"""Command-line harness: seeded experiments with reproducible artifacts.

Three subcommands:

* ``herdquad mixture``    squared-MMD traces of every method on a random
                          Gaussian mixture (single machine and distributed),
* ``herdquad summarize``  logistic-model data summarization on synthetic
                          blobs or an ingested dataset,
* ``herdquad diagnose``   the empirical checks as a machine-readable report.

All artifacts are written atomically (temp file + rename) with
full-precision floats, and a re-run with the same config byte-reproduces
them; wall-clock columns are zeroed unless ``timing = on`` is requested,
because real timings would break that reproducibility.  Environment
variables: HERDQUAD_OUT (default output directory) and HERDQUAD_THREADS
(default thread count).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import (
    ConfigError,
    DiagnoseConfig,
    MixtureConfig,
    SummarizeConfig,
    build_config,
    parse_kv_file,
)
from .datasets import IngestError, load_dataset, split_dataset, synthetic_blob_dataset
from .diagnostics import (
    InsufficientPoints,
    check_approx_guarantee,
    fit_rate,
    orthogonality_residual,
    realizability_fixtures,
    verify_realizability,
)
from .distributed import run_distributed
from .kernels import CandidatePool, RBFKernel
from .selectors import RunTrace, TraceRow, run_greedy
from .summarization import BothClassesRequired, summarize
from .targets import DiscreteTarget, GaussianMixtureTarget

SCHEMA_VERSION = 1
TRACE_COLUMNS = ["method", "s", "seed", "iteration", "chosen_id", "g", "elapsed_ms"]
SUMMARIZE_COLUMNS = ["method", "s", "k", "seed", "g_final", "test_nll"]


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def fmt(value: float) -> str:
    """Shortest decimal that round-trips the float exactly."""
    return repr(float(value))


def median_bandwidth(points: np.ndarray, seed: int = 0, cap: int = 500) -> float:
    """Median pairwise distance over a subsample of at most ``cap`` points."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] > cap:
        rows = np.random.default_rng(seed).choice(pts.shape[0], size=cap, replace=False)
        pts = pts[rows]
    diffs = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt(np.sum(diffs**2, axis=-1))
    upper = d[np.triu_indices(pts.shape[0], k=1)]
    med = float(np.median(upper))
    if med <= 0:
        raise ValueError("median pairwise distance is zero; specify a bandwidth")
    return med


def sample_mixture_params(rng: np.random.Generator, components: int, dim: int,
                          mean_low: float, mean_high: float, cov_low: float,
                          cov_high: float, alpha: float):
    weights = rng.dirichlet(np.full(components, alpha))
    means = rng.uniform(mean_low, mean_high, size=(components, dim))
    diag = rng.uniform(cov_low, cov_high, size=(components, dim))
    covs = np.stack([np.diag(d) for d in diag])
    return weights, means, covs


def trace_rows_for_csv(method: str, s: int, seed: int, trace: RunTrace,
                       timing: bool) -> list[list]:
    rows = []
    for r in trace.rows:
        g = max(r.mmd_sq, 0.0)  # clamp tiny negative round-off in reports only
        ms = r.elapsed_ms if timing else 0.0
        rows.append([method, s, seed, r.iteration, r.chosen_id, fmt(g), fmt(ms)])
    return rows


def read_trace_csv(path: str) -> list[RunTrace]:
    """Re-ingest a trace CSV into one RunTrace per (method, s, seed) group."""
    groups: dict[tuple, RunTrace] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRACE_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing trace columns {sorted(missing)}")
        for row in reader:
            key = (row["method"], int(row["s"]), int(row["seed"]))
            trace = groups.setdefault(key, RunTrace(method=row["method"], seed=int(row["seed"])))
            trace.rows.append(TraceRow(
                iteration=int(row["iteration"]), chosen_id=int(row["chosen_id"]),
                mmd_sq=float(row["g"]), delta=float("nan"), score=float("nan"),
                elapsed_ms=float(row["elapsed_ms"])))
    return list(groups.values())


def _mixture_single_run(cfg: MixtureConfig, method: str, s: int, seed: int):
    rng = np.random.default_rng(seed)
    weights, means, covs = sample_mixture_params(
        rng, cfg.components, cfg.dim, cfg.mean_low, cfg.mean_high,
        cfg.cov_low, cfg.cov_high, cfg.dirichlet_alpha)
    probe = GaussianMixtureTarget(weights, means, covs, RBFKernel(1.0))
    pool_points = probe.sample(cfg.pool_size, rng)
    bw = cfg.bandwidth if isinstance(cfg.bandwidth, float) else median_bandwidth(pool_points, seed=seed)
    kernel = RBFKernel(bw)
    if cfg.target_form == "continuous":
        target = GaussianMixtureTarget(weights, means, covs, kernel)
    else:
        target = DiscreteTarget.uniform(pool_points, kernel)
    pool = CandidatePool.from_points(pool_points)
    if s == 1:
        _, trace = run_greedy(method, pool, target, kernel, cfg.k, seed=seed)
        extra = {}
    else:
        result = run_distributed(method, pool, target, kernel, cfg.k, s, seed)
        trace = result.traces[result.winner_index]
        extra = {"solution_g": [sol.mmd_sq for sol in result.solutions],
                 "winner": result.winner.label}
    record = {"method": method, "s": s, "seed": seed, "bandwidth": bw,
              "final_g": float(trace.final_mmd_sq), "n_iterations": len(trace.rows),
              "stop_reason": trace.stop_reason}
    record.update(extra)
    try:
        rf = fit_rate(trace)
        record["rate"] = {"slope": rf.slope, "intercept": rf.intercept,
                          "r_squared": rf.r_squared, "n_points": rf.n_points}
    except InsufficientPoints:
        record["rate"] = None
    return trace, record


def cmd_mixture(cfg: MixtureConfig) -> int:
    tasks = [(method, s, seed) for method, s in cfg.methods for seed in cfg.seeds]

    def job(task):
        method, s, seed = task
        return task, _mixture_single_run(cfg, method, s, seed)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = dict(ex.map(job, tasks))
    else:
        results = dict(map(job, tasks))

    records = []
    for method, s in cfg.methods:
        rows = []
        for seed in cfg.seeds:
            trace, record = results[(method, s, seed)]
            rows.extend(trace_rows_for_csv(method, s, seed, trace, cfg.timing))
            records.append(record)
        path = os.path.join(cfg.out, f"trace_{method.lower()}_s{s}.csv")
        write_csv(path, TRACE_COLUMNS, rows)

    records.sort(key=lambda r: (r["method"], r["s"], r["seed"]))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "mixture",
        "config": {
            "methods": [[m, s] for m, s in cfg.methods], "k": cfg.k,
            "seeds": list(cfg.seeds), "pool_size": cfg.pool_size,
            "components": cfg.components, "dim": cfg.dim,
            "mean_range": [cfg.mean_low, cfg.mean_high],
            "cov_range": [cfg.cov_low, cfg.cov_high],
            "dirichlet_alpha": cfg.dirichlet_alpha,
            "bandwidth": cfg.bandwidth if isinstance(cfg.bandwidth, float) else "median",
            "target_form": cfg.target_form,
        },
        "runs": records,
    }
    write_json(os.path.join(cfg.out, "mixture_summary.json"), summary)
    print(f"mixture: wrote {len(cfg.methods)} trace files and mixture_summary.json to {cfg.out}")
    return 0


def cmd_summarize(cfg: SummarizeConfig) -> int:
    if cfg.dataset == "blobs":
        data = synthetic_blob_dataset(n=cfg.n, dim=cfg.dim, seed=min(cfg.seeds),
                                      val_fraction=cfg.val_fraction,
                                      test_fraction=cfg.test_fraction,
                                      separation=cfg.separation, spread=cfg.spread)
    else:
        X, y = load_dataset(cfg.dataset)
        data = split_dataset(X, y, val_fraction=cfg.val_fraction,
                             test_fraction=cfg.test_fraction, seed=min(cfg.seeds))

    tasks = [(method, s, k, seed) for method, s in cfg.methods
             for k in cfg.k_grid for seed in cfg.seeds]

    def job(task):
        method, s, k, seed = task
        return task, summarize(data, method, k, s=s, lam=cfg.lam, seed=seed,
                               weighted_retrain=cfg.weighted_retrain)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = dict(ex.map(job, tasks))
    else:
        results = dict(map(job, tasks))

    rows, records = [], []
    trace_rows: dict[int, list] = {k: [] for k in cfg.k_grid}
    n_train = int(np.sum(data.split == "train"))
    for method, s, k, seed in tasks:
        rep = results[(method, s, k, seed)]
        rows.append([method, s, k, seed, fmt(max(rep.final_mmd_sq, 0.0)), fmt(rep.test_nll)])
        rows.append(["RANDOM", 1, k, seed, "", fmt(rep.random_nll)])
        trace_rows[k].extend(trace_rows_for_csv(method, s, seed, rep.trace, cfg.timing))
        records.append({"method": method, "s": s, "k": k, "seed": seed,
                        "g_final": rep.final_mmd_sq, "test_nll": rep.test_nll,
                        "random_nll": rep.random_nll, "full_nll": rep.full_nll,
                        "n_degenerate": rep.n_degenerate})
    first = results[tasks[0]]
    rows.append(["FULL", 1, n_train, min(cfg.seeds), "", fmt(first.full_nll)])

    # one row per grid cell plus the baselines, deduplicated and ordered
    seen = set()
    unique_rows = []
    for row in rows:
        key = tuple(row)
        if key not in seen:
            seen.add(key)
            unique_rows.append(row)
    unique_rows.sort(key=lambda r: (r[0], int(r[1]), int(r[2]), int(r[3])))

    write_csv(os.path.join(cfg.out, "summarize.csv"), SUMMARIZE_COLUMNS, unique_rows)
    for k in cfg.k_grid:
        write_csv(os.path.join(cfg.out, f"summarize_traces_k{k}.csv"),
                  TRACE_COLUMNS, trace_rows[k])
    records.sort(key=lambda r: (r["method"], r["s"], r["k"], r["seed"]))
    write_json(os.path.join(cfg.out, "summarize_summary.json"), {
        "schema_version": SCHEMA_VERSION,
        "experiment": "summarize",
        "config": {
            "methods": [[m, s] for m, s in cfg.methods], "k_grid": list(cfg.k_grid),
            "seeds": list(cfg.seeds), "dataset": cfg.dataset, "n": cfg.n,
            "dim": cfg.dim, "lambda": cfg.lam,
            "val_fraction": cfg.val_fraction, "test_fraction": cfg.test_fraction,
            "weighted_retrain": cfg.weighted_retrain,
        },
        "runs": records,
    })
    print(f"summarize: wrote summarize.csv, per-budget trace files and "
          f"summarize_summary.json to {cfg.out}")
    return 0


DIAGNOSE_CHECKS = ["realizability:line_segment", "realizability:two_clusters",
                   "rate_fit", "approx_guarantee", "orthogonality"]


def _diagnose_payload(inject_fault: bool = False) -> dict:
    rng = np.random.default_rng(11)
    checks = []

    for fixture in realizability_fixtures():
        rep = verify_realizability(fixture)
        checks.append({"name": f"realizability:{fixture.name}", "passes": rep.pop("passes"),
                       "details": rep})

    # log-linear decay of the optimal-weight methods on a generic instance
    pts = rng.standard_normal((80, 2))
    kernel = RBFKernel(1.0)
    target = DiscreteTarget.uniform(pts, kernel)
    pool = CandidatePool.from_points(pts)
    rate_details = {}
    rate_ok = True
    for method in ("WKH", "SBQ"):
        _, trace = run_greedy(method, pool, target, kernel, k=12, seed=0)
        rf = fit_rate(trace)
        ok = rf.slope < 0 and rf.r_squared >= 0.9
        rate_ok = rate_ok and ok
        rate_details[method] = {"slope": rf.slope, "r_squared": rf.r_squared,
                                "n_points": rf.n_points}
    checks.append({"name": "rate_fit", "passes": rate_ok, "details": rate_details})

    inst = rng.standard_normal((10, 2))
    kern2 = RBFKernel(1.0)
    target2 = DiscreteTarget.uniform(inst, kern2)
    pool2 = CandidatePool.from_points(inst)
    guarantee = check_approx_guarantee(pool2, target2, kern2, r=2, epsilon=0.1)
    checks.append({"name": "approx_guarantee", "passes": guarantee.pop("holds"),
                   "details": guarantee})

    state, _ = run_greedy("WKH", pool2, target2, kern2, k=6, seed=0)
    if inject_fault:
        state.weights = state.weights + 1e-3  # deliberately break optimality
    resid = orthogonality_residual(state)
    checks.append({"name": "orthogonality", "passes": bool(resid <= 1e-8),
                   "details": {"max_residual": resid, "fault_injected": inject_fault}})

    return {"schema_version": SCHEMA_VERSION, "experiment": "diagnose",
            "checks": checks, "all_pass": all(c["passes"] for c in checks)}


def cmd_diagnose(cfg: DiagnoseConfig, list_only: bool = False, inject_fault: bool = False) -> int:
    if list_only:
        for name in DIAGNOSE_CHECKS:
            print(name)
        return 0
    payload = _diagnose_payload(inject_fault=inject_fault)
    write_json(os.path.join(cfg.out, "diagnose_report.json"), payload)
    for check in payload["checks"]:
        print(f"{'PASS' if check['passes'] else 'FAIL'} {check['name']}")
    if not payload["all_pass"]:
        failing = [c["name"] for c in payload["checks"] if not c["passes"]]
        print(f"diagnose: failing checks: {', '.join(failing)}", file=sys.stderr)
        return 1
    print(f"diagnose: all checks passed; report in {cfg.out}/diagnose_report.json")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="herdquad",
                                     description="Greedy kernel quadrature experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("mixture", "summarize", "diagnose"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="override: run this single seed")
        p.add_argument("--k", type=int, help="override: selection budget")
        p.add_argument("--workers", type=int, help="override: distributed worker count")
        p.add_argument("--method", help="override: run this single method (e.g. WKH or WKH:5)")
        p.add_argument("--out", help="override: output directory")
        p.add_argument("--threads", type=int, help="override: thread count for seed grids")
        if name == "diagnose":
            p.add_argument("--list", action="store_true", help="print check names and exit")
            p.add_argument("--inject-fault", action="store_true",
                           help="corrupt weights before the orthogonality audit (self-test)")
    return parser


_CONFIG_CLASSES = {"mixture": MixtureConfig, "summarize": SummarizeConfig,
                   "diagnose": DiagnoseConfig}


def _assemble_config(args) -> object:
    mapping = parse_kv_file(args.config) if args.config else {}
    takes_grid = args.command in ("mixture", "summarize")
    if takes_grid:
        if args.seed is not None:
            mapping["seeds"] = [args.seed]
        if args.k is not None:
            if args.command == "summarize":
                mapping["k_grid"] = [args.k]
            else:
                mapping["k"] = str(args.k)
        if args.workers is not None:
            mapping["workers"] = str(args.workers)
        if args.method is not None:
            mapping["methods"] = args.method
    if args.out is not None:
        mapping["out"] = args.out
    elif "out" not in mapping and os.environ.get("HERDQUAD_OUT"):
        mapping["out"] = os.environ["HERDQUAD_OUT"]
    if args.threads is not None:
        mapping["threads"] = str(args.threads)
    elif "threads" not in mapping and os.environ.get("HERDQUAD_THREADS"):
        mapping["threads"] = os.environ["HERDQUAD_THREADS"]
    return build_config(_CONFIG_CLASSES[args.command], mapping)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _assemble_config(args)
        if args.command == "mixture":
            return cmd_mixture(cfg)
        if args.command == "summarize":
            return cmd_summarize(cfg)
        return cmd_diagnose(cfg, list_only=getattr(args, "list", False),
                            inject_fault=getattr(args, "inject_fault", False))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IngestError as exc:
        print(f"ingest error: {exc}", file=sys.stderr)
        return 2
    except BothClassesRequired as exc:
        print(f"summarize error: {exc} (try a larger k or lower dim)", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
