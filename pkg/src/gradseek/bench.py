"""Repeated-run benchmarks for gradient accuracy and clustering quality.

Every repetition gets its own seed from :func:`gradseek.rng.sub_seed`, so runs
are independent of scheduling and can execute on a thread pool whose size is
capped by the ``GRADSEEK_THREADS`` environment variable (default 1).  Rows
are always returned in task order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import kde_select_bandwidth, mean_shift_cluster
from .errors import GradientUndefined, InvalidArgument
from .metrics import ari, gradient_mse
from .modeseek import SeekConfig, lsldg_cluster
from .rng import sub_seed
from .selection import CLUSTER_LAMBDA_GRID, DEFAULT_GRID, select_model
from .synth import preset, sample, true_log_gradient

__all__ = [
    "GradientBench",
    "ClusterBench",
    "run_gradient_bench",
    "run_cluster_bench",
    "summarize",
    "worker_count",
]

GRADIENT_METHODS = ("lsldg", "kde")
CLUSTER_METHODS = ("lsldg", "meanshift")
SWEEPS = ("dim", "bandwidth", "centers")


def worker_count() -> int:
    raw = os.environ.get("GRADSEEK_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise InvalidArgument(f"GRADSEEK_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


def _run_all(job, tasks: list) -> list:
    workers = min(worker_count(), max(1, len(tasks)))
    if workers == 1:
        return [job(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, tasks))


@dataclass(frozen=True)
class GradientBench:
    """Gradient MSE of LSLDG and the KDE log-gradient on fresh test draws."""

    spec: str = "gauss"
    dims: tuple[int, ...] = (1, 2, 4, 6, 8)
    reps: int = 20
    n: int = 1000
    n_test: int = 1000
    bandwidth_grid: tuple[float, ...] = DEFAULT_GRID
    lambda_grid: tuple[float, ...] = DEFAULT_GRID
    folds: int = 5
    seed: int = 0
    variant: str = "per-dim"
    center_count: int = 100
    methods: tuple[str, ...] = GRADIENT_METHODS

    def __post_init__(self):
        _validate_common(self.dims, self.reps, self.methods, GRADIENT_METHODS)

    def to_dict(self) -> dict:
        return _plain(asdict(self))


@dataclass(frozen=True)
class ClusterBench:
    """ARI and wall time of LSLDG clustering and Gaussian mean shift.

    ``sweep`` selects what varies: ``dim`` runs every entry of ``dims`` with
    the full bandwidth grid; ``bandwidth`` fixes each grid bandwidth in turn
    (lambda still cross-validated) at ``dims[0]``; ``centers`` varies the
    LSLDG center count over ``center_counts`` at ``dims[0]``.
    """

    spec: str = "gmm3"
    dims: tuple[int, ...] = (2, 4, 6, 8)
    reps: int = 20
    n: int = 1000
    bandwidth_grid: tuple[float, ...] = DEFAULT_GRID
    lambda_grid: tuple[float, ...] = CLUSTER_LAMBDA_GRID
    folds: int = 5
    seed: int = 0
    variant: str = "per-dim"
    center_count: int = 100
    methods: tuple[str, ...] = CLUSTER_METHODS
    sweep: str = "dim"
    center_counts: tuple[int, ...] = (25, 50, 100, 200)
    seek: SeekConfig = field(default_factory=SeekConfig)

    def __post_init__(self):
        _validate_common(self.dims, self.reps, self.methods, CLUSTER_METHODS)
        if self.sweep not in SWEEPS:
            raise InvalidArgument(f"unknown sweep {self.sweep!r}; expected one of {SWEEPS}")

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _validate_common(dims, reps, methods, known):
    if not dims or any(int(d) < 1 for d in dims):
        raise InvalidArgument("dims must be a non-empty list of positive integers")
    if reps < 1:
        raise InvalidArgument("reps must be >= 1")
    bad = [m for m in methods if m not in known]
    if bad or not methods:
        raise InvalidArgument(f"unknown methods {bad}; expected a subset of {known}")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------- gradient

def _gradient_task(bench: GradientBench, d: int, rep: int) -> list[dict]:
    spec = preset(bench.spec, d)
    seed = sub_seed(bench.seed, d, rep)
    x, _ = sample(spec, bench.n, seed)
    test, _ = sample(spec, bench.n_test, seed, purpose="test")

    def truth(z):
        return true_log_gradient(spec, z)

    rows = []
    for method in bench.methods:
        t0 = time.perf_counter()
        if method == "lsldg":
            model, report = select_model(x, bench.bandwidth_grid, bench.lambda_grid,
                                         bench.folds, seed, variant=bench.variant,
                                         center_count=bench.center_count)
            sigma, lam = report.best.sigma, report.best.lam
        else:
            model, report = kde_select_bandwidth(x, bench.bandwidth_grid, bench.folds, seed)
            sigma, lam = report.best.sigma, None
        try:
            value = gradient_mse(model, truth, test)
        except GradientUndefined:
            value = float("nan")
        rows.append({"method": method, "d": d, "rep": rep, "seed": seed, "metric": "mse",
                     "value": value, "sigma": sigma, "lambda": lam,
                     "time": time.perf_counter() - t0})
    return rows


def run_gradient_bench(bench: GradientBench) -> list[dict]:
    tasks = [(d, r) for d in bench.dims for r in range(bench.reps)]
    chunks = _run_all(lambda t: _gradient_task(bench, *t), tasks)
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------- clustering

def _cluster_task(bench: ClusterBench, d: int, rep: int, setting) -> list[dict]:
    spec = preset(bench.spec, d)
    seed = sub_seed(bench.seed, d, rep)
    x, truth = sample(spec, bench.n, seed)
    grid = bench.bandwidth_grid if bench.sweep != "bandwidth" else (setting,)
    rows = []
    for method in bench.methods:
        if method == "meanshift" and bench.sweep == "centers":
            continue
        t0 = time.perf_counter()
        if method == "lsldg":
            count = setting if bench.sweep == "centers" else bench.center_count
            result = lsldg_cluster(x, grid, bench.lambda_grid, bench.folds, seed, bench.seek,
                                   variant=bench.variant, center_count=count)
        else:
            result = mean_shift_cluster(x, grid, bench.folds, seed, bench.seek)
        elapsed = time.perf_counter() - t0
        rows.append({"method": method, "d": d, "rep": rep, "seed": seed, "metric": "ari",
                     "value": ari(truth, result.labels), "setting": setting,
                     "k": result.n_clusters, "sigma": result.info.get("sigma"),
                     "lambda": result.info.get("lambda"),
                     "iterations_max": int(result.iterations.max()),
                     "converged_fraction": float(np.mean(result.converged)),
                     "time": elapsed})
    return rows


def run_cluster_bench(bench: ClusterBench) -> list[dict]:
    if bench.sweep == "dim":
        tasks = [(d, r, None) for d in bench.dims for r in range(bench.reps)]
    elif bench.sweep == "bandwidth":
        tasks = [(bench.dims[0], r, float(s)) for s in bench.bandwidth_grid for r in range(bench.reps)]
    else:
        tasks = [(bench.dims[0], r, int(b)) for b in bench.center_counts for r in range(bench.reps)]
    chunks = _run_all(lambda t: _cluster_task(bench, *t), tasks)
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------- summary

def summarize(rows: list[dict], by=("method", "d")) -> list[dict]:
    """Median, quartiles, mean and standard deviation of ``value`` per group.

    NaN values (undefined metrics) are excluded and counted in ``n_nan``.
    Groups appear in order of first occurrence.
    """
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault(tuple(row.get(k) for k in by), []).append(float(row["value"]))
    out = []
    for key, values in groups.items():
        v = np.asarray(values)
        ok = v[np.isfinite(v)]
        entry = dict(zip(by, key))
        entry["metric"] = next(r["metric"] for r in rows if tuple(r.get(k) for k in by) == key)
        entry["n"] = int(ok.size)
        entry["n_nan"] = int(v.size - ok.size)
        if ok.size:
            q1, med, q3 = np.percentile(ok, [25, 50, 75])
            entry.update(median=float(med), q1=float(q1), q3=float(q3),
                         mean=float(ok.mean()), std=float(ok.std(ddof=1)) if ok.size > 1 else 0.0)
        else:
            entry.update(median=None, q1=None, q3=None, mean=None, std=None)
        out.append(entry)
    return out
