"""Command-line entry point.

Every run writes its outputs into ``--out`` (created if missing) and embeds
the fully resolved configuration, including the seed, in a JSON file next to
them.  Exit status is 0 on success, 2 on usage errors and 1 when the
pipeline fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import kde_log_gradient, kde_select_bandwidth, mean_shift_cluster
from .bench import ClusterBench, GradientBench, run_cluster_bench, run_gradient_bench, summarize
from .errors import GradseekError
from .estimator import VARIANTS
from .imageseg import read_image, read_label_matrix, segment, write_image, write_label_matrix
from .metrics import ari, mean_ari
from .modeseek import SeekConfig, lsldg_cluster
from .selection import CLUSTER_LAMBDA_GRID, DEFAULT_GRID, select_model
from .synth import PRESETS, GmmSpec, preset, sample, true_log_gradient

TASKS = ("estimate", "cluster", "segment", "bench-gradient", "bench-cluster")
METHODS = ("lsldg", "meanshift")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parsing

def _float_list(text: str) -> list[float]:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if not items:
        raise argparse.ArgumentTypeError("candidate grid is empty")
    try:
        values = [float(t) for t in items]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not all(np.isfinite(values)):
        raise argparse.ArgumentTypeError("grid values must be finite")
    return values


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradseek", description=(
        "Log-density gradient estimation, mode-seeking clustering, image "
        "segmentation and benchmark runs."))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON file whose keys set defaults for the flags below")
    p.add_argument("--task", choices=TASKS)

    data = p.add_argument_group("data")
    data.add_argument("--input", help="CSV of samples (estimate, cluster) or an image (segment)")
    data.add_argument("--spec", help="synthetic mixture: preset name (%s) or a JSON object/file"
                      % ", ".join(sorted(PRESETS)))
    data.add_argument("--dim", type=_positive_int, help="total dimension of the synthetic data")
    data.add_argument("--n", type=_positive_int, default=1000, help="synthetic sample count")
    data.add_argument("--truth", nargs="+", help="ground-truth labels: one integer per line "
                      "(cluster) or integer matrices (segment; ARI is averaged over them)")

    sel = p.add_argument_group("model selection")
    sel.add_argument("--grid-sigma", type=_float_list, help="comma-separated bandwidth candidates")
    sel.add_argument("--grid-lambda", type=_float_list, help="comma-separated ridge candidates")
    sel.add_argument("--folds", type=int, default=5)
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--centers", type=_positive_int, default=100, help="number of Gaussian centers")
    sel.add_argument("--variant", choices=VARIANTS, default="per-dim")
    sel.add_argument("--method", choices=METHODS, default="lsldg")
    sel.add_argument("--with-kde", action="store_true", help="estimate: add KDE log-gradient columns")

    seek = p.add_argument_group("mode seeking")
    seek.add_argument("--max-iters", type=_positive_int, default=500)
    seek.add_argument("--tol", type=float, default=1e-6)
    seek.add_argument("--merge-radius", type=float, default=None,
                      help="default: one tenth of the selected (spatial) bandwidth")
    seek.add_argument("--ascent-step", type=float, default=None,
                      help="use plain gradient ascent with this step instead of the fixed-point update")
    seek.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                      help="segment: standardize pixel features (default on)")
    seek.add_argument("--center-grid", type=_int_list, default=None,
                      help="segment: center grid as H,W (default 11x16 following the image orientation)")

    bench = p.add_argument_group("benchmarks")
    bench.add_argument("--dims", type=_int_list, help="comma-separated dimensions")
    bench.add_argument("--reps", type=_positive_int, default=20)
    bench.add_argument("--sweep", choices=("dim", "bandwidth", "centers"), default="dim")
    bench.add_argument("--center-counts", type=_int_list, default=[25, 50, 100, 200])

    p.add_argument("--out", default=".", help="output directory")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    first, _ = parser.parse_known_args(argv)
    if first.config:
        try:
            defaults = json.loads(Path(first.config).read_text())
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {first.config}: {exc}")
        if not isinstance(defaults, dict):
            parser.error("config file must hold a JSON object")
        known = {a.dest for a in parser._actions}
        unknown = sorted(set(k.replace("-", "_") for k in defaults) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        converted = {}
        for key, value in defaults.items():
            dest = key.replace("-", "_")
            if dest in ("grid_sigma", "grid_lambda", "dims", "center_grid", "center_counts") \
                    and isinstance(value, str):
                value = (_float_list if dest.startswith("grid") else _int_list)(value)
            converted[dest] = value
        parser.set_defaults(**converted)
    args = parser.parse_args(argv)
    if args.task is None:
        parser.error("--task is required")
    for name in ("grid_sigma", "grid_lambda"):
        value = getattr(args, name)
        if value is not None and len(value) == 0:
            parser.error(f"--{name.replace('_', '-')}: candidate grid is empty")
    if args.folds < 2:
        parser.error("--folds must be at least 2")
    if not args.tol > 0:
        parser.error("--tol must be positive")
    if args.merge_radius is not None and not args.merge_radius > 0:
        parser.error("--merge-radius must be positive")
    if args.ascent_step is not None and not args.ascent_step > 0:
        parser.error("--ascent-step must be positive")
    if args.center_grid is not None and len(args.center_grid) != 2:
        parser.error("--center-grid needs two integers H,W")
    if args.task in ("estimate", "cluster") and (args.input is None) == (args.spec is None):
        parser.error(f"--task {args.task} needs exactly one of --input or --spec")
    if args.task == "cluster" and args.truth is not None and len(args.truth) != 1:
        parser.error("--task cluster takes a single --truth file")
    if args.task == "segment" and args.input is None:
        parser.error("--task segment needs --input IMAGE")
    if args.task.startswith("bench") and args.spec is not None and args.spec not in PRESETS:
        parser.error(f"benchmarks take a preset name for --spec ({', '.join(sorted(PRESETS))})")
    return args


# ---------------------------------------------------------------- helpers

def _resolved(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "config"}
    cfg["grid_sigma"] = list(_sigma_grid(args))
    cfg["grid_lambda"] = list(_lambda_grid(args))
    cfg["version"] = __version__
    return cfg


def _sigma_grid(args):
    return tuple(args.grid_sigma) if args.grid_sigma is not None else DEFAULT_GRID


def _lambda_grid(args):
    if args.grid_lambda is not None:
        return tuple(args.grid_lambda)
    return DEFAULT_GRID if args.task in ("estimate", "bench-gradient") else CLUSTER_LAMBDA_GRID


def _seek_config(args) -> SeekConfig:
    if args.ascent_step is not None:
        return SeekConfig(max_iters=args.max_iters, tol=args.tol, merge_radius=args.merge_radius,
                          updater="gradient-ascent", step=args.ascent_step)
    return SeekConfig(max_iters=args.max_iters, tol=args.tol, merge_radius=args.merge_radius)


def _load_spec(text: str, dim: int | None) -> GmmSpec:
    if text in PRESETS:
        return preset(text, dim)
    path = Path(text)
    raw = path.read_text() if path.exists() else text
    try:
        spec = GmmSpec.from_dict(json.loads(raw))
    except ValueError as exc:
        raise UsageError(f"--spec is neither a preset nor valid JSON: {exc}") from None
    return spec if dim is None else spec.with_dim(dim)


def read_samples(path) -> np.ndarray:
    """Numeric CSV with an optional header row."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise GradseekError(f"{path}: no data rows")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    if not rows:
        raise GradseekError(f"{path}: no data rows")
    try:
        x = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise GradseekError(f"{path}: non-numeric value ({exc})") from None
    if x.ndim != 2:
        raise GradseekError(f"{path}: rows have different lengths")
    return x


def _data(args):
    if args.input is not None:
        return read_samples(args.input), None, None
    spec = _load_spec(args.spec, args.dim)
    x, labels = sample(spec, args.n, args.seed)
    return x, labels, spec


def write_matrix(path, columns: list[str], data: np.ndarray) -> None:
    np.savetxt(path, np.asarray(data, dtype=float), delimiter=",", fmt="%.17g",
               header=",".join(columns), comments="")


def _coords(prefix: str, d: int) -> list[str]:
    return [f"{prefix}{j + 1}" for j in range(d)]


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _warn(message: str) -> None:
    print(f"gradseek: warning: {message}", file=sys.stderr)


# ---------------------------------------------------------------- tasks

def cmd_estimate(args, out: Path) -> dict:
    x, _, spec = _data(args)
    model, report = select_model(x, _sigma_grid(args), _lambda_grid(args), args.folds, args.seed,
                                 variant=args.variant, center_count=args.centers)
    d = x.shape[1]
    g = model(x)
    columns, blocks = _coords("x", d) + _coords("g", d), [x, g]
    summary = {"cv": report.to_dict()}
    if spec is not None:
        truth = true_log_gradient(spec, x)
        sq = np.sum((g - truth) ** 2, axis=1)
        columns += _coords("true", d) + ["sq_error"]
        blocks += [truth, sq[:, None]]
        summary["mse"] = float(sq.mean())
    if args.with_kde:
        kde, kde_report = kde_select_bandwidth(x, _sigma_grid(args), args.folds, args.seed)
        columns += _coords("kde", d)
        blocks.append(kde_log_gradient(kde, x))
        summary["kde_cv"] = kde_report.to_dict()
        if spec is not None:
            summary["kde_mse"] = float(np.mean(np.sum((blocks[-1] - truth) ** 2, axis=1)))
    write_matrix(out / "gradients.csv", columns, np.hstack(blocks))
    return summary


def _read_labels(path, n: int) -> np.ndarray:
    labels = read_label_matrix(path).ravel()
    if labels.size != n:
        raise GradseekError(f"{path}: {labels.size} labels for {n} samples")
    return labels


def cmd_cluster(args, out: Path) -> dict:
    x, truth, _ = _data(args)
    if args.truth is not None:
        truth = _read_labels(args.truth[0], x.shape[0])
    cfg = _seek_config(args)
    t0 = time.perf_counter()
    if x.shape[0] == 1:
        _warn("only one sample; returning a single cluster")
        labels, modes = np.zeros(1, dtype=np.int64), x.copy()
        iterations, converged, info, report = np.zeros(1, dtype=np.int64), np.ones(1, bool), {}, None
    else:
        if args.method == "lsldg":
            result = lsldg_cluster(x, _sigma_grid(args), _lambda_grid(args), args.folds, args.seed,
                                   cfg, variant=args.variant, center_count=args.centers)
        else:
            result = mean_shift_cluster(x, _sigma_grid(args), args.folds, args.seed, cfg)
        labels, modes = result.labels, result.modes
        iterations, converged, info, report = result.iterations, result.converged, result.info, result.report
    wall = time.perf_counter() - t0
    d = x.shape[1]
    np.savetxt(out / "labels.csv", labels, fmt="%d", header="label", comments="")
    write_matrix(out / "modes.csv", _coords("x", d), modes)
    return {
        "method": args.method,
        "k": int(modes.shape[0]),
        "ari": None if truth is None else ari(truth, labels),
        "iterations": {"max": int(iterations.max()), "median": float(np.median(iterations)),
                       "mean": float(iterations.mean())},
        "converged_fraction": float(np.mean(converged)),
        "sigma": info.get("sigma"),
        "lambda": info.get("lambda"),
        "merge_radius": info.get("merge_radius"),
        "wall_time": wall,
        "cv": None if report is None else report.to_dict(),
    }


def cmd_segment(args, out: Path) -> dict:
    image = read_image(args.input)
    grid = tuple(args.center_grid) if args.center_grid is not None else None
    result = segment(image, _sigma_grid(args), _lambda_grid(args), args.folds, args.seed,
                     _seek_config(args), normalize=args.normalize, center_grid=grid)
    suffix = ".png" if Path(args.input).suffix.lower() == ".png" else ".ppm"
    write_image(out / f"smoothed{suffix}", result.smoothed)
    write_label_matrix(out / "labels.txt", result.labels)
    summary = result.summary()
    if args.truth is not None:
        truths = [read_label_matrix(path) for path in args.truth]
        for path, truth in zip(args.truth, truths):
            if truth.shape != result.labels.shape:
                raise GradseekError(f"{path}: shape {truth.shape} != image shape {result.labels.shape}")
        summary["ari_per_truth"] = [ari(t, result.labels) for t in truths]
        summary["ari"] = mean_ari(result.labels, truths)
    summary["cv"] = result.cluster.report.to_dict()
    return summary


def _write_rows(path, rows: list[dict]) -> None:
    keys = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for r in rows:
            writer.writerow([_cell(r.get(k)) for k in keys])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, tuple):
        return ";".join("%.17g" % s for s in v)
    return v


def cmd_bench_gradient(args, out: Path) -> dict:
    bench = GradientBench(spec=args.spec or "gauss", dims=tuple(args.dims or (1, 2, 4, 6, 8)),
                          reps=args.reps, n=args.n, bandwidth_grid=_sigma_grid(args),
                          lambda_grid=_lambda_grid(args), folds=args.folds, seed=args.seed,
                          variant=args.variant, center_count=args.centers)
    rows = run_gradient_bench(bench)
    _write_rows(out / "rows.csv", rows)
    return {"bench": bench.to_dict(), "summary": summarize(rows)}


def cmd_bench_cluster(args, out: Path) -> dict:
    bench = ClusterBench(spec=args.spec or "gmm3", dims=tuple(args.dims or (2, 4, 6, 8)),
                         reps=args.reps, n=args.n, bandwidth_grid=_sigma_grid(args),
                         lambda_grid=_lambda_grid(args), folds=args.folds, seed=args.seed,
                         variant=args.variant, center_count=args.centers, sweep=args.sweep,
                         center_counts=tuple(args.center_counts), seek=_seek_config(args))
    rows = run_cluster_bench(bench)
    _write_rows(out / "rows.csv", rows)
    by = ("method", "d") if bench.sweep == "dim" else ("method", "d", "setting")
    return {"bench": bench.to_dict(), "summary": summarize(rows, by)}


COMMANDS = {
    "estimate": cmd_estimate,
    "cluster": cmd_cluster,
    "segment": cmd_segment,
    "bench-gradient": cmd_bench_gradient,
    "bench-cluster": cmd_bench_cluster,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.task](args, out)
    except UsageError as exc:
        print(f"gradseek: error: {exc}", file=sys.stderr)
        return 2
    except (GradseekError, OSError) as exc:
        print(f"gradseek: error: {exc}", file=sys.stderr)
        return 1
    summary["config"] = _resolved(args)
    summary["seed"] = args.seed
    _write_json(out / "summary.json", summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
