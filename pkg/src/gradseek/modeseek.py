"""Mode seeking on a fitted gradient model and clustering by shared mode.

With the derivative basis, setting the estimated gradient to zero gives, per
coordinate,

    x_j = sum_i theta_ij phi_i(x) c_ij / sum_i theta_ij phi_i(x),

which is iterated as a fixed-point map.  It is a weighted mean shift (uniform
``theta`` recovers plain Gaussian mean shift) and equals gradient ascent with
the adaptive step ``sigma_j^2 / sum_i theta_ij phi_i(x)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import InvalidArgument
from .estimator import GradientModel, _check_samples, predict_gradient
from .kernel import log_phi
from .selection import CLUSTER_LAMBDA_GRID, DEFAULT_GRID, CvReport, select_model

__all__ = [
    "SeekConfig",
    "SeekResult",
    "ClusterResult",
    "fixed_point_step",
    "gradient_ascent_step",
    "seek_modes",
    "iterate_points",
    "merge_modes",
    "lsldg_cluster",
]

UPDATERS = ("fixed-point", "gradient-ascent")


@dataclass(frozen=True)
class SeekConfig:
    """Stopping, merging and update-rule settings.

    ``merge_radius=None`` means one tenth of the model bandwidth (the
    space-group bandwidth for color/space kernels).  ``step`` is the
    gradient-ascent step size and is ignored by the fixed-point updater.
    """

    max_iters: int = 500
    tol: float = 1e-6
    merge_radius: float | None = None
    denominator_floor: float = 1e-12
    updater: str = "fixed-point"
    step: float | None = None
    record_trajectories: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgument("max_iters must be >= 1")
        if not self.tol > 0:
            raise InvalidArgument("tol must be positive")
        if self.merge_radius is not None and not self.merge_radius > 0:
            raise InvalidArgument("merge_radius must be positive")
        if not self.denominator_floor > 0:
            raise InvalidArgument("denominator_floor must be positive")
        if self.updater not in UPDATERS:
            raise InvalidArgument(f"unknown updater {self.updater!r}; expected one of {UPDATERS}")
        if self.updater == "gradient-ascent" and not (self.step is not None and self.step > 0):
            raise InvalidArgument("gradient ascent needs a positive step size")

    def radius_for(self, sigma: float) -> float:
        return self.merge_radius if self.merge_radius is not None else sigma / 10.0


@dataclass
class SeekResult:
    points: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    trajectories: list[np.ndarray] | None = None


@dataclass
class ClusterResult:
    """Labels are 0-based: ``modes[labels[i]]`` is sample i's mode."""

    labels: np.ndarray
    modes: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    converged_points: np.ndarray
    trajectories: list[np.ndarray] | None = None
    model: object = None
    report: CvReport | None = None
    info: dict = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return self.modes.shape[0]


def _points(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != dim:
        raise InvalidArgument(f"point dimension {x2.shape[1]} does not match model dimension {dim}")
    return x2, single


def fixed_point_step(model: GradientModel, x, denominator_floor: float = 1e-12) -> np.ndarray:
    """One fixed-point update of a point (d,) or a batch (m, d).

    The ratio is invariant to a common rescaling of ``phi``, so the weights are
    normalized by their largest value before use; points far from every
    center still move.  A coordinate whose denominator is below
    ``denominator_floor`` relative to ``sum_i |theta_ij| phi_i`` is left
    unchanged for this step.
    """
    if model.variant == "common":
        raise InvalidArgument("the fixed-point update needs the derivative basis (per-dim or shared)")
    x2, single = _points(x, model.dim)
    logw = log_phi(x2, model.kernel)
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    theta = model.theta
    num = w @ (theta * model.kernel.centers)
    den = w @ theta
    scale = w @ np.abs(theta)
    ok = np.abs(den) >= denominator_floor * scale
    ok &= scale > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(ok, num / np.where(ok, den, 1.0), x2)
    return out[0] if single else out


def gradient_ascent_step(model: GradientModel, x, eps: float) -> np.ndarray:
    if not eps > 0:
        raise InvalidArgument("step size must be positive")
    x = np.asarray(x, dtype=float)
    return x + eps * predict_gradient(model, x)


def iterate_points(step: Callable[[np.ndarray], np.ndarray], points, cfg: SeekConfig) -> SeekResult:
    """Apply ``step`` to every point until it moves less than ``cfg.tol``.

    Points are iterated independently; a point is retired as soon as its
    update moves it less than ``tol`` in the max-norm.
    """
    x = np.array(points, dtype=float)
    n = x.shape[0]
    iterations = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    traj = [[row.copy()] for row in x] if cfg.record_trajectories else None
    active = np.arange(n)
    for _ in range(cfg.max_iters):
        if active.size == 0:
            break
        new = step(x[active])
        move = np.max(np.abs(new - x[active]), axis=1)
        x[active] = new
        iterations[active] += 1
        if traj is not None:
            for i, row in zip(active, new):
                traj[i].append(row.copy())
        done = move < cfg.tol
        converged[active[done]] = True
        active = active[~done]
    trajectories = [np.array(t) for t in traj] if traj is not None else None
    return SeekResult(x, iterations, converged, trajectories)


def seek_modes(model: GradientModel, points, cfg: SeekConfig | None = None) -> SeekResult:
    cfg = cfg or SeekConfig()
    x2, _ = _points(points, model.dim)
    if cfg.updater == "fixed-point":
        def step(z):
            return fixed_point_step(model, z, cfg.denominator_floor)
    else:
        def step(z):
            return gradient_ascent_step(model, z, cfg.step)
    return iterate_points(step, x2, cfg)


def merge_modes(converged, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-linkage grouping of converged points within ``radius``.

    Returns 0-based labels, ordered by decreasing cluster size with ties
    broken by first occurrence, and each cluster's mean as its mode.
    """
    if not radius > 0:
        raise InvalidArgument("merge radius must be positive")
    x = np.atleast_2d(np.asarray(converged, dtype=float))
    n = x.shape[0]
    pairs = cKDTree(x).query_pairs(radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    k, comp = connected_components(graph, directed=False)
    sizes = np.bincount(comp, minlength=k)
    first = np.full(k, n)
    np.minimum.at(first, comp, np.arange(n))
    order = np.lexsort((first, -sizes))
    relabel = np.empty(k, dtype=np.int64)
    relabel[order] = np.arange(k)
    labels = relabel[comp]
    modes = np.zeros((k, x.shape[1]))
    np.add.at(modes, labels, x)
    modes /= sizes[order][:, None]
    return labels, modes


def cluster_from_seek(seek: SeekResult, radius: float, **extra) -> ClusterResult:
    labels, modes = merge_modes(seek.points, radius)
    return ClusterResult(labels, modes, seek.iterations, seek.converged, seek.points,
                         seek.trajectories, **extra)


def lsldg_cluster(samples, bandwidth_grid=DEFAULT_GRID, lambda_grid=CLUSTER_LAMBDA_GRID,
                  folds: int = 5, seed: int = 0, cfg: SeekConfig | None = None, *,
                  variant: str = "per-dim", center_count: int = 100) -> ClusterResult:
    """Cross-validate a gradient model, seek a mode from every sample, merge."""
    cfg = cfg or SeekConfig()
    x = _check_samples(samples)
    if x.shape[0] < 2:
        raise InvalidArgument("LSLDG clustering needs at least 2 samples")
    t0 = time.perf_counter()
    model, report = select_model(x, bandwidth_grid, lambda_grid, folds, seed,
                                 variant=variant, center_count=center_count)
    t1 = time.perf_counter()
    seek = seek_modes(model, x, cfg)
    radius = cfg.radius_for(model.kernel.merge_scale)
    result = cluster_from_seek(seek, radius, model=model, report=report)
    t2 = time.perf_counter()
    result.info.update({
        "method": "lsldg",
        "sigma": model.kernel.sigma,
        "lambda": model.lam,
        "merge_radius": radius,
        "time_select": t1 - t0,
        "time_seek": t2 - t1,
    })
    return result
