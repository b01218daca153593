"""Gaussian KDE and Gaussian mean shift, evaluated in the log domain."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import GradientUndefined, InvalidArgument, SelectionFailed
from .estimator import _check_samples
from .kernel import scaled_sqdist
from .modeseek import ClusterResult, SeekConfig, cluster_from_seek, iterate_points
from .selection import DEFAULT_GRID, CvCandidate, CvReport, _argmin, kfold_split

__all__ = [
    "KdeModel",
    "kde_log_density",
    "kde_density",
    "kde_log_gradient",
    "kde_select_bandwidth",
    "mean_shift_step",
    "mean_shift_cluster",
    "LOG_DENSITY_FLOOR",
]

# Below this log-density the KDE gradient is reported as undefined.
LOG_DENSITY_FLOOR = -1e5

_CHUNK = 2_000_000


@dataclass(frozen=True)
class KdeModel:
    points: np.ndarray
    sigma: float

    def __post_init__(self):
        pts = _check_samples(self.points).copy()
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidArgument(f"bandwidth must be positive, got {self.sigma}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __call__(self, x):
        return kde_log_gradient(self, x)


def _as_batch(model: KdeModel, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != model.dim:
        raise InvalidArgument(f"point dimension {x2.shape[1]} != KDE dimension {model.dim}")
    return x2, single


def _chunks(m: int, n: int):
    step = max(1, _CHUNK // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def _log_kernel(model: KdeModel, x2: np.ndarray) -> np.ndarray:
    s = model.sigma
    return -0.5 * scaled_sqdist(x2 / s, model.points / s)


def kde_log_density(model: KdeModel, x):
    x2, single = _as_batch(model, x)
    n, d = model.points.shape
    const = -np.log(n) - 0.5 * d * np.log(2 * np.pi * model.sigma ** 2)
    out = np.empty(x2.shape[0])
    for sl in _chunks(x2.shape[0], n):
        out[sl] = logsumexp(_log_kernel(model, x2[sl]), axis=1) + const
    return float(out[0]) if single else out


def kde_density(model: KdeModel, x):
    return np.exp(kde_log_density(model, x))


def kde_log_gradient(model: KdeModel, x) -> np.ndarray:
    """``sum_i w_i(x) (x_i - x) / sigma^2`` with softmax weights ``w``."""
    x2, single = _as_batch(model, x)
    n = model.points.shape[0]
    out = np.empty_like(x2)
    for sl in _chunks(x2.shape[0], n):
        logk = _log_kernel(model, x2[sl])
        lse = logsumexp(logk, axis=1, keepdims=True)
        if np.any(lse < LOG_DENSITY_FLOOR):
            raise GradientUndefined("KDE density underflows: point is too far from the data")
        w = np.exp(logk - lse)
        out[sl] = (w @ model.points - x2[sl]) / model.sigma ** 2
    return out[0] if single else out


def kde_select_bandwidth(samples, grid=DEFAULT_GRID, folds: int = 5,
                         seed: int = 0) -> tuple[KdeModel, CvReport]:
    """Likelihood cross-validation; scores are mean held-out negative log-likelihoods."""
    x = _check_samples(samples)
    grid = [float(s) for s in grid]
    if not grid:
        raise InvalidArgument("bandwidth grid is empty")
    split = kfold_split(x.shape[0], folds, seed)
    mask = np.ones(x.shape[0], dtype=bool)
    candidates = []
    for sigma in grid:
        scores = []
        for hold in split:
            mask[:] = True
            mask[hold] = False
            ll = kde_log_density(KdeModel(x[mask], sigma), x[hold])
            s = -float(np.mean(ll))
            scores.append(s if np.isfinite(s) else np.inf)
        mean = float(np.mean(scores)) if np.all(np.isfinite(scores)) else np.inf
        candidates.append(CvCandidate(sigma, None, mean, tuple(scores)))
    report = CvReport(candidates, _argmin(candidates), folds, seed, "neg-log-likelihood")
    if not np.isfinite(report.best.score):
        raise SelectionFailed("held-out likelihood is zero for every bandwidth", report)
    return KdeModel(x, report.best.sigma), report


def mean_shift_step(centers, sigma: float, x) -> np.ndarray:
    """Gaussian-weighted mean of ``centers`` seen from each point of ``x``.

    Weights are normalized in the log domain.  A point whose weights are all
    zero even there (non-finite exponents) is returned unchanged.
    """
    if not sigma > 0:
        raise InvalidArgument("bandwidth must be positive")
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != c.shape[1]:
        raise InvalidArgument("point and center dimensions differ")
    out = np.empty_like(x2)
    for sl in _chunks(x2.shape[0], c.shape[0]):
        logw = -0.5 * scaled_sqdist(x2[sl] / sigma, c / sigma)
        top = logw.max(axis=1, keepdims=True)
        w = np.exp(logw - top)
        total = w.sum(axis=1, keepdims=True)
        ok = np.isfinite(top[:, 0]) & (total[:, 0] > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            shifted = (w @ c) / total
        out[sl] = np.where(ok[:, None], shifted, x2[sl])
    return out[0] if single else out


def mean_shift_cluster(samples, grid=DEFAULT_GRID, folds: int = 5, seed: int = 0,
                       cfg: SeekConfig | None = None) -> ClusterResult:
    """Likelihood-CV bandwidth, mean shift from every sample, single-linkage merge."""
    cfg = cfg or SeekConfig()
    x = _check_samples(samples)
    t0 = time.perf_counter()
    if x.shape[0] == 1:
        labels = np.zeros(1, dtype=np.int64)
        return ClusterResult(labels, x.copy(), np.zeros(1, dtype=np.int64), np.ones(1, dtype=bool),
                             x.copy(), info={"method": "meanshift", "sigma": None})
    model, report = kde_select_bandwidth(x, grid, folds, seed)
    t1 = time.perf_counter()
    seek = iterate_points(lambda z: mean_shift_step(x, model.sigma, z), x, cfg)
    radius = cfg.radius_for(model.sigma)
    result = cluster_from_seek(seek, radius, model=model, report=report)
    t2 = time.perf_counter()
    result.info.update({
        "method": "meanshift",
        "sigma": model.sigma,
        "lambda": None,
        "merge_radius": radius,
        "time_select": t1 - t0,
        "time_seek": t2 - t1,
    })
    return result
