"""K-fold cross-validation of bandwidth and ridge weight."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import IllConditioned, InvalidArgument, SelectionFailed
from .estimator import (
    VARIANTS,
    FitConfig,
    GradientModel,
    LinearSystem,
    _check_samples,
    fit,
    gram_per_dim,
    objective,
    center_indices,
    solve_system,
)
from .kernel import KernelConfig, eval_basis
from .rng import stream

__all__ = [
    "DEFAULT_GRID",
    "CLUSTER_LAMBDA_GRID",
    "CvCandidate",
    "CvReport",
    "kfold_split",
    "holdout_score",
    "select_model",
    "expand_bandwidth_grid",
]

DEFAULT_GRID = tuple(10.0 ** e for e in (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0))

# Ridge grid for mode-seeking clustering.  Above d=2 the CV optimum sits below
# 1e-2 and clamping it there oversmooths the surrogate into a single mode.
CLUSTER_LAMBDA_GRID = tuple(10.0 ** (e / 2.0) for e in range(-10, 3))


@dataclass(frozen=True)
class CvCandidate:
    sigma: float | tuple[float, ...]
    lam: float | None
    score: float
    fold_scores: tuple[float, ...]


@dataclass
class CvReport:
    """Scores of every grid candidate; lower is better.

    ``criterion`` is ``"lsldg"`` (hold-out empirical objective) or
    ``"neg-log-likelihood"`` for KDE bandwidth selection.
    """

    candidates: list[CvCandidate]
    selected: int
    folds: int
    seed: int
    criterion: str = "lsldg"
    extra: dict = field(default_factory=dict)

    @property
    def best(self) -> CvCandidate:
        return self.candidates[self.selected]

    def to_dict(self) -> dict:
        out = {
            "criterion": self.criterion,
            "folds": self.folds,
            "seed": self.seed,
            "selected": self.selected,
            "selected_sigma": _jsonable(self.best.sigma),
            "selected_lambda": self.best.lam,
            "candidates": [],
        }
        for c in self.candidates:
            d = asdict(c)
            d["sigma"] = _jsonable(c.sigma)
            d["score"] = _finite_or_none(c.score)
            d["fold_scores"] = [_finite_or_none(s) for s in c.fold_scores]
            out["candidates"].append(d)
        out.update(self.extra)
        return out


def _jsonable(sigma):
    return list(sigma) if isinstance(sigma, tuple) else sigma


def _finite_or_none(v):
    return float(v) if np.isfinite(v) else None


def kfold_split(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Random partition of ``range(n)`` into ``folds`` near-equal index sets."""
    if folds < 2 or folds > n:
        raise InvalidArgument(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    perm = stream(seed, "folds").permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def holdout_score(model: GradientModel, holdout) -> float:
    """Empirical objective of ``model`` on held-out points (no penalty)."""
    x = np.asarray(holdout, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise InvalidArgument("holdout set is empty")
    return objective(model, x)


def expand_bandwidth_grid(bandwidth_grid, n_groups: int | None) -> list:
    """Grouped kernels search the cross product of the per-group grid."""
    grid = list(bandwidth_grid)
    if not grid:
        raise InvalidArgument("bandwidth grid is empty")
    if n_groups is None:
        return [float(s) for s in grid]
    if all(np.ndim(s) == 0 for s in grid):
        return [tuple(float(v) for v in s) for s in itertools.product(grid, repeat=n_groups)]
    return [tuple(float(v) for v in s) for s in grid]


def _quad_score(theta: np.ndarray, system: LinearSystem) -> float:
    # sum_j theta_j' G_j theta_j + 2 theta_j' h_j
    if system.variant == "common":
        quad = np.einsum("bj,bc,cj->", theta, system.G, theta)
    else:
        quad = np.einsum("bj,jbc,cj->", theta, system.G, theta)
    return float(quad + 2.0 * np.sum(theta * system.h))


def _partial_sums(basis, rows, variant):
    phi = basis.phi[rows]
    if variant == "common":
        return phi.T @ phi, basis.psi[rows].sum(axis=0)
    return gram_per_dim(basis.psi[rows]), basis.dpsi[rows].sum(axis=0)


def _restrict(system: LinearSystem, keep: np.ndarray) -> LinearSystem:
    if system.variant == "common":
        G = system.G[np.ix_(keep, keep)]
    else:
        G = system.G[:, keep][:, :, keep]
    return LinearSystem(G, system.h[keep], system.variant, system.n)


def select_model(samples, bandwidth_grid=DEFAULT_GRID, lambda_grid=DEFAULT_GRID,
                 folds: int = 5, seed: int = 0, *, variant: str = "per-dim",
                 center_count: int = 100, centers=None, groups=None,
                 group_names=None) -> tuple[GradientModel, CvReport]:
    """Choose (bandwidth, lambda) by K-fold hold-out objective and refit.

    Centers are drawn once (from the ``centers`` stream of ``seed``) unless
    given explicitly, and are shared by every candidate.  Within a fold, the
    centers that are themselves held-out samples are dropped from the basis:
    a held-out point sitting exactly on a center has ``psi = 0`` and a large
    negative ``d psi``, which would bias the score toward tiny bandwidths.
    Explicitly given centers are used unchanged in every fold.

    Candidates whose ridge system cannot be factorized score ``+inf``.  Ties
    prefer the larger lambda, then the larger bandwidth.
    """
    x = _check_samples(samples)
    n = x.shape[0]
    if variant not in VARIANTS:
        raise InvalidArgument(f"unknown variant {variant!r}")
    lambdas = [float(v) for v in lambda_grid]
    if not lambdas:
        raise InvalidArgument("lambda grid is empty")
    if any(v < 0 for v in lambdas):
        raise InvalidArgument("lambda candidates must be >= 0")
    sigmas = expand_bandwidth_grid(bandwidth_grid, None if groups is None else len(groups))
    split = kfold_split(n, folds, seed)
    if centers is None:
        cidx = center_indices(n, center_count, seed)
        centers = x[cidx]
        keeps = [np.flatnonzero(~np.isin(cidx, hold)) for hold in split]
    else:
        centers = np.asarray(centers, dtype=float)
        keeps = [np.arange(len(centers))] * len(split)

    candidates: list[CvCandidate] = []
    for sigma in sigmas:
        cfg = KernelConfig(centers, sigma, groups, group_names)
        basis = eval_basis(x, cfg)
        G_all, h_all = _partial_sums(basis, slice(None), variant)
        fold_systems = []
        for hold, keep in zip(split, keeps):
            m = hold.size
            G_hold, h_hold = _partial_sums(basis, hold, variant)
            train = LinearSystem((G_all - G_hold) / (n - m), (h_all - h_hold) / (n - m), variant, n - m)
            test = LinearSystem(G_hold / m, h_hold / m, variant, m)
            if keep.size == 0:
                fold_systems.append(None)
            else:
                fold_systems.append((_restrict(train, keep), _restrict(test, keep)))
        for lam in lambdas:
            scores = []
            for systems in fold_systems:
                if systems is None:  # every center was held out
                    scores.append(np.inf)
                    continue
                train, test = systems
                try:
                    theta = solve_system(train, lam)
                except IllConditioned:
                    scores.append(np.inf)
                    continue
                s = _quad_score(theta, test)
                scores.append(s if np.isfinite(s) else np.inf)
            mean = float(np.mean(scores)) if np.all(np.isfinite(scores)) else np.inf
            candidates.append(CvCandidate(sigma, lam, mean, tuple(float(s) for s in scores)))

    report = CvReport(candidates, _argmin(candidates), folds, seed, "lsldg",
                      {"variant": variant, "n_centers": int(len(centers))})
    if not np.isfinite(report.best.score):
        raise SelectionFailed("every (bandwidth, lambda) candidate failed to fit", report)
    best = report.best
    cfg = KernelConfig(centers, best.sigma, groups, group_names)
    model = fit(x, cfg, FitConfig(lam=best.lam, variant=variant,
                                  center_count=len(centers), rng_seed=seed))
    return model, report


def _argmin(candidates: list[CvCandidate]) -> int:
    def key(i):
        c = candidates[i]
        sig = c.sigma if isinstance(c.sigma, tuple) else (c.sigma,)
        return (c.score, -(c.lam or 0.0), tuple(-s for s in sig))
    return min(range(len(candidates)), key=key)
