"""Least-squares log-density gradient estimation.

The model for coordinate ``j`` of ``grad log p`` is linear in its
parameters, ``g_j(x) = theta_j . psi_j(x)``.  Substituting it into the
integration-by-parts form of the squared loss gives the empirical objective

    J_j(theta_j) = theta_j' G_j theta_j + 2 theta_j' h_j

with ``G_j = mean_i psi_j(x_i) psi_j(x_i)'`` and ``h_j = mean_i d_j psi_j(x_i)``,
so the ridge solution is ``theta_j = -(G_j + lam I)^{-1} h_j``.

Three variants are supported:

``per-dim``
    The derivative basis ``psi_ij = d phi_i / d x_j``; each coordinate has its
    own Gram matrix and its own coefficients.
``common``
    The mother basis ``phi`` itself is used for every coordinate, so a single
    Gram matrix (and one factorization) serves all ``d`` right-hand sides.
``shared``
    The derivative basis with one coefficient vector for all coordinates,
    ``theta = -(sum_j G_j + lam I)^{-1} sum_j h_j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import IllConditioned, InvalidArgument
from .kernel import BasisEval, KernelConfig, eval_basis
from .rng import stream

__all__ = [
    "VARIANTS",
    "FitConfig",
    "GradientModel",
    "LinearSystem",
    "center_indices",
    "sample_centers",
    "kernel_from_samples",
    "build_system",
    "solve_ridge",
    "fit",
    "predict_gradient",
    "predict_divergence",
    "predict_log_density",
    "objective",
]

VARIANTS = ("per-dim", "common", "shared")

# Smallest acceptable squared ratio of Cholesky pivots.
RCOND_MIN = 1e-12


@dataclass(frozen=True)
class FitConfig:
    lam: float = 0.1
    variant: str = "per-dim"
    center_count: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidArgument(f"lambda must be >= 0, got {self.lam}")
        if self.variant not in VARIANTS:
            raise InvalidArgument(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.center_count < 1:
            raise InvalidArgument("center_count must be positive")


@dataclass(frozen=True)
class GradientModel:
    """A fitted gradient model.

    ``theta`` always has shape (b, d); for the ``shared`` variant its columns
    are identical copies of the single coefficient vector.
    """

    kernel: KernelConfig
    theta: np.ndarray
    variant: str = "per-dim"
    lam: float | None = None

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        b, d = self.kernel.n_centers, self.kernel.dim
        if theta.ndim == 1 and self.variant == "shared":
            theta = np.repeat(theta[:, None], d, axis=1)
        if theta.shape != (b, d):
            raise InvalidArgument(f"theta must have shape {(b, d)}, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise InvalidArgument("theta must be finite")
        if self.variant not in VARIANTS:
            raise InvalidArgument(f"unknown variant {self.variant!r}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def __call__(self, x) -> np.ndarray:
        return predict_gradient(self, x)


@dataclass(frozen=True)
class LinearSystem:
    """Gram matrices and linear terms of the empirical objective.

    ``G`` has shape (b, b) for the common variant and (d, b, b) otherwise;
    ``h`` has shape (b, d).
    """

    G: np.ndarray
    h: np.ndarray
    variant: str
    n: int


def _check_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidArgument("samples must be a non-empty (n, d) matrix")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("samples contain NaN or infinite values")
    return x


def center_indices(n: int, count: int, seed: int) -> np.ndarray:
    """Indices of ``min(count, n)`` rows drawn uniformly without replacement."""
    b = min(int(count), n)
    if b == n:
        return np.arange(n)
    return stream(seed, "centers").choice(n, size=b, replace=False)


def sample_centers(samples, count: int, seed: int) -> np.ndarray:
    x = _check_samples(samples)
    return x[center_indices(x.shape[0], count, seed)]


def kernel_from_samples(samples, sigma, config: FitConfig | None = None) -> KernelConfig:
    config = config or FitConfig()
    return KernelConfig(sample_centers(samples, config.center_count, config.rng_seed), sigma)


def gram_per_dim(psi: np.ndarray) -> np.ndarray:
    """``sum_i psi[i, :, j] psi[i, :, j]'`` for every j, shape (d, b, b)."""
    n, b, d = psi.shape
    out = np.empty((d, b, b))
    for j in range(d):
        p = np.ascontiguousarray(psi[:, :, j])
        out[j] = p.T @ p
    return out


def system_from_basis(basis: BasisEval, variant: str) -> LinearSystem:
    """Accumulate the normal equations from precomputed basis values."""
    n = basis.phi.shape[0]
    if variant == "common":
        G = basis.phi.T @ basis.phi / n
        h = basis.psi.mean(axis=0)
    else:
        G = gram_per_dim(basis.psi) / n
        h = basis.dpsi.mean(axis=0)
    return LinearSystem(G, h, variant, n)


def build_system(samples, cfg: KernelConfig, variant: str = "per-dim") -> LinearSystem:
    x = _check_samples(samples)
    if variant not in VARIANTS:
        raise InvalidArgument(f"unknown variant {variant!r}")
    return system_from_basis(eval_basis(x, cfg), variant)


def solve_ridge(G: np.ndarray, rhs: np.ndarray, lam: float, dimension=None) -> np.ndarray:
    """Solve ``(G + lam I) theta = -rhs`` by Cholesky factorization."""
    A = G + lam * np.eye(G.shape[0])
    where = "" if dimension is None else f" for dimension {dimension}"
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise IllConditioned(f"ridge system (lambda={lam:g}) is not positive definite{where}",
                             dimension) from exc
    pivots = np.abs(np.diag(factor[0]))
    if pivots.min() ** 2 < RCOND_MIN * pivots.max() ** 2:
        raise IllConditioned(f"ridge system (lambda={lam:g}) is numerically singular{where}",
                             dimension)
    return -linalg.cho_solve(factor, rhs, check_finite=False)


def solve_system(system: LinearSystem, lam: float) -> np.ndarray:
    """Coefficients (b, d) for an assembled system."""
    if system.variant == "common":
        return solve_ridge(system.G, system.h, lam)
    if system.variant == "shared":
        col = solve_ridge(system.G.sum(axis=0), system.h.sum(axis=1), lam)
        return np.repeat(col[:, None], system.h.shape[1], axis=1)
    b, d = system.h.shape
    theta = np.empty((b, d))
    for j in range(d):
        theta[:, j] = solve_ridge(system.G[j], system.h[:, j], lam, dimension=j)
    return theta


def fit(samples, cfg: KernelConfig, config: FitConfig | None = None) -> GradientModel:
    """Closed-form ridge fit of the gradient model on ``samples``."""
    config = config or FitConfig()
    system = build_system(samples, cfg, config.variant)
    theta = solve_system(system, config.lam)
    return GradientModel(cfg, theta, config.variant, config.lam)


def _basis_for(model: GradientModel, x, derivatives=True):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dim:
        raise InvalidArgument(f"point dimension {x.shape[-1]} does not match model dimension {model.dim}")
    return eval_basis(x, model.kernel, derivatives)


def predict_gradient(model: GradientModel, x) -> np.ndarray:
    """Estimated ``grad log p`` at one point (d,) or at each row of (m, d)."""
    basis = _basis_for(model, x, derivatives=model.variant != "common")
    if model.variant == "common":
        return basis.phi @ model.theta
    return np.sum(basis.psi * model.theta, axis=-2)


def predict_divergence(model: GradientModel, x) -> np.ndarray:
    """Per-coordinate ``d_j g_j``, same shape as :func:`predict_gradient`."""
    basis = _basis_for(model, x)
    second = basis.psi if model.variant == "common" else basis.dpsi
    return np.sum(second * model.theta, axis=-2)


def predict_log_density(model: GradientModel, x) -> np.ndarray:
    """Per-coordinate log-density surrogates ``sum_i theta_ij phi_i(x)``.

    Each entry is ``log p`` up to its own additive constant; the entries are
    not reconciled with each other.  Only defined for the derivative basis.
    """
    if model.variant == "common":
        raise InvalidArgument("the common-basis model has no log-density surrogate")
    basis = _basis_for(model, x, derivatives=False)
    return basis.phi @ model.theta


def objective(model: GradientModel, samples, lam: float = 0.0) -> float:
    """Empirical loss summed over coordinates, plus ``lam`` times the penalty.

    With ``lam=0`` this is the plain empirical loss (which is typically
    negative at the optimum).
    """
    x = _check_samples(samples)
    basis = _basis_for(model, x)
    if model.variant == "common":
        g = basis.phi @ model.theta
        div = np.sum(basis.psi * model.theta, axis=-2)
    else:
        g = np.sum(basis.psi * model.theta, axis=-2)
        div = np.sum(basis.dpsi * model.theta, axis=-2)
    value = float(np.sum(np.mean(g * g + 2.0 * div, axis=0)))
    if lam:
        coef = model.theta[:, 0] if model.variant == "shared" else model.theta
        value += lam * float(np.sum(coef * coef))
    return value
