"""Isotropic Gaussian mixtures with analytic log-density gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidArgument
from .rng import stream

__all__ = ["GmmSpec", "sample", "log_density", "true_log_gradient", "PRESETS", "preset"]


@dataclass(frozen=True)
class GmmSpec:
    """Mixture of isotropic Gaussians, optionally padded with N(0, 1) noise dims.

    ``variances`` holds one isotropic variance per component.
    """

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    noise_dims: int = 0

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        k = means.shape[0]
        variances = np.broadcast_to(np.asarray(self.variances, dtype=float), (k,)).copy()
        weights = np.broadcast_to(np.asarray(self.weights, dtype=float), (k,)).copy()
        if not np.all(np.isfinite(means)):
            raise InvalidArgument("means must be finite")
        if np.any(variances <= 0):
            raise InvalidArgument("variances must be positive")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise InvalidArgument("weights must be non-negative and sum to 1")
        if self.noise_dims < 0:
            raise InvalidArgument("noise_dims must be >= 0")
        for a in (means, variances, weights):
            a.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "noise_dims", int(self.noise_dims))

    @property
    def base_dim(self) -> int:
        return self.means.shape[1]

    @property
    def dim(self) -> int:
        return self.base_dim + self.noise_dims

    def with_dim(self, d: int) -> "GmmSpec":
        """Same mixture padded with noise dims up to total dimension ``d``."""
        if d < self.base_dim:
            raise InvalidArgument(f"dimension {d} is below the mixture's own {self.base_dim}")
        return GmmSpec(self.means, self.variances, self.weights, d - self.base_dim)

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "weights": self.weights.tolist(),
            "noise_dims": self.noise_dims,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GmmSpec":
        try:
            return cls(d["means"], d["variances"], d["weights"], d.get("noise_dims", 0))
        except KeyError as exc:
            raise InvalidArgument(f"mixture spec is missing field {exc}") from None


PRESETS = {
    "gauss": lambda: GmmSpec([[0.0]], [1.0], [1.0]),
    "gmm2": lambda: GmmSpec([[2.0], [-2.0]], [1.0, 1.0], [0.5, 0.5]),
    "gmm3": lambda: GmmSpec([[0.0, 2.0], [-2.0, -2.0], [2.0, -2.0]], [1.0, 1.0, 1.0], [0.4, 0.3, 0.3]),
}


def preset(name: str, dim: int | None = None) -> GmmSpec:
    """``gauss`` (standard normal), ``gmm2`` (means +-2) or ``gmm3`` (three 2-d blobs)."""
    try:
        spec = PRESETS[name]()
    except KeyError:
        raise InvalidArgument(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if name == "gauss" and dim is not None:
        return GmmSpec(np.zeros((1, dim)), [1.0], [1.0])
    return spec if dim is None else spec.with_dim(dim)


def sample(spec: GmmSpec, n: int, seed: int, purpose: str = "data") -> tuple[np.ndarray, np.ndarray]:
    """``n`` i.i.d. draws and their generating component indices."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    rng = stream(seed, purpose)
    labels = rng.choice(spec.means.shape[0], size=n, p=spec.weights)
    base = spec.means[labels] + rng.standard_normal((n, spec.base_dim)) * np.sqrt(spec.variances[labels])[:, None]
    if spec.noise_dims:
        base = np.hstack([base, rng.standard_normal((n, spec.noise_dims))])
    return base, labels


def _component_logpdf(spec: GmmSpec, x: np.ndarray) -> np.ndarray:
    xb = x[:, : spec.base_dim]
    sq = np.sum((xb[:, None, :] - spec.means[None]) ** 2, axis=-1)
    with np.errstate(divide="ignore"):
        logw = np.log(spec.weights)
    return logw - 0.5 * sq / spec.variances - 0.5 * spec.base_dim * np.log(2 * np.pi * spec.variances)


def _points(spec, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != spec.dim:
        raise InvalidArgument(f"point dimension {x2.shape[1]} != spec dimension {spec.dim}")
    return x2, single


def log_density(spec: GmmSpec, x) -> np.ndarray | float:
    x2, single = _points(spec, x)
    out = logsumexp(_component_logpdf(spec, x2), axis=1)
    if spec.noise_dims:
        noise = x2[:, spec.base_dim:]
        out = out - 0.5 * np.sum(noise * noise, axis=1) - 0.5 * spec.noise_dims * np.log(2 * np.pi)
    return float(out[0]) if single else out


def true_log_gradient(spec: GmmSpec, x) -> np.ndarray:
    """``sum_k r_k(x) (mu_k - x) / var_k`` on mixture coords, ``-x`` on noise coords."""
    x2, single = _points(spec, x)
    logc = _component_logpdf(spec, x2)
    resp = np.exp(logc - logsumexp(logc, axis=1, keepdims=True))
    xb = x2[:, : spec.base_dim]
    grad = np.einsum("nk,nkd->nd", resp / spec.variances, spec.means[None] - xb[:, None, :])
    if spec.noise_dims:
        grad = np.hstack([grad, -x2[:, spec.base_dim:]])
    return grad[0] if single else grad
