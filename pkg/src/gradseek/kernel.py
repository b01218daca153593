"""Gaussian mother basis and its derivative bases.

For centers ``c_i`` and a per-coordinate bandwidth ``s_j``::

    phi_i(x)     = exp(-sum_j (x_j - c_ij)^2 / (2 s_j^2))
    psi_ij(x)    = (c_ij - x_j) / s_j^2 * phi_i(x)          (= d phi_i / d x_j)
    dpsi_ij(x)   = phi_i(x) * ((c_ij - x_j)^2 / s_j^4 - 1 / s_j^2)

An isotropic kernel uses one bandwidth for every coordinate.  A grouped
kernel partitions the coordinates (e.g. color and pixel position) and gives
each group its own bandwidth; ``phi`` is then the product of the per-group
Gaussians.  Either way the exponent is accumulated per coordinate and passed
through a single ``exp``.

Every evaluator accepts one point of shape ``(d,)`` or a batch ``(m, d)`` and
returns arrays with the batch axis first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "KernelConfig",
    "BasisEval",
    "eval_phi",
    "eval_psi",
    "eval_dpsi",
    "eval_basis",
    "scaled_displacement",
    "log_phi",
    "scaled_sqdist",
]


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian centers plus an isotropic or grouped bandwidth.

    Parameters
    ----------
    centers : array, shape (b, d)
    sigma : float or sequence of float
        A single bandwidth, or one per group when ``groups`` is given.
    groups : sequence of sequences of int, optional
        Partition of ``range(d)``.  ``None`` means isotropic.
    group_names : sequence of str, optional
        Labels for the groups, e.g. ``("color", "space")``.
    """

    centers: np.ndarray
    sigma: float | tuple[float, ...]
    groups: tuple[tuple[int, ...], ...] | None = None
    group_names: tuple[str, ...] | None = None
    sigma_per_dim: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float)
        if centers.ndim != 2 or centers.shape[0] < 1 or centers.shape[1] < 1:
            raise InvalidArgument(f"centers must be a non-empty (b, d) matrix, got shape {centers.shape}")
        if not np.all(np.isfinite(centers)):
            raise InvalidArgument("centers must be finite")
        centers.setflags(write=False)
        d = centers.shape[1]

        if self.groups is None:
            sigma = float(self.sigma)
            if not np.isfinite(sigma) or sigma <= 0:
                raise InvalidArgument(f"bandwidth must be positive, got {sigma}")
            per_dim = np.full(d, sigma)
            groups = None
            names = None
        else:
            groups = tuple(tuple(int(j) for j in g) for g in self.groups)
            sigma = tuple(float(s) for s in np.atleast_1d(self.sigma))
            if len(sigma) != len(groups):
                raise InvalidArgument("need one bandwidth per coordinate group")
            if any(not np.isfinite(s) or s <= 0 for s in sigma):
                raise InvalidArgument(f"bandwidths must be positive, got {sigma}")
            flat = sorted(j for g in groups for j in g)
            if flat != list(range(d)):
                raise InvalidArgument(f"groups {groups} do not partition the {d} coordinates")
            per_dim = np.empty(d)
            for g, s in zip(groups, sigma):
                per_dim[list(g)] = s
            names = None if self.group_names is None else tuple(self.group_names)
            if names is not None and len(names) != len(groups):
                raise InvalidArgument("group_names must match groups")
        per_dim.setflags(write=False)

        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "group_names", names)
        object.__setattr__(self, "sigma_per_dim", per_dim)

    @classmethod
    def color_space(cls, centers, sigma_color: float, sigma_space: float,
                    color_dims: Sequence[int] = (0, 1, 2),
                    space_dims: Sequence[int] = (3, 4)) -> "KernelConfig":
        return cls(centers, (sigma_color, sigma_space),
                   groups=(tuple(color_dims), tuple(space_dims)),
                   group_names=("color", "space"))

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def is_grouped(self) -> bool:
        return self.groups is not None

    def group_sigma(self, name: str) -> float:
        if self.group_names is None or name not in self.group_names:
            raise KeyError(name)
        return self.sigma[self.group_names.index(name)]

    @property
    def merge_scale(self) -> float:
        """Bandwidth that sets the mode-merging scale.

        The space-group bandwidth for color/space kernels, otherwise the
        largest bandwidth.
        """
        if self.group_names is not None and "space" in self.group_names:
            return self.group_sigma("space")
        return float(np.max(self.sigma_per_dim))

    def with_sigma(self, sigma) -> "KernelConfig":
        return KernelConfig(self.centers, sigma, self.groups, self.group_names)

    def to_dict(self) -> dict:
        out = {"n_centers": self.n_centers, "dim": self.dim}
        if self.groups is None:
            out["sigma"] = self.sigma
        else:
            out["sigma"] = list(self.sigma)
            out["groups"] = [list(g) for g in self.groups]
            if self.group_names is not None:
                out["group_names"] = list(self.group_names)
        return out


@dataclass(frozen=True)
class BasisEval:
    phi: np.ndarray
    psi: np.ndarray | None = None
    dpsi: np.ndarray | None = None


def _as_points(x, cfg: KernelConfig) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != cfg.dim:
        raise InvalidArgument(f"points have dimension {x2.shape[-1]}, centers have {cfg.dim}")
    return x2, single


def scaled_displacement(x, cfg: KernelConfig) -> np.ndarray:
    """``(c_ij - x_j) / s_j`` as an array of shape (m, b, d)."""
    x2, _ = _as_points(x, cfg)
    return (cfg.centers[None, :, :] - x2[:, None, :]) / cfg.sigma_per_dim


def _phi_from_u(u: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * np.sum(u * u, axis=-1))


def eval_phi(x, cfg: KernelConfig) -> np.ndarray:
    """Mother basis values, shape (b,) for one point or (m, b) for a batch."""
    x2, single = _as_points(x, cfg)
    phi = _phi_from_u(scaled_displacement(x2, cfg))
    return phi[0] if single else phi


def eval_psi(x, cfg: KernelConfig) -> np.ndarray:
    x2, single = _as_points(x, cfg)
    u = scaled_displacement(x2, cfg)
    psi = u / cfg.sigma_per_dim * _phi_from_u(u)[..., None]
    return psi[0] if single else psi


def eval_dpsi(x, cfg: KernelConfig) -> np.ndarray:
    x2, single = _as_points(x, cfg)
    u = scaled_displacement(x2, cfg)
    dpsi = (u * u - 1.0) / cfg.sigma_per_dim ** 2 * _phi_from_u(u)[..., None]
    return dpsi[0] if single else dpsi


def eval_basis(x, cfg: KernelConfig, derivatives: bool = True) -> BasisEval:
    """Evaluate phi and, optionally, psi and dpsi from one shared exponent."""
    x2, single = _as_points(x, cfg)
    u = scaled_displacement(x2, cfg)
    phi = _phi_from_u(u)
    if not derivatives:
        return BasisEval(phi[0] if single else phi)
    psi = u / cfg.sigma_per_dim * phi[..., None]
    dpsi = (u * u - 1.0) / cfg.sigma_per_dim ** 2 * phi[..., None]
    if single:
        return BasisEval(phi[0], psi[0], dpsi[0])
    return BasisEval(phi, psi, dpsi)


def log_phi(x, cfg: KernelConfig) -> np.ndarray:
    """``log phi`` for a batch, via the expanded squared distance.

    Cheaper than :func:`eval_phi` for many points and centers (one matrix
    product instead of an (m, b, d) temporary) and never underflows.
    """
    x2, single = _as_points(x, cfg)
    out = -0.5 * scaled_sqdist(x2 / cfg.sigma_per_dim, cfg.centers / cfg.sigma_per_dim)
    return out[0] if single else out


def scaled_sqdist(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (m, b), clipped at zero."""
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(c * c, axis=1)[None, :] - 2.0 * (a @ c.T)
    return np.maximum(sq, 0.0)
