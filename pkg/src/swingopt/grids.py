"""Tensor grids: uniform time/volume axes, adaptive price-factor axis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Grid", "build_adaptive_x1"]


def build_adaptive_x1(
    x_min: float,
    x_max: float,
    n_nodes: int,
    cluster_center: float,
    cluster_strength: float = 0.15,
) -> np.ndarray:
    """Strictly increasing axis with highest node density at ``cluster_center``.

    Uses a hyperbolic-sine stretching: a uniform auxiliary axis mapped through
    sinh keeps the spacing smooth, which preserves the second-order accuracy
    of the nonuniform central stencil.  ``cluster_strength = 0`` degenerates
    to a uniform axis.
    """
    if not x_min < cluster_center < x_max:
        raise ValueError("cluster_center must lie strictly inside (x_min, x_max)")
    if n_nodes < 3:
        raise ValueError("need at least 3 nodes")
    if cluster_strength < 0:
        raise ValueError("cluster_strength must be nonnegative")
    if cluster_strength == 0.0:
        return np.linspace(x_min, x_max, n_nodes)
    lo = np.arcsinh(cluster_strength * (x_min - cluster_center))
    hi = np.arcsinh(cluster_strength * (x_max - cluster_center))
    xi = np.linspace(lo, hi, n_nodes)
    axis = cluster_center + np.sinh(xi) / cluster_strength
    axis[0], axis[-1] = x_min, x_max
    return axis


@dataclass(frozen=True)
class Grid:
    """Axes of the solve: t and z uniform, x1 adaptive, x2 uniform if present."""

    t_axis: np.ndarray
    z_axis: np.ndarray
    x1_axis: np.ndarray
    x2_axis: np.ndarray | None = None

    def __post_init__(self):
        for name in ("t_axis", "z_axis", "x1_axis"):
            ax = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, ax)
            if ax.size < 3:
                raise ValueError(f"{name} needs at least 3 nodes")
            if np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if self.x2_axis is not None:
            ax = np.asarray(self.x2_axis, dtype=float)
            object.__setattr__(self, "x2_axis", ax)
            if ax.size < 3 or np.any(np.diff(ax) <= 0):
                raise ValueError("x2_axis must be strictly increasing with >= 3 nodes")

    @property
    def dt(self) -> float:
        return float(self.t_axis[1] - self.t_axis[0])

    @property
    def dz(self) -> float:
        return float(self.z_axis[1] - self.z_axis[0])

    @property
    def dx2(self) -> float | None:
        if self.x2_axis is None:
            return None
        return float(self.x2_axis[1] - self.x2_axis[0])

    @property
    def is_two_factor(self) -> bool:
        return self.x2_axis is not None
