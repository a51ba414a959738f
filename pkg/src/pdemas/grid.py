"""Uniform 1-D spatial grid on [0, 1] and node-sampled scalar fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteFieldError(RuntimeError):
    """A field picked up a NaN or Inf; the run cannot continue."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid with `intervals` cells, nodes x_j = j*h, h = 1/intervals."""

    intervals: int

    def __post_init__(self):
        if self.intervals < 4:
            raise ValueError(
                f"grid needs intervals >= 4 for one-sided stencils, got {self.intervals}"
            )

    @property
    def h(self) -> float:
        return 1.0 / self.intervals

    @property
    def n_nodes(self) -> int:
        return self.intervals + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_nodes)


@dataclass
class GridField:
    """Scalar field sampled on a grid at one time level."""

    grid: SpatialGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"expected {self.grid.n_nodes} node values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteFieldError(f"non-finite field values at t={self.time}")


def zero_field(grid: SpatialGrid, time: float = 0.0) -> GridField:
    return GridField(grid, np.zeros(grid.n_nodes), time)


def max_norm(f: GridField) -> float:
    """Max-norm over the closed interval: max_j |w_j|."""
    return float(np.max(np.abs(f.values)))


def trace(f: GridField, endpoint: str) -> float:
    """Boundary value w(0) or w(1)."""
    if endpoint == "left":
        return float(f.values[0])
    if endpoint == "right":
        return float(f.values[-1])
    raise ValueError(f"endpoint must be 'left' or 'right', got {endpoint!r}")


def left_flux(f: GridField) -> float:
    """Second-order one-sided approximation of w_x(0)."""
    return left_flux_values(f.values, f.grid.h)


def left_flux_values(w: np.ndarray, h: float) -> float:
    return float((-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h))


def right_flux(f: GridField) -> float:
    """Second-order one-sided approximation of w_x(1)."""
    w = f.values
    h = f.grid.h
    return float((3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * h))
