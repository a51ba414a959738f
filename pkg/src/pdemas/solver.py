"""Crank-Nicolson time stepping for w_t = alpha*w_xx - lambda*w + f on (0,1).

Left boundary is Dirichlet (value pinned) or Neumann (flux imposed through
the same second-order one-sided stencil used for output fluxes, so that the
observer's discrete error dynamics cancel exactly).  Right boundary is always
Robin, w_x(1) = -l*w(1) + g, closed with a ghost node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csc_matrix, csr_matrix, lil_matrix
from scipy.sparse.linalg import splu

from .grid import GridField, SpatialGrid
from .params import PlantParams

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundaryData:
    """One time level of boundary data.

    left_value is w(0,t) for a Dirichlet left end and w_x(0,t) for a Neumann
    one; right_flux_extra is the additive term g in w_x(1) = -l*w(1) + g.
    """

    left_kind: str
    left_value: float
    right_flux_extra: float = 0.0

    def __post_init__(self):
        if self.left_kind not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown left boundary kind {self.left_kind!r}")
        if not (np.isfinite(self.left_value) and np.isfinite(self.right_flux_extra)):
            raise ValueError("boundary data must be finite")


class StepOperator:
    """Factorized CN operators, reusable across steps with fixed (params, grid, dt)."""

    def __init__(self, params: PlantParams, grid: SpatialGrid, left_kind: str, dt: float):
        if left_kind not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown left boundary kind {left_kind!r}")
        if not np.isfinite(dt) or dt <= 0:
            raise ValueError(f"dt must be finite and > 0, got {dt}")
        self.params = params
        self.grid = grid
        self.left_kind = left_kind
        self.dt = dt

        n = grid.n_nodes
        m = grid.intervals
        h = grid.h
        alpha, lam, ell = params.alpha, params.lam, params.robin_l
        mu = alpha / h**2

        # Spatial operator L (rows 1..M); row 0 carries the boundary closure.
        lmat = lil_matrix((n, n))
        for j in range(1, m):
            lmat[j, j - 1] = mu
            lmat[j, j] = -2.0 * mu - lam
            lmat[j, j + 1] = mu
        # Robin row via ghost-node elimination:
        # w_{M+1} = w_{M-1} + 2h(-l*w_M + g).
        lmat[m, m - 1] = 2.0 * mu
        lmat[m, m] = -2.0 * mu * (1.0 + h * ell) - lam

        eye = lil_matrix((n, n))
        for j in range(1, n):
            eye[j, j] = 1.0

        a = (eye - (dt / 2.0) * lmat).tolil()
        b = (eye + (dt / 2.0) * lmat).tolil()
        if left_kind == DIRICHLET:
            a[0, 0] = 1.0
        else:
            # Impose w_x(0) = g with the one-sided output stencil.
            a[0, 0] = -3.0 / (2.0 * h)
            a[0, 1] = 4.0 / (2.0 * h)
            a[0, 2] = -1.0 / (2.0 * h)

        self._lu = splu(csc_matrix(a))
        self._b = csr_matrix(b)
        # Source rows 1..M get the trapezoidal dt/2 weight; row 0 is a
        # boundary closure with no PDE.
        self._src_mask = np.ones(n)
        self._src_mask[0] = 0.0
        self._robin_coeff = (dt / 2.0) * 2.0 * alpha / h

    def apply_explicit(self, w: np.ndarray) -> np.ndarray:
        return self._b @ w

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        out = self._lu.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("linear solve produced non-finite values")
        return out

    def step_values(
        self,
        w: np.ndarray,
        bd_now: BoundaryData,
        bd_next: BoundaryData,
        source_now: np.ndarray | None = None,
        source_next: np.ndarray | None = None,
    ) -> np.ndarray:
        rhs = self.apply_explicit(w)
        if source_now is not None or source_next is not None:
            s0 = 0.0 if source_now is None else source_now
            s1 = 0.0 if source_next is None else source_next
            rhs += (self.dt / 2.0) * self._src_mask * (s0 + s1)
        rhs[0] = bd_next.left_value
        rhs[-1] += self._robin_coeff * (
            bd_now.right_flux_extra + bd_next.right_flux_extra
        )
        return self.solve(rhs)


def assemble_step_operator(
    params: PlantParams, grid: SpatialGrid, left_kind: str, dt: float
) -> StepOperator:
    return StepOperator(params, grid, left_kind, dt)


def step(
    field: GridField,
    op: StepOperator,
    bd_now: BoundaryData,
    bd_next: BoundaryData,
    source_now: np.ndarray | None = None,
    source_next: np.ndarray | None = None,
) -> GridField:
    """Advance one CN step; boundary kinds must match the operator."""
    if bd_now.left_kind != op.left_kind or bd_next.left_kind != op.left_kind:
        raise ValueError("boundary data kind does not match operator")
    new = op.step_values(field.values, bd_now, bd_next, source_now, source_next)
    return GridField(field.grid, new, field.time + op.dt)
