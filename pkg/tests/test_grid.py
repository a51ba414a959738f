import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdemas.grid import (
    GridField,
    NonFiniteFieldError,
    SpatialGrid,
    left_flux,
    max_norm,
    right_flux,
    trace,
    zero_field,
)


def test_grid_geometry():
    g = SpatialGrid(10)
    assert g.h == pytest.approx(0.1)
    assert g.n_nodes == 11
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert np.allclose(np.diff(g.nodes), g.h)


def test_grid_rejects_tiny():
    with pytest.raises(ValueError):
        SpatialGrid(3)


def test_field_shape_and_finiteness(grid100):
    with pytest.raises(ValueError):
        GridField(grid100, np.zeros(3))
    bad = np.zeros(grid100.n_nodes)
    bad[5] = np.nan
    with pytest.raises(NonFiniteFieldError):
        GridField(grid100, bad)


def test_max_norm_and_trace(grid100):
    w = GridField(grid100, np.linspace(-2.0, 3.0, grid100.n_nodes))
    assert max_norm(w) == 3.0
    assert trace(w, "left") == -2.0
    assert trace(w, "right") == 3.0
    with pytest.raises(ValueError):
        trace(w, "middle")
    assert max_norm(zero_field(grid100)) == 0.0


@given(
    a=st.floats(-5, 5),
    b=st.floats(-5, 5),
    c=st.floats(-5, 5),
    m=st.integers(4, 50),
)
def test_one_sided_fluxes_exact_on_quadratics(a, b, c, m):
    """The (-3, 4, -1)/(2h) stencil differentiates quadratics exactly."""
    g = SpatialGrid(m)
    x = g.nodes
    w = GridField(g, a + b * x + c * x**2)
    assert left_flux(w) == pytest.approx(b, abs=1e-9 * (1 + abs(b) + abs(c)))
    assert right_flux(w) == pytest.approx(b + 2 * c, abs=1e-9 * (1 + abs(b) + abs(c)))


def test_flux_second_order_on_sine():
    g = SpatialGrid(100)
    w = GridField(g, np.sin(2.0 * g.nodes))
    assert left_flux(w) == pytest.approx(2.0, abs=5e-3)
    assert right_flux(w) == pytest.approx(2.0 * math.cos(2.0), abs=5e-3)


def test_flux_error_shrinks_quadratically():
    errs = []
    for m in (25, 50, 100):
        g = SpatialGrid(m)
        w = GridField(g, np.sin(2.0 * g.nodes))
        errs.append(abs(left_flux(w) - 2.0))
    order = math.log2(errs[0] / errs[1])
    assert 1.8 < order < 2.2
    order = math.log2(errs[1] / errs[2])
    assert 1.8 < order < 2.2
