import math

import numpy as np
import pytest

from pdemas.grid import SpatialGrid
from pdemas.loop import (
    ClosedLoopState,
    CycleTopology,
    InitialData,
    LoopOperators,
    advance,
    compatibility_residuals,
    control_u0,
    control_u1,
    observer_left_flux,
)
from pdemas.params import PlantParams
from pdemas.scenario import bench_config
from pdemas.signals import (
    FieldSignal,
    ScenarioSignals,
    TimeSignal,
    builtin_scenario,
    eval_time,
)


def _zero_init(n, grid):
    z = np.zeros((n, grid.n_nodes))
    return InitialData(z.copy(), np.zeros(grid.n_nodes), z.copy(), z.copy())


def _zero_signals(n):
    return builtin_scenario("zero", n_agents=n)


@pytest.fixture
def small_plant():
    return PlantParams(1.0, 5.0, 1.0, (0.1, 0.2, 0.3, 0.4, 0.5), 5)


def test_cycle_topology():
    topo = CycleTopology(5)
    assert topo.pred(1) == 5
    assert [topo.pred(i) for i in range(1, 6)] == [5, 1, 2, 3, 4]
    # pred applied N times is the identity
    i = 3
    for _ in range(5):
        i = topo.pred(i)
    assert i == 3


def test_initial_data_rejects_nonfinite():
    grid = SpatialGrid(10)
    z = np.zeros((2, grid.n_nodes))
    bad = z.copy()
    bad[0, 3] = np.inf
    with pytest.raises(ValueError):
        InitialData(bad, np.zeros(grid.n_nodes), z, z)


def test_zero_everything_stays_zero(small_plant):
    grid = SpatialGrid(20)
    sc = _zero_signals(5)
    state = ClosedLoopState(small_plant, grid, _zero_init(5, grid), sc)
    ops = LoopOperators.build(small_plant, grid, 1e-2)
    for _ in range(30):
        advance(state, ops, sc)
    assert np.all(state.u == 0.0)
    assert np.all(state.v == 0.0)
    assert np.all(state.qhat == 0.0)
    assert np.all(state.uref == 0.0)


def test_control_formulas(small_plant):
    grid = SpatialGrid(20)
    sc = builtin_scenario("bench", d0_knob=1.0, a0_knob=3.0)
    init = _zero_init(5, grid)
    init.qhat0[0, 0] = 0.3
    state = ClosedLoopState(small_plant, grid, init, sc)
    # r(0)=0, qhat_1(0,0)=0.3, d0_1(0)=3 sin 5
    expect = 0.0 - 0.3 + 3.0 * math.sin(5.0)
    assert control_u0(1, 0.0, state, sc) == pytest.approx(expect, abs=1e-12)
    # with zero knobs the same control reduces to -qhat(0)
    sc0 = _zero_signals(5)
    assert control_u0(1, 0.0, state, sc0) == pytest.approx(-0.3)

    state.u[4, -1] = 2.0   # agent 5 is agent 1's neighbour
    state.uref[-1] = 0.5
    assert control_u1(1, 0.0, state, sc0) == pytest.approx(0.1 * (2.0 - 0.5))
    # agent 3 hears agent 2
    state.u[1, -1] = -1.0
    assert control_u1(3, 0.0, state, sc0) == pytest.approx(0.3 * (-1.0 - 0.5))


def test_observer_left_flux(small_plant):
    grid = SpatialGrid(50)
    init = _zero_init(5, grid)
    init.u0[0] = np.sin(2.0 * grid.nodes)
    init.v0[0] = np.cos(grid.nodes)
    state = ClosedLoopState(small_plant, grid, init, _zero_signals(5))
    # u_x(0) - v_x(0) = 2 - 0
    assert observer_left_flux(1, state) == pytest.approx(2.0, abs=5e-3)


def test_qtilde_cancellation(small_plant):
    """u0 - v0 - qhat0 = 0 propagates as an exact discrete identity."""
    grid = SpatialGrid(100)
    sc = builtin_scenario("bench", d0_knob=1.0, d1_knob=1.0, a0_knob=3.0, a1_knob=5.0)
    nodes = grid.nodes
    u0 = np.array([np.sin((i + 1) * nodes) for i in range(5)])
    qhat0 = np.array([eval_time(sc.q[i], 0.0) * (1.0 - nodes) ** 2 for i in range(5)])
    init = InitialData(u0, np.cos(nodes), u0 - qhat0, qhat0)
    state = ClosedLoopState(small_plant, grid, init, sc)
    ops = LoopOperators.build(small_plant, grid, 1e-3)
    worst = 0.0
    for _ in range(300):
        advance(state, ops, sc)
        worst = max(worst, np.max(np.abs(state.u - state.v - state.qhat)))
    assert worst < 1e-10


def test_superposition_across_channels(small_plant):
    """With zero initial data the loop response is additive in the signals."""
    grid = SpatialGrid(20)
    n = 5
    zero_t = TimeSignal("zero")
    zero_f = FieldSignal("zero")
    sc_d0 = ScenarioSignals(
        r=TimeSignal("sin", 1.0, freq=10.0),
        q=(zero_t,) * n,
        d0=tuple(TimeSignal("sin", 2.0, freq=10.0, phase=i) for i in range(n)),
        d1=(zero_t,) * n,
        f=(zero_f,) * n,
    )
    sc_d1 = ScenarioSignals(
        r=zero_t,
        q=tuple(TimeSignal("cos", 0.5, freq=5.0, phase=i) for i in range(n)),
        d0=(zero_t,) * n,
        d1=tuple(TimeSignal("sin", 3.0, freq=7.0, phase=i) for i in range(n)),
        f=tuple(FieldSignal("offset_plus_sin", 1.0, space_freq=1.0, time_freq=10.0) for _ in range(n)),
    )
    sc_sum = ScenarioSignals(
        r=sc_d0.r,
        q=sc_d1.q,
        d0=sc_d0.d0,
        d1=sc_d1.d1,
        f=sc_d1.f,
    )

    def run_sc(sc):
        state = ClosedLoopState(small_plant, grid, _zero_init(n, grid), sc)
        ops = LoopOperators.build(small_plant, grid, 5e-3)
        for _ in range(40):
            advance(state, ops, sc, coupling_sweeps=2)
        return state

    a, b, c = run_sc(sc_d0), run_sc(sc_d1), run_sc(sc_sum)
    for name in ("u", "v", "qhat", "uref"):
        lhs = getattr(a, name) + getattr(b, name)
        np.testing.assert_allclose(lhs, getattr(c, name), atol=1e-9)


def test_advance_validates_sweeps(small_plant):
    grid = SpatialGrid(10)
    sc = _zero_signals(5)
    state = ClosedLoopState(small_plant, grid, _zero_init(5, grid), sc)
    ops = LoopOperators.build(small_plant, grid, 1e-2)
    with pytest.raises(ValueError):
        advance(state, ops, sc, coupling_sweeps=0)


def test_compatibility_residuals_values():
    """Frozen residuals of the experiment preset's (incompatible) data."""
    cfg = bench_config()
    res = compatibility_residuals(
        cfg.plant, cfg.grid, cfg.resolved_initial(), cfg.resolved_signals()
    )
    # agent 1 value condition: |0.2 + 2.8/sqrt(2)|
    assert res["dirichlet"][0] == pytest.approx(0.2 + 2.8 / math.sqrt(2.0), abs=1e-9)
    # reference value condition: |2.8 sin(-pi/4) - 0|
    assert res["ref_dirichlet"] == pytest.approx(2.8 / math.sqrt(2.0), abs=1e-9)
    assert res["ref_dirichlet"] == pytest.approx(1.980, abs=1e-3)
    for key in ("dirichlet", "robin", "v_dirichlet", "v_robin"):
        assert len(res[key]) == 5


def test_compatibility_residuals_zero_case(small_plant):
    grid = SpatialGrid(20)
    res = compatibility_residuals(
        small_plant, grid, _zero_init(5, grid), _zero_signals(5)
    )
    for key in ("dirichlet", "robin", "v_dirichlet", "v_robin"):
        assert np.allclose(res[key], 0.0)
    assert res["ref_dirichlet"] == 0.0
    assert res["ref_robin"] == 0.0


def test_dt_order_compatible_data(small_plant):
    """Compatible data: one coupling sweep is O(dt), two restore ~O(dt^2)."""
    grid = SpatialGrid(100)
    n = 5
    sig = ScenarioSignals(
        r=TimeSignal("sin", 1.0, freq=10.0),
        q=tuple(
            TimeSignal("sin", a, freq=w)
            for a, w in ((1, 2), (0.5, 5), (1, 1), (2, 3), (0.5, 2))
        ),
        d0=tuple(TimeSignal("sin", 3.0, freq=10.0) for _ in range(n)),
        d1=tuple(TimeSignal("sin", 3.0, freq=7.0) for _ in range(n)),
        f=tuple(
            FieldSignal("offset_plus_sin", 2.0, space_freq=1.0, time_freq=10.0, offset=-1.0)
            for _ in range(n)
        ),
    )

    def final(dt, sweeps):
        state = ClosedLoopState(small_plant, grid, _zero_init(n, grid), sig)
        ops = LoopOperators.build(small_plant, grid, dt)
        for _ in range(int(round(0.5 / dt))):
            advance(state, ops, sig, sweeps)
        return state

    for sweeps, lo, hi in ((1, 0.8, 1.2), (2, 1.6, 2.4)):
        states = [final(4e-3 / 2**k, sweeps) for k in range(3)]
        diffs = [
            max(
                np.max(np.abs(getattr(states[k], f) - getattr(states[k + 1], f)))
                for f in ("u", "v", "qhat", "uref")
            )
            for k in range(2)
        ]
        order = math.log2(diffs[0] / diffs[1])
        assert lo < order < hi, f"sweeps={sweeps}: order {order}"
