"""Closed-loop state and per-step wiring of the multi-agent system.

One global step advances, in order: the reference field, every agent field,
every decoupling v-field, and every observer field.  Field-dependent boundary
data needed at the new time level are lagged one step by default; optional
fixed-point sweeps re-step with the provisional values to restore second-order
coupling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridField, SpatialGrid, left_flux_values, right_flux
from .params import PlantParams
from .signals import ScenarioSignals, eval_field, eval_time
from .solver import (
    DIRICHLET,
    NEUMANN,
    BoundaryData,
    StepOperator,
    assemble_step_operator,
)


@dataclass(frozen=True)
class CycleTopology:
    """Directed cycle: agent i hears agent i-1, agent 1 hears agent N."""

    n_agents: int

    def pred(self, i: int) -> int:
        """Predecessor of 1-based agent index i."""
        return self.n_agents if i == 1 else i - 1


@dataclass
class InitialData:
    """Node-sampled initial fields; shapes (N, nodes) and (nodes,)."""

    u0: np.ndarray
    uref0: np.ndarray
    v0: np.ndarray
    qhat0: np.ndarray

    def __post_init__(self):
        for name in ("u0", "uref0", "v0", "qhat0"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"initial data {name} contains non-finite values")
            setattr(self, name, arr)


@dataclass
class Accumulators:
    """Running sups over simulation samples feeding the bound functionals."""

    f_sup: np.ndarray
    d0_sup: np.ndarray
    d1_sup: np.ndarray
    q_sup: np.ndarray
    r_sup: float
    f_diff_sup: dict
    d0_diff_sup: dict
    d1_diff_sup: dict


class ClosedLoopState:
    """All 3N+1 fields at one time level plus running-sup accumulators."""

    def __init__(
        self,
        params: PlantParams,
        grid: SpatialGrid,
        init: InitialData,
        scenario: ScenarioSignals,
    ):
        n = params.n_agents
        if len(scenario.q) != n:
            raise ValueError("scenario agent count does not match params")
        if init.u0.shape != (n, grid.n_nodes):
            raise ValueError("initial data shape does not match grid/agents")
        self.params = params
        self.grid = grid
        self.topology = CycleTopology(n)
        self.time = 0.0
        self.u = init.u0.copy()
        self.v = init.v0.copy()
        self.qhat = init.qhat0.copy()
        self.uref = init.uref0.copy()

        nodes = grid.nodes
        self.f_now = np.array(
            [eval_field(scenario.f[i], nodes, 0.0) * np.ones_like(nodes) for i in range(n)]
        )
        pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        self.pairs = pairs
        q0 = np.array([eval_time(sig, 0.0) for sig in scenario.q])
        d00 = np.array([eval_time(sig, 0.0) for sig in scenario.d0])
        d10 = np.array([eval_time(sig, 0.0) for sig in scenario.d1])
        self.acc = Accumulators(
            f_sup=np.max(np.abs(self.f_now), axis=1),
            d0_sup=np.abs(d00),
            d1_sup=np.abs(d10),
            q_sup=np.abs(q0),
            r_sup=abs(eval_time(scenario.r, 0.0)),
            f_diff_sup={
                (i, j): float(np.max(np.abs(self.f_now[i - 1] - self.f_now[j - 1])))
                for (i, j) in pairs
            },
            d0_diff_sup={(i, j): abs(d00[i - 1] - d00[j - 1]) for (i, j) in pairs},
            d1_diff_sup={(i, j): abs(d10[i - 1] - d10[j - 1]) for (i, j) in pairs},
        )

    # GridField views for inspection and metrics.
    def u_field(self, i: int) -> GridField:
        return GridField(self.grid, self.u[i - 1].copy(), self.time)

    def v_field(self, i: int) -> GridField:
        return GridField(self.grid, self.v[i - 1].copy(), self.time)

    def qhat_field(self, i: int) -> GridField:
        return GridField(self.grid, self.qhat[i - 1].copy(), self.time)

    def uref_field(self) -> GridField:
        return GridField(self.grid, self.uref.copy(), self.time)

    def check_finite(self):
        for name, arr in (
            ("u", self.u),
            ("v", self.v),
            ("qhat", self.qhat),
            ("uref", self.uref),
        ):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(
                    f"non-finite values in field {name} at t={self.time}"
                )


def control_u0(i: int, t: float, state: ClosedLoopState, scenario: ScenarioSignals) -> float:
    """Tracking control: r(t) - qhat_i(0,t) + d0_i(t)."""
    return (
        eval_time(scenario.r, t)
        - float(state.qhat[i - 1][0])
        + eval_time(scenario.d0[i - 1], t)
    )


def control_u1(i: int, t: float, state: ClosedLoopState, scenario: ScenarioSignals) -> float:
    """Synchronizing control: k_i (u_pred(1,t) - uref(1,t)) + d1_i(t)."""
    p = state.topology.pred(i)
    return state.params.gain(i) * (
        float(state.u[p - 1][-1]) - float(state.uref[-1])
    ) + eval_time(scenario.d1[i - 1], t)


def observer_left_flux(i: int, state: ClosedLoopState) -> float:
    """Neumann datum for the observer: measured flux difference at x=0."""
    h = state.grid.h
    return left_flux_values(state.u[i - 1], h) - left_flux_values(state.v[i - 1], h)


@dataclass(frozen=True)
class LoopOperators:
    """The two factorized step operators shared by all fields of a run."""

    dirichlet: StepOperator
    neumann: StepOperator
    dt: float

    @staticmethod
    def build(params: PlantParams, grid: SpatialGrid, dt: float) -> "LoopOperators":
        return LoopOperators(
            dirichlet=assemble_step_operator(params, grid, DIRICHLET, dt),
            neumann=assemble_step_operator(params, grid, NEUMANN, dt),
            dt=dt,
        )


def advance(
    state: ClosedLoopState,
    ops: LoopOperators,
    scenario: ScenarioSignals,
    coupling_sweeps: int = 1,
) -> ClosedLoopState:
    """One global step of the closed loop; mutates and returns `state`."""
    if coupling_sweeps < 1:
        raise ValueError("coupling_sweeps must be >= 1")
    params = state.params
    n = params.n_agents
    dt = ops.dt
    t0 = state.time
    t1 = t0 + dt
    nodes = state.grid.nodes
    h = state.grid.h
    op_d = ops.dirichlet
    op_n = ops.neumann

    r0 = eval_time(scenario.r, t0)
    r1 = eval_time(scenario.r, t1)
    q0 = np.array([eval_time(s, t0) for s in scenario.q])
    q1 = np.array([eval_time(s, t1) for s in scenario.q])
    d0_0 = np.array([eval_time(s, t0) for s in scenario.d0])
    d0_1 = np.array([eval_time(s, t1) for s in scenario.d0])
    d1_0 = np.array([eval_time(s, t0) for s in scenario.d1])
    d1_1 = np.array([eval_time(s, t1) for s in scenario.d1])
    f0 = state.f_now
    f1 = np.array(
        [eval_field(scenario.f[i], nodes, t1) * np.ones_like(nodes) for i in range(n)]
    )

    # Reference field first: its new trace is exact for the controls below.
    uref1 = op_d.step_values(
        state.uref,
        BoundaryData(DIRICHLET, r0),
        BoundaryData(DIRICHLET, r1),
    )

    gains = np.array(params.gains)
    preds = np.array([state.topology.pred(i) for i in range(1, n + 1)])
    qhat_left_now = state.qhat[:, 0].copy()
    u_right_now = state.u[:, -1].copy()
    uref_right_now = float(state.uref[-1])
    uref_right_next = float(uref1[-1])

    u0_ctrl_now = r0 - qhat_left_now + d0_0
    u1_ctrl_now = gains * (u_right_now[preds - 1] - uref_right_now) + d1_0

    # Lagged first guess for the new-level coupling data.
    qhat_left_next = qhat_left_now.copy()
    u_right_next = u_right_now.copy()

    u_new = np.empty_like(state.u)
    v_new = np.empty_like(state.v)
    qhat_new = np.empty_like(state.qhat)
    for _ in range(coupling_sweeps):
        u0_ctrl_next = r1 - qhat_left_next + d0_1
        u1_ctrl_next = gains * (u_right_next[preds - 1] - uref_right_next) + d1_1
        for i in range(n):
            bd_u_now = BoundaryData(DIRICHLET, q0[i] + u0_ctrl_now[i], u1_ctrl_now[i])
            bd_u_next = BoundaryData(DIRICHLET, q1[i] + u0_ctrl_next[i], u1_ctrl_next[i])
            u_new[i] = op_d.step_values(state.u[i], bd_u_now, bd_u_next, f0[i], f1[i])
            bd_v_now = BoundaryData(DIRICHLET, u0_ctrl_now[i], u1_ctrl_now[i])
            bd_v_next = BoundaryData(DIRICHLET, u0_ctrl_next[i], u1_ctrl_next[i])
            v_new[i] = op_d.step_values(state.v[i], bd_v_now, bd_v_next)
            g_now = left_flux_values(state.u[i], h) - left_flux_values(state.v[i], h)
            g_next = left_flux_values(u_new[i], h) - left_flux_values(v_new[i], h)
            qhat_new[i] = op_n.step_values(
                state.qhat[i],
                BoundaryData(NEUMANN, g_now),
                BoundaryData(NEUMANN, g_next),
            )
        qhat_left_next = qhat_new[:, 0].copy()
        u_right_next = u_new[:, -1].copy()

    state.u = u_new
    state.v = v_new
    state.qhat = qhat_new
    state.uref = uref1
    state.f_now = f1
    state.time = t1
    state.check_finite()

    acc = state.acc
    np.maximum(acc.f_sup, np.max(np.abs(f1), axis=1), out=acc.f_sup)
    np.maximum(acc.d0_sup, np.abs(d0_1), out=acc.d0_sup)
    np.maximum(acc.d1_sup, np.abs(d1_1), out=acc.d1_sup)
    np.maximum(acc.q_sup, np.abs(q1), out=acc.q_sup)
    acc.r_sup = max(acc.r_sup, abs(r1))
    for (i, j) in state.pairs:
        acc.f_diff_sup[(i, j)] = max(
            acc.f_diff_sup[(i, j)], float(np.max(np.abs(f1[i - 1] - f1[j - 1])))
        )
        acc.d0_diff_sup[(i, j)] = max(
            acc.d0_diff_sup[(i, j)], abs(d0_1[i - 1] - d0_1[j - 1])
        )
        acc.d1_diff_sup[(i, j)] = max(
            acc.d1_diff_sup[(i, j)], abs(d1_1[i - 1] - d1_1[j - 1])
        )
    return state


def compatibility_residuals(
    params: PlantParams,
    grid: SpatialGrid,
    init: InitialData,
    scenario: ScenarioSignals,
) -> dict:
    """Numeric residuals of the t=0 compatibility conditions.

    Reported for diagnostics only; incompatible data are accepted (the run
    then carries a startup layer, not a failure).
    """
    n = params.n_agents
    topo = CycleTopology(n)
    ell = params.robin_l
    u_tilde0 = init.u0 - init.uref0[None, :]

    def rflux(values: np.ndarray) -> float:
        return right_flux(GridField(grid, values))

    res = {
        "dirichlet": [],   # tracking-error value condition at x=0
        "robin": [],       # tracking-error flux condition at x=1
        "v_dirichlet": [],
        "v_robin": [],
    }
    for i in range(1, n + 1):
        q_i0 = eval_time(scenario.q[i - 1], 0.0)
        d0_i0 = eval_time(scenario.d0[i - 1], 0.0)
        d1_i0 = eval_time(scenario.d1[i - 1], 0.0)
        res["dirichlet"].append(
            abs(u_tilde0[i - 1][0] - (q_i0 + d0_i0 - init.qhat0[i - 1][0]))
        )
        p = topo.pred(i)
        res["robin"].append(
            abs(
                rflux(u_tilde0[i - 1])
                - (
                    -ell * u_tilde0[i - 1][-1]
                    + params.gain(i) * u_tilde0[p - 1][-1]
                    + d1_i0
                )
            )
        )
        u0_ctrl = (
            eval_time(scenario.r, 0.0) - init.qhat0[i - 1][0] + d0_i0
        )
        u1_ctrl = (
            params.gain(i) * (init.u0[p - 1][-1] - init.uref0[-1]) + d1_i0
        )
        res["v_dirichlet"].append(abs(init.v0[i - 1][0] - u0_ctrl))
        res["v_robin"].append(
            abs(rflux(init.v0[i - 1]) + ell * init.v0[i - 1][-1] - u1_ctrl)
        )
    res["ref_dirichlet"] = abs(init.uref0[0] - eval_time(scenario.r, 0.0))
    res["ref_robin"] = abs(rflux(init.uref0) + ell * init.uref0[-1])
    return res
