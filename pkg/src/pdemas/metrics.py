"""Left-hand-side quantities of the robustness bounds, from simulated state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .loop import ClosedLoopState
from .signals import ScenarioSignals, eval_time


def estimation_error(i: int, state: ClosedLoopState, scenario: ScenarioSignals) -> float:
    """|q_i(t) - qhat_i(0,t)| at the state's current time."""
    return abs(
        eval_time(scenario.q[i - 1], state.time) - float(state.qhat[i - 1][0])
    )


def tracking_error_norm(i: int, state: ClosedLoopState) -> float:
    return float(np.max(np.abs(state.u[i - 1] - state.uref)))


def sync_error_norm(i: int, j: int, state: ClosedLoopState) -> float:
    return float(np.max(np.abs(state.u[i - 1] - state.u[j - 1])))


def q_tilde_norm(i: int, state: ClosedLoopState) -> float:
    """Max-norm of the observer error field u - v - qhat."""
    return float(
        np.max(np.abs(state.u[i - 1] - state.v[i - 1] - state.qhat[i - 1]))
    )


def closed_loop_norm(i: int, state: ClosedLoopState) -> float:
    """Sum of the four max-norms entering the ISS bound."""
    return float(
        np.max(np.abs(state.u[i - 1]))
        + np.max(np.abs(state.uref))
        + np.max(np.abs(state.v[i - 1]))
        + np.max(np.abs(state.qhat[i - 1]))
    )


@dataclass
class ErrorSeries:
    """Sampled time series of every bound LHS plus the accumulator snapshots."""

    n_agents: int
    pairs: list
    times: list = field(default_factory=list)
    estimation: list = field(default_factory=list)      # per sample: (N,)
    tracking: list = field(default_factory=list)        # per sample: (N,)
    sync: list = field(default_factory=list)            # per sample: (n_pairs,)
    q_tilde: list = field(default_factory=list)         # per sample: (N,)
    closed_loop: list = field(default_factory=list)     # per sample: (N,)
    j_func: list = field(default_factory=list)          # scalar J(t)
    f_sup: list = field(default_factory=list)
    d0_sup: list = field(default_factory=list)
    d1_sup: list = field(default_factory=list)
    q_sup: list = field(default_factory=list)
    r_sup: list = field(default_factory=list)
    f_diff_sup: list = field(default_factory=list)      # per sample: (n_pairs,)
    d0_diff_sup: list = field(default_factory=list)
    d1_diff_sup: list = field(default_factory=list)

    def record(self, state: ClosedLoopState, scenario: ScenarioSignals):
        n = self.n_agents
        self.times.append(state.time)
        self.estimation.append(
            [estimation_error(i, state, scenario) for i in range(1, n + 1)]
        )
        self.tracking.append([tracking_error_norm(i, state) for i in range(1, n + 1)])
        self.sync.append([sync_error_norm(i, j, state) for (i, j) in self.pairs])
        self.q_tilde.append([q_tilde_norm(i, state) for i in range(1, n + 1)])
        cl = [closed_loop_norm(i, state) for i in range(1, n + 1)]
        self.closed_loop.append(cl)
        self.j_func.append(max(cl))
        acc = state.acc
        self.f_sup.append(acc.f_sup.tolist())
        self.d0_sup.append(acc.d0_sup.tolist())
        self.d1_sup.append(acc.d1_sup.tolist())
        self.q_sup.append(acc.q_sup.tolist())
        self.r_sup.append(acc.r_sup)
        self.f_diff_sup.append([acc.f_diff_sup[p] for p in self.pairs])
        self.d0_diff_sup.append([acc.d0_diff_sup[p] for p in self.pairs])
        self.d1_diff_sup.append([acc.d1_diff_sup[p] for p in self.pairs])

    def as_arrays(self) -> dict:
        out = {"times": np.array(self.times)}
        for name in (
            "estimation",
            "tracking",
            "sync",
            "q_tilde",
            "closed_loop",
            "j_func",
            "f_sup",
            "d0_sup",
            "d1_sup",
            "q_sup",
            "r_sup",
            "f_diff_sup",
            "d0_diff_sup",
            "d1_diff_sup",
        ):
            out[name] = np.array(getattr(self, name))
        return out


def fit_decay_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of -log(value) versus t.

    Raises if any value in the window is nonpositive (numerical floor hit);
    callers should shrink the window.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two samples to fit a decay rate")
    if np.any(values <= 0.0):
        raise ValueError("nonpositive values in fit window")
    slope = np.polyfit(times, -np.log(values), 1)[0]
    return float(slope)
