"""Reference/disturbance waveforms and the built-in experiment signal set.

Every family is linear in its `amplitude` knob, so scaling a scenario's
amplitude scales every evaluation exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TIME_KINDS = ("zero", "sin", "cos", "ramp_plus_sin", "exp_approach")
FIELD_KINDS = ("zero", "offset_plus_sin", "offset_plus_cos")


@dataclass(frozen=True)
class TimeSignal:
    """amplitude * base(t) with base picked by `kind`:

    sin           -> sin(freq*t + phase) + offset
    cos           -> cos(freq*t + phase) + offset
    ramp_plus_sin -> slope*t + sin(freq*t + phase) + offset
    exp_approach  -> offset - exp(-rate*t)
    zero          -> 0
    """

    kind: str
    amplitude: float = 1.0
    freq: float = 0.0
    phase: float = 0.0
    offset: float = 0.0
    slope: float = 0.0
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in TIME_KINDS:
            raise ValueError(f"unknown time signal kind {self.kind!r}")


def eval_time(sig: TimeSignal, t: float) -> float:
    if sig.kind == "zero":
        return 0.0
    if sig.kind == "sin":
        base = math.sin(sig.freq * t + sig.phase) + sig.offset
    elif sig.kind == "cos":
        base = math.cos(sig.freq * t + sig.phase) + sig.offset
    elif sig.kind == "ramp_plus_sin":
        base = sig.slope * t + math.sin(sig.freq * t + sig.phase) + sig.offset
    else:  # exp_approach
        base = sig.offset - math.exp(-sig.rate * t)
    return sig.amplitude * base


def eval_time_derivative(sig: TimeSignal, t: float) -> float:
    if sig.kind == "zero":
        return 0.0
    if sig.kind == "sin":
        base = sig.freq * math.cos(sig.freq * t + sig.phase)
    elif sig.kind == "cos":
        base = -sig.freq * math.sin(sig.freq * t + sig.phase)
    elif sig.kind == "ramp_plus_sin":
        base = sig.slope + sig.freq * math.cos(sig.freq * t + sig.phase)
    else:
        base = sig.rate * math.exp(-sig.rate * t)
    return sig.amplitude * base


@dataclass(frozen=True)
class FieldSignal:
    """amplitude * (offset + trig(space_freq*x + time_freq*t + phase))."""

    kind: str
    amplitude: float = 1.0
    space_freq: float = 0.0
    time_freq: float = 0.0
    phase: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field signal kind {self.kind!r}")


def eval_field(sig: FieldSignal, x, t: float):
    """Evaluate at scalar or array x; returns the same shape as x."""
    x = np.asarray(x, dtype=float)
    if sig.kind == "zero":
        out = np.zeros_like(x)
    else:
        arg = sig.space_freq * x + sig.time_freq * t + sig.phase
        trig = np.sin(arg) if sig.kind == "offset_plus_sin" else np.cos(arg)
        out = sig.amplitude * (sig.offset + trig)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ScenarioSignals:
    """Full signal set for one run: reference r, per-agent q, d0, d1, f."""

    r: TimeSignal
    q: tuple
    d0: tuple
    d1: tuple
    f: tuple

    def __post_init__(self):
        n = len(self.q)
        if not (len(self.d0) == len(self.d1) == len(self.f) == n):
            raise ValueError("per-agent signal families must share one length")


ZERO_TIME = TimeSignal("zero")
ZERO_FIELD = FieldSignal("zero")


def builtin_scenario(
    name: str,
    d0_knob: float = 1.0,
    d1_knob: float = 1.0,
    a_knob: float = 0.0,
    a0_knob: float = 0.0,
    a1_knob: float = 0.0,
    n_agents: int = 5,
) -> ScenarioSignals:
    """Named signal presets; 'bench' is the five-agent experiment set."""
    if name == "zero":
        return ScenarioSignals(
            r=ZERO_TIME,
            q=(ZERO_TIME,) * n_agents,
            d0=(ZERO_TIME,) * n_agents,
            d1=(ZERO_TIME,) * n_agents,
            f=(ZERO_FIELD,) * n_agents,
        )
    if name != "bench":
        raise ValueError(f"unknown scenario preset {name!r}")
    if n_agents != 5:
        raise ValueError("the bench preset defines signals for exactly 5 agents")

    r = TimeSignal("sin", amplitude=d0_knob, freq=10.0)
    q = (
        TimeSignal("sin", amplitude=d1_knob, freq=2.0),
        TimeSignal("cos", amplitude=0.5 * d1_knob, freq=5.0),
        TimeSignal("ramp_plus_sin", amplitude=d1_knob, freq=1.0, slope=0.1),
        TimeSignal("exp_approach", amplitude=d1_knob, offset=2.0, rate=1.0),
        TimeSignal("sin", amplitude=0.5 * d1_knob, freq=2.0, phase=1.0),
    )
    f = (
        FieldSignal("offset_plus_sin", a_knob, space_freq=1.0, time_freq=10.0, offset=-1.0),
        FieldSignal("offset_plus_cos", a_knob, space_freq=1.0, time_freq=10.0, offset=1.2),
        FieldSignal("offset_plus_sin", a_knob, space_freq=1.0, time_freq=10.0, offset=0.8),
        FieldSignal("offset_plus_sin", a_knob, space_freq=2.0, time_freq=10.0, offset=-1.0),
        FieldSignal("offset_plus_cos", a_knob, space_freq=2.0, time_freq=10.0, offset=1.0),
    )
    d0 = (
        TimeSignal("sin", amplitude=a0_knob, freq=10.0, phase=5.0),
        TimeSignal("cos", amplitude=a0_knob, freq=10.0, phase=2.0),
        TimeSignal("sin", amplitude=a0_knob, freq=10.0, phase=1.0),
        TimeSignal("cos", amplitude=a0_knob, freq=10.0, phase=2.0),
        TimeSignal("sin", amplitude=a0_knob, freq=10.0, phase=4.0),
    )
    d1 = (
        TimeSignal("sin", amplitude=a1_knob, freq=10.0, phase=1.0),
        TimeSignal("sin", amplitude=a1_knob, freq=10.0, phase=2.0),
        TimeSignal("cos", amplitude=a1_knob, freq=10.0),
        TimeSignal("sin", amplitude=a1_knob, freq=10.0),
        TimeSignal("sin", amplitude=a1_knob, freq=10.0, phase=1.0),
    )
    return ScenarioSignals(r=r, q=q, d0=d0, d1=d1, f=f)
