"""Scenario configuration: TOML loading, presets, and validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .grid import SpatialGrid
from .loop import InitialData
from .params import PlantParams
from .signals import (
    FieldSignal,
    ScenarioSignals,
    TimeSignal,
    builtin_scenario,
)


class ConfigError(ValueError):
    """Invalid or incomplete scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    plant: PlantParams
    intervals: int = 200
    dt: float = 1e-3
    horizon: float = 5.0
    sigmas: tuple = ()
    cadence: int = 10
    eps_tol: float = 0.05
    coupling_sweeps: int = 2
    signal_preset: str = "bench"
    knobs: dict = field(default_factory=dict)
    signals: ScenarioSignals | None = None
    initial_preset: str = "bench"
    initial: InitialData | None = None
    sweep: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigError("horizon must be > 0")
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.eps_tol < 0:
            raise ConfigError("eps_tol must be >= 0")
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if not self.sigmas:
            object.__setattr__(self, "sigmas", (self.plant.lam / 2.0,))
        for s in self.sigmas:
            if not (0.0 < s < self.plant.lam):
                raise ConfigError(f"sigma={s} outside (0, lambda)")

    @property
    def grid(self) -> SpatialGrid:
        return SpatialGrid(self.intervals)

    def resolved_signals(self) -> ScenarioSignals:
        if self.signals is not None:
            return self.signals
        k = self.knobs
        return builtin_scenario(
            self.signal_preset,
            d0_knob=k.get("D0", 1.0),
            d1_knob=k.get("D1", 1.0),
            a_knob=k.get("A", 0.0),
            a0_knob=k.get("A0", 0.0),
            a1_knob=k.get("A1", 0.0),
            n_agents=self.plant.n_agents,
        )

    def resolved_initial(self) -> InitialData:
        if self.initial is not None:
            return self.initial
        return initial_preset(self.initial_preset, self.plant, self.grid)

    def with_knobs(self, **knobs) -> "ScenarioConfig":
        merged = dict(self.knobs)
        merged.update(knobs)
        return replace(self, knobs=merged, signals=None)


# Experiment preset: five agents, alpha=1, lambda=5, l=1, k=(0.1..0.5).
BENCH_PLANT = dict(alpha=1.0, lam=5.0, robin_l=1.0,
                  gains=(0.1, 0.2, 0.3, 0.4, 0.5), n_agents=5)

_PI = math.pi

_BENCH_U0 = (
    lambda x: -0.2 * np.sin(_PI * (x - 0.5)),
    lambda x: 5.0 * np.sin(1.5 * _PI * (x - 0.5)),
    lambda x: 4.0 * np.sin(_PI * (2.0 * x - 0.5)),
    lambda x: 3.5 * np.cos(_PI * (x - 1.0)),
    lambda x: 4.0 * np.cos(_PI * (2.0 * x - 1.0)),
)

# The fourth entry is read as 1.6*cos(2*pi*x + 1.2).
_BENCH_QTILDE0 = (
    lambda x: -1.6 * np.sin(_PI * (x - 0.5)),
    lambda x: 2.0 * np.sin(1.5 * _PI * (x - 0.5)),
    lambda x: 2.0 * np.sin(_PI * (2.0 * x - 0.5)),
    lambda x: 1.6 * np.cos(2.0 * _PI * x + 1.2),
    lambda x: 1.2 * np.cos(_PI * (2.0 * x - 1.0)),
)


def initial_preset(name: str, plant: PlantParams, grid: SpatialGrid) -> InitialData:
    n = plant.n_agents
    nodes = grid.nodes
    if name == "zero":
        z = np.zeros((n, grid.n_nodes))
        return InitialData(z.copy(), np.zeros(grid.n_nodes), z.copy(), z.copy())
    if name != "bench":
        raise ConfigError(f"unknown initial-data preset {name!r}")
    if n != 5:
        raise ConfigError("the bench initial data require exactly 5 agents")
    u0 = np.array([f(nodes) for f in _BENCH_U0])
    qtilde0 = np.array([f(nodes) for f in _BENCH_QTILDE0])
    uref0 = 2.8 * np.sin(0.5 * _PI * (nodes - 0.5))
    qhat0 = np.zeros_like(u0)
    v0 = u0 - qtilde0
    return InitialData(u0, uref0, v0, qhat0)


def _time_signal_from_table(tbl: dict) -> TimeSignal:
    try:
        return TimeSignal(**tbl)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad time-signal table {tbl}: {exc}") from exc


def _field_signal_from_table(tbl: dict) -> FieldSignal:
    try:
        return FieldSignal(**tbl)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad field-signal table {tbl}: {exc}") from exc


def _initial_profile(tbl: dict, nodes: np.ndarray) -> np.ndarray:
    kind = tbl.get("kind", "const")
    amp = float(tbl.get("amplitude", 0.0))
    freq = float(tbl.get("freq", 0.0))
    phase = float(tbl.get("phase", 0.0))
    offset = float(tbl.get("offset", 0.0))
    if kind == "const":
        return np.full_like(nodes, amp + offset)
    if kind == "sin":
        return amp * np.sin(freq * nodes + phase) + offset
    if kind == "cos":
        return amp * np.cos(freq * nodes + phase) + offset
    raise ConfigError(f"unknown initial profile kind {kind!r}")


def load_scenario(path) -> ScenarioConfig:
    """Load and validate a TOML scenario file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    plant_tbl = raw.get("plant", {})
    for key in ("lambda", "alpha", "l", "gains"):
        if key not in plant_tbl:
            raise ConfigError(f"[plant] is missing mandatory key {key!r}")
    gains = tuple(plant_tbl["gains"])
    try:
        plant = PlantParams(
            alpha=float(plant_tbl["alpha"]),
            lam=float(plant_tbl["lambda"]),
            robin_l=float(plant_tbl["l"]),
            gains=gains,
            n_agents=len(gains),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    grid_tbl = raw.get("grid", {})
    sig_tbl = raw.get("signals", {"preset": "bench"})
    init_tbl = raw.get("initial", {"preset": "bench"})
    ver_tbl = raw.get("verification", {})
    out_tbl = raw.get("output", {})

    knobs = {k: float(sig_tbl[k]) for k in ("D0", "D1", "A", "A0", "A1") if k in sig_tbl}

    signals = None
    if "preset" not in sig_tbl:
        try:
            signals = ScenarioSignals(
                r=_time_signal_from_table(sig_tbl.get("r", {"kind": "zero"})),
                q=tuple(_time_signal_from_table(t) for t in sig_tbl["q"]),
                d0=tuple(_time_signal_from_table(t) for t in sig_tbl["d0"]),
                d1=tuple(_time_signal_from_table(t) for t in sig_tbl["d1"]),
                f=tuple(_field_signal_from_table(t) for t in sig_tbl["f"]),
            )
        except KeyError as exc:
            raise ConfigError(
                f"explicit [signals] must define q, d0, d1, f (missing {exc})"
            ) from exc
        if len(signals.q) != plant.n_agents:
            raise ConfigError("signal count does not match agent count")

    initial = None
    init_preset = init_tbl.get("preset", None)
    if init_preset is None:
        grid = SpatialGrid(int(grid_tbl.get("intervals", 200)))
        nodes = grid.nodes
        try:
            u0 = np.array([_initial_profile(t, nodes) for t in init_tbl["u0"]])
            uref0 = _initial_profile(init_tbl["uref0"], nodes)
            qhat0 = np.array(
                [_initial_profile(t, nodes) for t in init_tbl.get(
                    "qhat0", [{"kind": "const"}] * plant.n_agents)]
            )
            if "v0" in init_tbl:
                v0 = np.array([_initial_profile(t, nodes) for t in init_tbl["v0"]])
            elif "qtilde0" in init_tbl:
                # v0 chosen so that u0 - v0 - qhat0 equals the given qtilde0
                qt = np.array([_initial_profile(t, nodes) for t in init_tbl["qtilde0"]])
                v0 = u0 - qt - qhat0
            else:
                v0 = u0.copy()
            initial = InitialData(u0, uref0, v0, qhat0)
        except KeyError as exc:
            raise ConfigError(f"[initial] missing key {exc}") from exc
        if u0.shape[0] != plant.n_agents:
            raise ConfigError("initial data count does not match agent count")

    dt = float(grid_tbl.get("dt", 1e-3))
    if dt <= 0:
        raise ConfigError(f"dt must be > 0, got dt={dt}")

    sigmas = ver_tbl.get("sigma", [])
    if isinstance(sigmas, (int, float)):
        sigmas = [sigmas]

    return ScenarioConfig(
        plant=plant,
        intervals=int(grid_tbl.get("intervals", 200)),
        dt=dt,
        horizon=float(grid_tbl.get("horizon", 5.0)),
        sigmas=tuple(float(s) for s in sigmas),
        cadence=int(out_tbl.get("cadence", 10)),
        eps_tol=float(ver_tbl.get("eps_tol", 0.05)),
        coupling_sweeps=int(raw.get("solver", {}).get("coupling_sweeps", 2)),
        signal_preset=sig_tbl.get("preset", "bench"),
        knobs=knobs,
        signals=signals,
        initial_preset=init_preset or "bench",
        initial=initial,
        sweep={k: list(v) for k, v in raw.get("sweep", {}).items()},
    )


def bench_config(**overrides) -> ScenarioConfig:
    """Programmatic shortcut for the experiment preset."""
    plant = PlantParams(**BENCH_PLANT)
    defaults = dict(plant=plant, signal_preset="bench", initial_preset="bench")
    defaults.update(overrides)
    return ScenarioConfig(**defaults)
