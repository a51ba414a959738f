"""Run simulations, verify the four bounds against them, sweep, converge."""

from __future__ import annotations

import csv
import json
import math
import time as _time
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import bounds, metrics
from .grid import GridField, SpatialGrid, max_norm
from .loop import (
    ClosedLoopState,
    InitialData,
    LoopOperators,
    advance,
    compatibility_residuals,
)
from .scenario import ScenarioConfig
from .signals import ScenarioSignals
from .solver import DIRICHLET, BoundaryData, assemble_step_operator

_FMT = "%.17g"


@dataclass
class InitNorms:
    """Discrete max-norms of the initial data feeding every bound RHS."""

    q_tilde0: np.ndarray          # per agent
    u_tilde0: np.ndarray          # per agent
    u_tilde0_pair: dict           # per (i, j)
    q_tilde0_pair: dict
    u0_max: float
    uref0_norm: float
    v0_max: float
    qhat0_max: float

    @property
    def u_tilde0_max(self) -> float:
        return float(np.max(self.u_tilde0))

    @property
    def q_tilde0_max(self) -> float:
        return float(np.max(self.q_tilde0))

    @property
    def u_tilde0_pair_max(self) -> float:
        return max(self.u_tilde0_pair.values())

    @property
    def q_tilde0_pair_max(self) -> float:
        return max(self.q_tilde0_pair.values())


def initial_norms(init: InitialData, pairs) -> InitNorms:
    qt0 = init.u0 - init.v0 - init.qhat0
    ut0 = init.u0 - init.uref0[None, :]
    return InitNorms(
        q_tilde0=np.max(np.abs(qt0), axis=1),
        u_tilde0=np.max(np.abs(ut0), axis=1),
        u_tilde0_pair={
            (i, j): float(np.max(np.abs(ut0[i - 1] - ut0[j - 1]))) for (i, j) in pairs
        },
        q_tilde0_pair={
            (i, j): float(np.max(np.abs(qt0[i - 1] - qt0[j - 1]))) for (i, j) in pairs
        },
        u0_max=float(np.max(np.abs(init.u0))),
        uref0_norm=float(np.max(np.abs(init.uref0))),
        v0_max=float(np.max(np.abs(init.v0))),
        qhat0_max=float(np.max(np.abs(init.qhat0))),
    )


@dataclass
class RunResult:
    config: ScenarioConfig
    series: dict                  # ErrorSeries.as_arrays()
    pairs: list
    init_norms: InitNorms
    compat: dict
    runtime_s: float
    det_diagnostic: float


def run(config: ScenarioConfig, outdir=None) -> RunResult:
    """Simulate one scenario; optionally write CSVs and a report directory."""
    t_start = _time.perf_counter()
    grid = config.grid
    scenario = config.resolved_signals()
    init = config.resolved_initial()
    state = ClosedLoopState(config.plant, grid, init, scenario)
    ops = LoopOperators.build(config.plant, grid, config.dt)

    series = metrics.ErrorSeries(config.plant.n_agents, state.pairs)
    series.record(state, scenario)

    n_steps = int(round(config.horizon / config.dt))
    for step_idx in range(1, n_steps + 1):
        advance(state, ops, scenario, config.coupling_sweeps)
        if step_idx % config.cadence == 0 or step_idx == n_steps:
            series.record(state, scenario)

    result = RunResult(
        config=config,
        series=series.as_arrays(),
        pairs=state.pairs,
        init_norms=initial_norms(init, state.pairs),
        compat=compatibility_residuals(config.plant, grid, init, scenario),
        runtime_s=_time.perf_counter() - t_start,
        det_diagnostic=bounds.resolvent_determinant(config.plant),
    )
    if outdir is not None:
        write_run(result, Path(outdir))
    return result


# ---------------------------------------------------------------------------
# Verification

@dataclass
class BoundCheck:
    theorem: int
    index: str                    # "i" or "i,j"
    sigma: float
    worst_margin: float           # min over samples of rhs*(1+eps) - lhs
    worst_time: float
    passed: bool


@dataclass
class VerificationReport:
    checks: list
    eps_tol: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def worst(self, theorem: int, sigma: float | None = None):
        sel = [
            c
            for c in self.checks
            if c.theorem == theorem and (sigma is None or c.sigma == sigma)
        ]
        return min(sel, key=lambda c: c.worst_margin)


def _margin_check(theorem, index, sigma, times, lhs, rhs, eps) -> BoundCheck:
    margins = rhs * (1.0 + eps) - lhs
    k = int(np.argmin(margins))
    return BoundCheck(
        theorem=theorem,
        index=index,
        sigma=sigma,
        worst_margin=float(margins[k]),
        worst_time=float(times[k]),
        passed=bool(margins[k] >= 0.0),
    )


def verify(result: RunResult, config: ScenarioConfig | None = None) -> VerificationReport:
    """Check every bound at every sample, agent/pair, and sigma."""
    config = config or result.config
    plant = config.plant
    n = plant.n_agents
    eps = config.eps_tol
    s = result.series
    times = s["times"]
    norms = result.init_norms
    pairs = result.pairs
    checks = []

    for sigma in config.sigmas:
        tc = bounds.compute_constants(plant, sigma)
        decay = np.exp(-sigma * times)
        d_fac = 2.0 / (plant.lam - sigma)

        d_series = (
            d_fac * np.max(s["f_sup"], axis=1)
            + np.max(s["d0_sup"], axis=1)
            + np.max(s["d1_sup"], axis=1) / plant.robin_l
        )
        d_tilde_series = (
            d_fac * np.max(s["f_diff_sup"], axis=1)
            + np.max(s["d0_diff_sup"], axis=1)
            + np.max(s["d1_diff_sup"], axis=1) / plant.robin_l
        )

        for i in range(1, n + 1):
            rhs1 = (
                decay * norms.q_tilde0[i - 1]
                + s["f_sup"][:, i - 1] / (plant.lam - sigma)
            )
            checks.append(
                _margin_check(1, str(i), sigma, times, s["estimation"][:, i - 1], rhs1, eps)
            )

            ct = tc.c_tilde_i(i)
            rhs2 = ct * d_series + ct * decay * (
                norms.u_tilde0_max + norms.q_tilde0_max
            )
            checks.append(
                _margin_check(2, str(i), sigma, times, s["tracking"][:, i - 1], rhs2, eps)
            )

            rhs4 = (
                (1.0 + 2.0 * ct) * decay * (2.0 * norms.u0_max + norms.uref0_norm)
                + (4.0 + 2.0 * ct) * decay * (norms.v0_max + norms.qhat0_max)
                + 3.0 * s["r_sup"]
                + 2.0 * s["q_sup"][:, i - 1]
                + (1.0 + 2.0 * ct) * d_series
            )
            checks.append(
                _margin_check(4, str(i), sigma, times, s["closed_loop"][:, i - 1], rhs4, eps)
            )

        for pk, (i, j) in enumerate(pairs):
            lhs = s["sync"][:, pk]
            pair_init = decay * (
                norms.u_tilde0_pair[(i, j)] + norms.q_tilde0_pair[(i, j)]
            )
            agent_init = decay * (norms.u_tilde0_max + norms.q_tilde0_max)
            # The bound holds for both orientations of the pair; check both
            # so the reported pair margin is symmetric.
            sub = []
            for a, b in ((i, j), (j, i)):
                rhs3 = (
                    tc.c_tilde_i(b) * d_tilde_series
                    + tc.c_tilde_i(b) * pair_init
                    + tc.h_tilde_ij(a, b) * tc.c_tilde_i(a) * (d_series + agent_init)
                )
                sub.append(_margin_check(3, f"{i},{j}", sigma, times, lhs, rhs3, eps))
            worst = min(sub, key=lambda c: c.worst_margin)
            checks.append(worst)

    return VerificationReport(checks=checks, eps_tol=eps)


# ---------------------------------------------------------------------------
# File output and verify-from-files

def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_FMT % v for v in row])


def _pair_names(prefix, pairs):
    return [f"{prefix}_{i}{j}" for (i, j) in pairs]


def write_run(result: RunResult, outdir: Path):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    s = result.series
    t = s["times"]
    n = result.config.plant.n_agents
    pairs = result.pairs

    def stack(*cols):
        return np.column_stack(cols)

    _write_csv(
        outdir / "tracking.csv",
        ["t"] + [f"u_tilde_{i}" for i in range(1, n + 1)],
        stack(t, s["tracking"]),
    )
    _write_csv(
        outdir / "sync.csv",
        ["t"] + _pair_names("u", pairs),
        stack(t, s["sync"]),
    )
    _write_csv(
        outdir / "estimation.csv",
        ["t"] + [f"q_err_{i}" for i in range(1, n + 1)],
        stack(t, s["estimation"]),
    )
    _write_csv(
        outdir / "qtilde.csv",
        ["t"] + [f"q_tilde_{i}" for i in range(1, n + 1)],
        stack(t, s["q_tilde"]),
    )
    _write_csv(
        outdir / "closed_loop.csv",
        ["t"] + [f"closed_loop_{i}" for i in range(1, n + 1)] + ["J"],
        stack(t, s["closed_loop"], s["j_func"]),
    )
    _write_csv(
        outdir / "functionals.csv",
        (
            ["t"]
            + [f"f_sup_{i}" for i in range(1, n + 1)]
            + [f"d0_sup_{i}" for i in range(1, n + 1)]
            + [f"d1_sup_{i}" for i in range(1, n + 1)]
            + [f"q_sup_{i}" for i in range(1, n + 1)]
            + ["r_sup"]
            + _pair_names("f_diff", pairs)
            + _pair_names("d0_diff", pairs)
            + _pair_names("d1_diff", pairs)
        ),
        stack(
            t,
            s["f_sup"],
            s["d0_sup"],
            s["d1_sup"],
            s["q_sup"],
            s["r_sup"],
            s["f_diff_sup"],
            s["d0_diff_sup"],
            s["d1_diff_sup"],
        ),
    )

    norms = result.init_norms
    report = {
        "n_agents": n,
        "pairs": [list(p) for p in pairs],
        "plant": {
            "alpha": result.config.plant.alpha,
            "lambda": result.config.plant.lam,
            "l": result.config.plant.robin_l,
            "gains": list(result.config.plant.gains),
        },
        "grid": {
            "intervals": result.config.intervals,
            "dt": result.config.dt,
            "horizon": result.config.horizon,
        },
        "knobs": result.config.knobs,
        "sigmas": list(result.config.sigmas),
        "eps_tol": result.config.eps_tol,
        "init_norms": {
            "q_tilde0": norms.q_tilde0.tolist(),
            "u_tilde0": norms.u_tilde0.tolist(),
            "u_tilde0_pair": {f"{i},{j}": v for (i, j), v in norms.u_tilde0_pair.items()},
            "q_tilde0_pair": {f"{i},{j}": v for (i, j), v in norms.q_tilde0_pair.items()},
            "u0_max": norms.u0_max,
            "uref0_norm": norms.uref0_norm,
            "v0_max": norms.v0_max,
            "qhat0_max": norms.qhat0_max,
        },
        "compatibility_residuals": {
            k: (v if isinstance(v, float) else list(v))
            for k, v in result.compat.items()
        },
        "det_diagnostic": result.det_diagnostic,
        "runtime_s": result.runtime_s,
        "constants": {
            str(sigma): _constants_dump(result.config.plant, sigma)
            for sigma in result.config.sigmas
        },
    }
    with open(outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _write_gnuplot_script(outdir, n, pairs)


def _constants_dump(plant, sigma) -> dict:
    tc = bounds.compute_constants(plant, sigma)
    return {
        "sigma": sigma,
        "script_N": tc.script_n,
        "M": tc.m.tolist(),
        "C": tc.c.tolist(),
        "C_tilde": tc.c_tilde.tolist(),
        "H": tc.h.tolist(),
        "H_tilde": tc.h_tilde.tolist(),
    }


def _write_gnuplot_script(outdir: Path, n: int, pairs):
    lines = [
        "# gnuplot script; run from this directory",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 't'",
    ]
    for name, count in (
        ("tracking", n),
        ("estimation", n),
        ("qtilde", n),
        ("sync", len(pairs)),
        ("closed_loop", n + 1),
    ):
        cols = ", ".join(
            f"'{name}.csv' using 1:{c} with lines" for c in range(2, count + 2)
        )
        lines.append(f"plot {cols}")
        lines.append("pause -1")
    (outdir / "plots.gp").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return header, data


def load_run(rundir, config: ScenarioConfig) -> RunResult:
    """Rebuild a RunResult from an output directory (CSV round trip)."""
    rundir = Path(rundir)
    with open(rundir / "report.json", encoding="utf-8") as fh:
        report = json.load(fh)
    n = report["n_agents"]
    pairs = [tuple(p) for p in report["pairs"]]
    npairs = len(pairs)

    _, tr = _read_csv(rundir / "tracking.csv")
    _, sy = _read_csv(rundir / "sync.csv")
    _, es = _read_csv(rundir / "estimation.csv")
    _, qt = _read_csv(rundir / "qtilde.csv")
    _, cl = _read_csv(rundir / "closed_loop.csv")
    _, fn = _read_csv(rundir / "functionals.csv")

    series = {
        "times": tr[:, 0],
        "tracking": tr[:, 1:],
        "sync": sy[:, 1:],
        "estimation": es[:, 1:],
        "q_tilde": qt[:, 1:],
        "closed_loop": cl[:, 1 : n + 1],
        "j_func": cl[:, n + 1],
    }
    off = 1
    for name, width in (
        ("f_sup", n),
        ("d0_sup", n),
        ("d1_sup", n),
        ("q_sup", n),
        ("r_sup", 1),
        ("f_diff_sup", npairs),
        ("d0_diff_sup", npairs),
        ("d1_diff_sup", npairs),
    ):
        block = fn[:, off : off + width]
        series[name] = block[:, 0] if width == 1 else block
        off += width

    inorm = report["init_norms"]
    norms = InitNorms(
        q_tilde0=np.array(inorm["q_tilde0"]),
        u_tilde0=np.array(inorm["u_tilde0"]),
        u_tilde0_pair={
            tuple(int(x) for x in k.split(",")): v
            for k, v in inorm["u_tilde0_pair"].items()
        },
        q_tilde0_pair={
            tuple(int(x) for x in k.split(",")): v
            for k, v in inorm["q_tilde0_pair"].items()
        },
        u0_max=inorm["u0_max"],
        uref0_norm=inorm["uref0_norm"],
        v0_max=inorm["v0_max"],
        qhat0_max=inorm["qhat0_max"],
    )
    return RunResult(
        config=config,
        series=series,
        pairs=pairs,
        init_norms=norms,
        compat=report["compatibility_residuals"],
        runtime_s=report["runtime_s"],
        det_diagnostic=report["det_diagnostic"],
    )


# ---------------------------------------------------------------------------
# Sweeps

DEFAULT_SWEEP = {"A": [0.0, 2.0, 4.0], "A0": [0.0, 3.0, 5.0], "A1": [0.0, 3.0, 5.0]}


def sweep(config: ScenarioConfig, outdir=None):
    """Run every knob combination; returns [(knobs, result, report)]."""
    axes = config.sweep or DEFAULT_SWEEP
    keys = sorted(axes)
    entries = []
    for combo in product(*(axes[k] for k in keys)):
        knobs = dict(zip(keys, (float(v) for v in combo)))
        sub = config.with_knobs(**knobs)
        tag = "_".join(f"{k}{v:g}" for k, v in knobs.items())
        sub_out = None if outdir is None else Path(outdir) / tag
        result = run(sub, sub_out)
        report = verify(result)
        entries.append((knobs, result, report))
    if outdir is not None:
        summary = [
            {
                "knobs": knobs,
                "passed": report.passed,
                "worst_margins": {
                    th: report.worst(th).worst_margin for th in (1, 2, 3, 4)
                },
            }
            for (knobs, _, report) in entries
        ]
        with open(Path(outdir) / "sweep_summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
    return entries


# ---------------------------------------------------------------------------
# Convergence studies

def smallest_eigenvalue_dirichlet_robin(robin_l: float) -> float:
    """Smallest gamma > 0 with gamma*cos(gamma) = -l*sin(gamma)."""
    f = lambda g: g * math.cos(g) + robin_l * math.sin(g)
    return _bisect(f, math.pi / 2 + 1e-12, math.pi - 1e-12)


def smallest_eigenvalue_neumann_robin(robin_l: float) -> float:
    """Smallest gamma > 0 with gamma*sin(gamma) = l*cos(gamma)."""
    f = lambda g: g * math.sin(g) - robin_l * math.cos(g)
    return _bisect(f, 1e-12, math.pi / 2 - 1e-12)


def _bisect(f, lo, hi, tol=1e-14):
    flo = f(lo)
    if flo * f(hi) > 0:
        raise ValueError("bisection bracket does not straddle a root")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if flo * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def eigenmode_error(plant, intervals, dt, t_final) -> float:
    """Max-norm error vs the analytic decaying mode at t_final."""
    gamma = smallest_eigenvalue_dirichlet_robin(plant.robin_l)
    grid = SpatialGrid(intervals)
    op = assemble_step_operator(plant, grid, DIRICHLET, dt)
    w = np.sin(gamma * grid.nodes)
    zero_bd = BoundaryData(DIRICHLET, 0.0)
    n_steps = int(round(t_final / dt))
    for _ in range(n_steps):
        w = op.step_values(w, zero_bd, zero_bd)
    exact = math.exp(-(plant.lam + plant.alpha * gamma**2) * t_final) * np.sin(
        gamma * grid.nodes
    )
    return float(np.max(np.abs(w - exact)))


def convergence_study(config: ScenarioConfig, levels: int, problem: str = "eigenmode") -> dict:
    """Observed orders of accuracy from successive refinements."""
    if levels < 3:
        raise ValueError("need >= 3 levels for an order estimate")
    plant = config.plant
    if problem == "eigenmode":
        t_final = 0.2
        base_m, base_dt = 25, 8e-3
        spatial_errors = [
            eigenmode_error(plant, base_m * 2**k, base_dt / 2**k, t_final)
            for k in range(levels)
        ]
        spatial_orders = [
            math.log2(spatial_errors[k] / spatial_errors[k + 1])
            for k in range(levels - 1)
        ]
        # Temporal self-convergence at fixed (fine) grid isolates the dt error.
        # Base dt must divide t_final so every level ends at the same time.
        m_fixed = 200
        sols = []
        for k in range(levels):
            dt = 25e-3 / 2**k
            grid = SpatialGrid(m_fixed)
            op = assemble_step_operator(plant, grid, DIRICHLET, dt)
            gamma = smallest_eigenvalue_dirichlet_robin(plant.robin_l)
            w = np.sin(gamma * grid.nodes)
            zero_bd = BoundaryData(DIRICHLET, 0.0)
            for _ in range(int(round(t_final / dt))):
                w = op.step_values(w, zero_bd, zero_bd)
            sols.append(w)
        diffs = [
            float(np.max(np.abs(sols[k] - sols[k + 1]))) for k in range(levels - 1)
        ]
        temporal_orders = [
            math.log2(diffs[k] / diffs[k + 1]) for k in range(levels - 2)
        ]
        return {
            "spatial_errors": spatial_errors,
            "spatial_orders": spatial_orders,
            "temporal_diffs": diffs,
            "temporal_orders": temporal_orders,
        }
    if problem == "bench":
        # Self-convergence in dt of the worst tracking norm at t = horizon.
        values = []
        dt0 = config.dt
        for k in range(levels):
            sub = ScenarioConfig(
                plant=plant,
                intervals=config.intervals,
                dt=dt0 / 2**k,
                horizon=config.horizon,
                sigmas=config.sigmas,
                cadence=10**9,  # only endpoint needed
                eps_tol=config.eps_tol,
                coupling_sweeps=config.coupling_sweeps,
                signal_preset=config.signal_preset,
                knobs=config.knobs,
                signals=config.signals,
                initial_preset=config.initial_preset,
                initial=config.initial,
            )
            result = run(sub)
            values.append(float(np.max(result.series["tracking"][-1])))
        diffs = [abs(values[k] - values[k + 1]) for k in range(levels - 1)]
        orders = [math.log2(diffs[k] / diffs[k + 1]) for k in range(levels - 2)]
        return {"values": values, "diffs": diffs, "orders": orders}
    raise ValueError(f"unknown convergence problem {problem!r}")
