"""Simulator and robustness-bound auditor for synchronization of
reaction-diffusion multi-agent systems with boundary disturbance observers."""

from .grid import GridField, SpatialGrid, left_flux, max_norm, trace
from .params import PlantParams
from .signals import (
    FieldSignal,
    ScenarioSignals,
    TimeSignal,
    builtin_scenario,
    eval_field,
    eval_time,
)
from .solver import BoundaryData, StepOperator, assemble_step_operator, step
from .loop import (
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
from .bounds import (
    TheoremConstants,
    compute_constants,
    disturbance_functional,
    resolvent_determinant,
    rhs_theorem1,
    rhs_theorem2,
    rhs_theorem3,
    rhs_theorem4,
)
from .metrics import (
    ErrorSeries,
    closed_loop_norm,
    estimation_error,
    fit_decay_rate,
    sync_error_norm,
    tracking_error_norm,
)
from .scenario import ScenarioConfig, load_scenario, bench_config
from .runner import RunResult, VerificationReport, run, sweep, verify

__version__ = "0.1.0"
