"""Backward-Euler time integration of the coupled mechanics / mass-transport system.

Every step solves, with Newton on all unknowns at once, the instantaneous
mechanical balance together with ``D (m - m_prev)/dt = rho^2 mu''``. The
mechanics has no time derivative, so the system is an index-1 DAE and the
first step projects an inconsistent initial state onto the constraint.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .diagnostics import EnergyRecord, energy, seepage_velocity
from .discretization import (
    BcRegime,
    FieldState,
    Grid,
    Mode,
    assemble_jacobian,
    assemble_residual,
)
from .errors import ConvergenceError, StepSizeError
from .model import ModelParams, PhasePoint
from .newton import NewtonConfig, newton_solve

log = logging.getLogger(__name__)

# snapshot times of the transient figures (solver time units, D = rho0f = 1)
FIGURE_TIMES = {
    "linear": (0.05, 0.2, 0.3, 0.75, 4.0, 40.0),
    "fluid-poor": (2e-7, 7.5e-6, 0.0100105, 0.7930105, 11.10100105, 1367.10100105),
    "fluid-rich": (0.004, 0.08, 0.8, 8.0, 83.0, 333.0),
}


# first step from the fluid-poor constant state, whose boundary values jump
FLUID_POOR_DT_INIT = 1e-7


class ICKind(enum.Enum):
    LINEAR = "linear"
    FLUID_POOR = "fluid-poor"
    FLUID_RICH = "fluid-rich"
    FROM_FILE = "file"


@dataclass(frozen=True)
class InitialCondition:
    kind: ICKind
    path: Path | None = None

    @classmethod
    def parse(cls, text: str) -> "InitialCondition":
        if text.startswith("file:"):
            return cls(ICKind.FROM_FILE, Path(text[5:]))
        return cls(ICKind(text))

    def label(self) -> str:
        return f"file:{self.path}" if self.kind is ICKind.FROM_FILE else self.kind.value

    def build(self, grid: Grid, left: PhasePoint, right: PhasePoint) -> FieldState:
        if self.kind is ICKind.LINEAR:
            return FieldState.linear(left, right, grid)
        if self.kind is ICKind.FLUID_POOR:
            return FieldState.constant(left, grid.n)
        if self.kind is ICKind.FLUID_RICH:
            return FieldState.constant(right, grid.n)
        from .io import read_profile_csv

        x, state = read_profile_csv(self.path)
        if state.n != grid.n or not np.allclose(x, grid.x, rtol=0, atol=1e-12 * (1 + abs(grid.l2))):
            raise ValueError(f"{self.path}: profile nodes do not match the grid")
        return state


@dataclass(frozen=True)
class TransientConfig:
    t_end: float
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1.0
    snapshot_times: tuple = ()
    adapt: bool = True
    fast_iters: int = 4
    slow_iters: int = 8
    grow: float = 1.5
    shrink: float = 0.5
    # cap on the estimated local truncation error of a step (max-norm over
    # eps and m); None leaves the step size to the Newton-iteration rule alone
    lte_tol: float | None = 1e-6
    newton: NewtonConfig = field(default_factory=lambda: NewtonConfig(min_iters=1))

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.lte_tol is not None and not self.lte_tol > 0:
            raise ValueError("lte_tol must be > 0")
        if not self.t_end > 0:
            raise ValueError("t_end must be > 0")
        if any(t < 0 or t > self.t_end for t in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, t_end]")


def adapt_dt(dt: float, newton_iters: int | None, config: TransientConfig) -> float:
    """Next step size; ``newton_iters=None`` marks a failed step.

    Raises StepSizeError when a failed step is already at dt_min.
    """
    if newton_iters is None:
        if dt <= config.dt_min:
            raise StepSizeError(f"step failed at dt_min={config.dt_min:g}")
        return max(dt * config.shrink, config.dt_min)
    if not config.adapt:
        return dt
    if newton_iters < config.fast_iters:
        dt = dt * config.grow
    elif newton_iters > config.slow_iters:
        dt = dt * config.shrink
    return min(max(dt, config.dt_min), config.dt_max)


def lte_estimate(du: np.ndarray, du_prev: np.ndarray, dt: float, dt_prev: float) -> float:
    """Backward-Euler local error, half the change in the increment rate times dt."""
    return 0.5 * float(np.max(np.abs(du - (dt / dt_prev) * du_prev)))


def lte_limit(dt: float, err: float, tol: float, safety: float = 0.9) -> float:
    """Largest step expected to keep the local error below ``tol``."""
    if err == 0.0:
        return math.inf
    return safety * dt * math.sqrt(tol / err)


class SnapshotSink(Protocol):
    def write(self, state: FieldState, v: np.ndarray) -> None: ...


class MemorySink:
    """Keeps every snapshot in memory, keyed by time."""

    def __init__(self):
        self.snapshots: dict[float, tuple[FieldState, np.ndarray]] = {}

    def write(self, state, v):
        self.snapshots[state.t] = (state.copy(), v.copy())

    def times(self):
        return sorted(self.snapshots)


@dataclass(frozen=True)
class StepRecord:
    t: float
    dt: float
    newton_iters: int
    F: float
    dF: float
    residual: float


@dataclass
class RunReport:
    steps: int
    newton_iters: int
    rejected: int
    final_residual: float
    final_energy: EnergyRecord
    final_state: FieldState
    log: list = field(default_factory=list)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.F for r in self.log])


def step(state: FieldState, dt: float, params: ModelParams, grid: Grid, regime: BcRegime,
         config: NewtonConfig = NewtonConfig()):
    """One backward-Euler step; returns (new_state, newton_result)."""
    t_new = state.t + dt

    def residual(x):
        return assemble_residual(FieldState.unpack(x), state, dt, regime, Mode.TRANSIENT, params, grid)

    def jacobian(x):
        return assemble_jacobian(FieldState.unpack(x), dt, regime, Mode.TRANSIENT, params, grid)

    x0 = state.pack()
    # start from the Dirichlet-consistent iterate
    x0[0], x0[1] = regime.left.eps, regime.left.m
    x0[-2], x0[-1] = regime.right.eps, regime.right.m
    result = newton_solve(x0, residual, jacobian, config)
    return FieldState.unpack(result.solution, t=t_new), result


def evolve(params: ModelParams, grid: Grid, regime: BcRegime, ic: InitialCondition | FieldState,
           config: TransientConfig, sink: SnapshotSink | None = None, run_log=None) -> RunReport:
    """Integrate from ``ic`` to ``config.t_end``.

    Steps are clipped so that every snapshot time is hit exactly. A step whose
    Newton solve fails is retried at half the step size from the same state.
    ``run_log``, if given, is called with each accepted StepRecord.
    """
    regime.check()
    state = ic.build(grid, regime.left, regime.right) if isinstance(ic, InitialCondition) else ic.copy()
    state.t = 0.0 if isinstance(ic, InitialCondition) else state.t
    pending = [t for t in config.snapshot_times if t >= state.t]
    if sink is not None and pending and math.isclose(pending[0], state.t, abs_tol=0.0):
        sink.write(state, seepage_velocity(state, params, grid, regime))
        pending.pop(0)

    e_prev = energy(state, params, grid)
    dt = config.dt_init
    if isinstance(ic, InitialCondition) and ic.kind is ICKind.FLUID_POOR:
        dt = max(min(dt, FLUID_POOR_DT_INIT), config.dt_min)
    steps = iters = rejected = 0
    residual = 0.0
    records = []
    du_prev = None
    t_end = config.t_end
    while state.t < t_end:
        target = min([t_end] + pending[:1])
        dt_try = min(dt, target - state.t)
        hits_target = False
        if state.t + dt_try >= target * (1.0 - 1e-14) or target - (state.t + dt_try) < 1e-3 * dt_try:
            dt_try = target - state.t
            hits_target = True
        try:
            new_state, result = step(state, dt_try, params, grid, regime, config.newton)
        except ConvergenceError as exc:
            rejected += 1
            log.debug("step rejected at t=%.6g dt=%.3g: %s", state.t, dt_try, exc)
            try:
                dt = adapt_dt(dt_try, None, config)
            except StepSizeError as err:
                raise StepSizeError(str(err), best=exc.best, residual_norm=exc.residual_norm, t=state.t) from exc
            continue
        if hits_target:
            new_state.t = target
        e_new = energy(new_state, params, grid)
        rec = StepRecord(t=new_state.t, dt=dt_try, newton_iters=result.iterations, F=e_new.F,
                         dF=e_new.F - e_prev.F, residual=result.residual_norm)
        records.append(rec)
        if run_log is not None:
            run_log(rec)
        du = new_state.pack() - state.pack()
        dt_cap = math.inf
        if config.lte_tol is not None and du_prev is not None:
            dt_cap = lte_limit(dt_try, lte_estimate(du, du_prev[0], dt_try, du_prev[1]), config.lte_tol)
        # the first step projects the initial data onto the constraint and is no guide
        du_prev = (du, dt_try) if steps > 0 else None
        state, e_prev = new_state, e_new
        steps += 1
        iters += result.iterations
        residual = result.residual_norm
        if hits_target and pending and target == pending[0]:
            if sink is not None:
                sink.write(state, seepage_velocity(state, params, grid, regime))
            pending.pop(0)
        # a clipped step says nothing about the natural step size
        dt = adapt_dt(max(dt, dt_try) if hits_target else dt_try, result.iterations, config)
        dt = max(min(dt, dt_cap), config.dt_min)
    return RunReport(steps=steps, newton_iters=iters, rejected=rejected, final_residual=residual,
                     final_energy=e_prev, final_state=state, log=records)
