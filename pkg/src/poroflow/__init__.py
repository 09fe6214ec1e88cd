"""One-dimensional second-gradient poromechanics.

Equilibrium phases and the critical / coexistence pressures, stationary
profiles connecting the two phases, and backward-Euler consolidation dynamics
under zero-chemical-potential or one-side-impermeable boundary conditions.
"""

from .diagnostics import EnergyRecord, FeatureSet, energy, seepage_velocity, velocity_features
from .discretization import BcRegime, FieldState, Grid, Mode, Regime, assemble_jacobian, assemble_residual
from .errors import (
    BifurcationWarning,
    ConfigError,
    ConvergenceError,
    DomainError,
    FeatureError,
    ParseError,
    PoroflowError,
    SingularMatrixError,
    StepSizeError,
    ValidationError,
)
from .model import ModelParams, PhasePoint, dpsi_deps, dpsi_dm, psi_total
from .newton import BandedMatrix, NewtonConfig, newton_solve, solve_banded
from .phases import (
    coexistence_pressure,
    coexisting_phases,
    critical_pressure,
    fluid_rich_phase,
    standard_phase,
)
from .stationary import InitialGuess, interface_position, interface_width, stationary_connection
from .transient import ICKind, InitialCondition, MemorySink, RunReport, TransientConfig, evolve

__version__ = "0.1.0"

__all__ = [
    "BandedMatrix",
    "BcRegime",
    "BifurcationWarning",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "EnergyRecord",
    "FeatureError",
    "FeatureSet",
    "FieldState",
    "Grid",
    "ICKind",
    "InitialCondition",
    "InitialGuess",
    "MemorySink",
    "Mode",
    "ModelParams",
    "NewtonConfig",
    "ParseError",
    "PhasePoint",
    "PoroflowError",
    "Regime",
    "RunReport",
    "SingularMatrixError",
    "StepSizeError",
    "TransientConfig",
    "ValidationError",
    "assemble_jacobian",
    "assemble_residual",
    "coexistence_pressure",
    "coexisting_phases",
    "critical_pressure",
    "dpsi_deps",
    "dpsi_dm",
    "energy",
    "evolve",
    "fluid_rich_phase",
    "interface_position",
    "interface_width",
    "newton_solve",
    "psi_total",
    "seepage_velocity",
    "solve_banded",
    "standard_phase",
    "stationary_connection",
    "velocity_features",
]
