"""Exactly conservative characteristic particle method for 1-d scalar conservation laws."""

from .diagnostics import DiagnosticsSeries, GridFunction, fit_slope, l1_error
from .dynamics import advance, collision_time, next_event
from .errors import (
    CFLViolationError,
    CharpartError,
    ConfigurationError,
    ConvexityError,
    DomainError,
    MergeInfeasibleError,
    OvershootError,
    UnresolvedMergeError,
    UnsupportedInteractionError,
)
from .flux import BUCKLEY_LEVERETT, BURGERS, QUARTIC, FluxModel, ValueInterval, custom_flux, get_flux, nonlinear_average
from .interpolation import PiecewiseSolution, kruzkov_entropy, sample_curve, total_area, total_variation
from .management import (
    EventLog,
    ManagementConfig,
    entropy_check,
    inflection_merge,
    insert_between,
    management_pass,
    merge_value,
    merge_with_fix,
    postprocess_shocks,
    tvd_safety_check,
)
from .oracle import FvConfig, NumericalFlux, exact_riemann, fv_solve, fv_solve_series
from .solver import RunConfig, RunResult, run
from .state import InitialCondition, Particle, ParticleField, sample_initial

__version__ = "0.1.0"
