"""Linear inverse models for linear systems driven by white or colored noise."""
from .bench import BenchConfig, BenchRecord, gen_system, percentile_table, rel_error, run_bench, run_trial
from .colored import EstimationReport, colored_lim_estimate, colored_lim_from_corr
from .corr import CorrSet, corr_at_lag, estimate_derivatives, project_symmetry
from .errors import (
    BranchCutError,
    ColimError,
    DecompositionError,
    InsufficientDataError,
    NotPositiveDefiniteError,
    ShapeError,
    SimulationError,
    SingularSystemError,
)
from .lim import LimResult, lim_estimate, lim_from_corr, lim_sweep
from .oracle import analytic_corr, analytic_derivs, build, effective_diffusion, ucna_1d
from .sde import SimConfig, SystemParams, TimeSeries, simulate, simulate_colored, simulate_white

__version__ = "0.1.0"
