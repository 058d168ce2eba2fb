"""Critical traveling wave of the diffusive SIR model: bounds, fixed-point solver,
property diagnostics and a direct PDE simulator for cross-validation."""

from .bounds import BoundSet, certify_inequalities, eval_profiles, select_constants
from .diagnostics import WaveReport, diagnose, ode_residual
from .model import InvalidRegime, ModelParams, SpectralData, derive_spectral, h_funcs, infection_force
from .pdesim import SimConfig, SimState, extract_comoving_profile, measure_front_speed, simulate, step
from .solver import ConvergenceTrace, NoConvergence, SolveConfig, solve_critical_wave
from .waveop import WaveGrid, WaveProfile, apply_F, project_gamma, weighted_norm_diff

__version__ = "0.1.0"
