"""Monte Carlo toolkit for sample-and-hold control on renewal sampling grids with small noise."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError, ContractError, DimensionError, DomainError, FitError, InvariantError,
    NumericalError, OutputError, ParameterError, SweepError,
)
from .linalg import (
    LinearSystem, closed_loop_flow, expm, gramian, hold_integral, hold_propagator,
    mat_exp, noise_covariance, random_commuting_system,
)
from .renewal import (
    Deterministic, Exponential, Gamma, InterarrivalDistribution, SamplingGrid, Uniform,
    constants_of, distribution_from_dict, grid_from_times, mean_age_integral, pi_of, sample_grid,
)
from .paths import BrownianPath, Mesh, brownian_path, make_mesh, zero_path
from .lindyn import (
    coupled_paths, ell, fluctuation_errors, ideal_trajectory, noisy_trajectory,
    q_limit_trajectory, sampled_trajectory, z_limit_trajectory,
)
from .nonlindyn import (
    NonlinearSystem, ell_g, get_system, ideal_nonlinear, linear_embedding, list_systems,
    noisy_nonlinear, nonlinear_fluct_error, nonlinear_paths, q_limit_nonlinear,
    register_system, sampled_nonlinear, z_limit_nonlinear,
)
from .systems import linear_system, linear_systems
from .experiments import (
    CheckReport, ExperimentConfig, RateReport, Regime, check_equilibrium_ou,
    check_z_gaussianity, fit_rate, run_checks, run_sweep,
)
from .config import dump_config, loads_config, parse_config
from .reports import RunManifest, emit_reports
