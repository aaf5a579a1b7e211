"""SVEIS epidemic dynamics with log-mean-reverting transmission noise.

The package simulates a susceptible-vaccinated-exposed-infectious system
whose transmission coefficient beta(t) = beta_bar * exp(z(t)) stays positive
by construction, with z an exactly-sampled mean-reverting Gaussian
diffusion. It provides closed-form threshold calculators (r0, r0_s, r0_e),
a deterministic RK4 baseline, a splitting-scheme Monte Carlo engine with
reproducible per-path random substreams, and ensemble verdicts for
persistence and extinction.
"""

__version__ = "0.1.0"

from .analysis import (ExtinctionReport, ExtinctionVerdict, Histogram,
                       PersistenceVerdict, extinction_functional,
                       extinction_rate_estimate, extinction_verdict,
                       histogram_distance, persistence_verdict,
                       stationary_histogram, time_average, ve_series)
from .config import ExperimentOptions, dump_config, parse_config, parse_config_data
from .engine import (Ensemble, GammaReport, PathFailure, SimConfig,
                     check_gamma, simulate_ensemble, simulate_path,
                     validate_config)
from .errors import (DegenerateR0, DegenerateStationary, EmptyFitWindow,
                     IncompatibleBinning, NonPositiveParameter, SchemaError,
                     StepProducedNegative, SveisError)
from .model import (Drift, ModelParams, Regime, State, ThresholdReport,
                    default_init, dfe, drift, extinction_matrix,
                    extinction_weights, in_gamma, r0, r0_e, r0_s, thresholds,
                    validate_params)
from .ode import (Trajectory, default_dt, integrate_deterministic,
                  negativity_floor, rk4_step)
from .ou import (OuParams, RngStream, abs_expm1_bound, ou_exp_moment,
                 ou_stationary_density, ou_stationary_sample, ou_step_exact,
                 ou_transition)

__all__ = [
    "__version__",
    # errors
    "SveisError", "NonPositiveParameter", "DegenerateR0",
    "DegenerateStationary", "StepProducedNegative", "EmptyFitWindow",
    "IncompatibleBinning", "SchemaError",
    # model core
    "ModelParams", "State", "Drift", "Regime", "ThresholdReport",
    "validate_params", "drift", "dfe", "default_init", "r0", "r0_s", "r0_e",
    "extinction_matrix", "extinction_weights", "thresholds", "in_gamma",
    # noise process
    "OuParams", "RngStream", "ou_transition", "ou_step_exact",
    "ou_stationary_sample", "ou_stationary_density", "ou_exp_moment",
    "abs_expm1_bound",
    # deterministic integration
    "Trajectory", "default_dt", "negativity_floor", "rk4_step",
    "integrate_deterministic",
    # stochastic engine
    "SimConfig", "PathFailure", "Ensemble", "GammaReport", "validate_config",
    "simulate_path", "simulate_ensemble", "check_gamma",
    # analysis
    "Histogram", "ExtinctionReport", "ExtinctionVerdict",
    "PersistenceVerdict", "extinction_functional", "ve_series",
    "extinction_rate_estimate", "extinction_verdict", "time_average",
    "stationary_histogram", "histogram_distance", "persistence_verdict",
    # configuration
    "ExperimentOptions", "parse_config", "parse_config_data", "dump_config",
]
