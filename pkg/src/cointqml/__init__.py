"""Quasi maximum likelihood estimation for cointegrated continuous-time state space models.

Modules:
    matfun    matrix exponential, sampled noise covariance, Riccati solver
    levy      Brownian and normal inverse Gaussian drivers
    model     parametric families, assumption checks, the sampled filter
    catalog   the shipped two- and three-dimensional models
    simulate  Euler and exact Gaussian path simulation
    kalman    pseudo-innovations and the pseudo-Gaussian likelihood
    estimate  box-constrained estimation and sandwich standard errors
    harness   configuration, Monte Carlo runner, reports and the CLI
"""

from .catalog import MODELS, default_driver, get_model, spec_from_dict
from .estimate import (EstimationError, EstimationResult, EstimatorOptions, qml_estimate,
                       short_run_covariance)
from .kalman import likelihood_decomposition, pseudo_innovations, quasi_log_likelihood
from .levy import NIG, Brownian, levy_covariance, levy_mean, sample_increments
from .matfun import DAREError, sampled_system, solve_dare
from .model import (AssumptionViolation, ModelSpec, StateSpaceRealization, build_realization,
                    check_assumptions, discretize)
from .simulate import ObservationSeries, read_series, simulate_euler, simulate_exact_gaussian, write_series

__version__ = "0.1.0"

__all__ = [
    "MODELS", "default_driver", "get_model", "spec_from_dict",
    "EstimationError", "EstimationResult", "EstimatorOptions", "qml_estimate", "short_run_covariance",
    "likelihood_decomposition", "pseudo_innovations", "quasi_log_likelihood",
    "NIG", "Brownian", "levy_covariance", "levy_mean", "sample_increments",
    "DAREError", "sampled_system", "solve_dare",
    "AssumptionViolation", "ModelSpec", "StateSpaceRealization", "build_realization",
    "check_assumptions", "discretize",
    "ObservationSeries", "read_series", "simulate_euler", "simulate_exact_gaussian", "write_series",
]
