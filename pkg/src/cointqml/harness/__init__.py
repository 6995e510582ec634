"""Monte Carlo experiments, reports and the command line interface."""

from .config import ConfigError, EstimatorConfig, ExperimentConfig, load_config, loads_config
from .montecarlo import (MonteCarloSummary, StudyError, misspecification_study, rate_study,
                         replicate_seed, run_replicates)
from .report import qq_data, report, summary_table

__all__ = ["ConfigError", "EstimatorConfig", "ExperimentConfig", "load_config", "loads_config",
           "MonteCarloSummary", "StudyError", "misspecification_study", "rate_study",
           "replicate_seed", "run_replicates", "qq_data", "report", "summary_table"]
