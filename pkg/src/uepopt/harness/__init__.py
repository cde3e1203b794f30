"""Config-driven experiment sweeps and solver validation."""

from uepopt.harness.config import ExperimentConfig, WeightSource, load_config
from uepopt.harness.runner import ResultRow, run_experiment, sample_channel, write_results
from uepopt.harness.validation import ValidationReport, ValidationSettings, validate

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "ValidationReport",
    "ValidationSettings",
    "WeightSource",
    "load_config",
    "run_experiment",
    "sample_channel",
    "validate",
    "write_results",
]
