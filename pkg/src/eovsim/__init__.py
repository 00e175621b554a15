"""Deterministic simulator of an execute-order-validate transaction pipeline
(endorsement, replicated-log ordering, validation/commit) with a fixed-rate
benchmark driver and metrics harness."""

from .config import ConfigError, ExperimentConfig
from .simulation import run_simulation

__version__ = "0.1.0"

__all__ = ["ConfigError", "ExperimentConfig", "run_simulation", "__version__"]
