"""Fast sample re-weighting with a self-maintained proxy reward dictionary."""

from fsr.errors import ConfigurationError, NumericalAbort
from fsr.harness import ExperimentConfig, run_experiment, run_sweep

__all__ = ["ConfigurationError", "NumericalAbort", "ExperimentConfig", "run_experiment", "run_sweep"]
__version__ = "0.1.0"
