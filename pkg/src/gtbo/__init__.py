"""Group testing to find active dimensions, then Bayesian optimization on them."""

from .bo import BoConfig, IncumbentTrace, run_bo
from .config import RunConfig, load_config
from .errors import (
    CapacityError,
    ConfigError,
    DegeneracyError,
    DomainError,
    FitError,
    GtboError,
    SelectionError,
)
from .group_testing import GtConfig, GtResult, run_group_testing
from .model import ActivityEnsemble, NoiseModel
from .runner import execute, random_search, sweep
from .testbed import BenchmarkObjective, BenchmarkSpec

__all__ = [
    "ActivityEnsemble",
    "BenchmarkObjective",
    "BenchmarkSpec",
    "BoConfig",
    "CapacityError",
    "ConfigError",
    "DegeneracyError",
    "DomainError",
    "FitError",
    "GtConfig",
    "GtResult",
    "GtboError",
    "IncumbentTrace",
    "NoiseModel",
    "RunConfig",
    "SelectionError",
    "execute",
    "load_config",
    "random_search",
    "run_bo",
    "run_group_testing",
    "sweep",
]
__version__ = "0.1.0"
