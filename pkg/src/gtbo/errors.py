"""Exception types raised across the package."""


class GtboError(Exception):
    """Base class for all package errors."""


class DomainError(GtboError, ValueError):
    """A point lies outside the unit hypercube."""


class DegeneracyError(GtboError, FloatingPointError):
    """All particle weights underflowed to zero."""


class CapacityError(GtboError, ValueError):
    """The exact enumeration was asked for too many dimensions."""


class SelectionError(GtboError, RuntimeError):
    """No admissible group could be produced."""


class FitError(GtboError, RuntimeError):
    """Every GP hyperparameter restart failed to factorize."""


class ConfigError(GtboError, ValueError):
    """Invalid run configuration. ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
