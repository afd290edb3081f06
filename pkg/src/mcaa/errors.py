"""Exception types raised across the package."""


class McaaError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(McaaError, ValueError):
    """Array shapes do not line up."""


class NumericError(McaaError, ValueError):
    """Non-finite values where finite ones are required."""


class DomainError(McaaError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class StateError(McaaError, RuntimeError):
    """Objects were combined in an inconsistent state (e.g. a stale trace)."""


class UndefinedMetricError(DomainError):
    """A metric is undefined for the given input, e.g. AUC with one class."""
