"""Exception hierarchy shared by every module.

The CLI maps these onto exit statuses (configuration -> 2, resource -> 3).
"""


class QTwistError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QTwistError):
    """Invalid or inconsistent run configuration."""


class DomainError(QTwistError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class RangeError(QTwistError, IndexError):
    """A lookup table does not cover the requested index."""


class ResourceError(QTwistError, MemoryError):
    """A configured memory or enumeration cap would be exceeded."""


class NumericalError(QTwistError, ArithmeticError):
    """Quadrature or another numerical procedure failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CacheFormatError(QTwistError):
    """A cache file is truncated or carries the wrong magic/version."""
