"""Numerical companion for first and higher moments of quadratic twists of level-1 eigenform L-functions."""

from .errors import (CacheFormatError, ConfigurationError, DomainError, NumericalError, QTwistError,
                     RangeError, ResourceError)

__version__ = "0.1.0"

__all__ = ["CacheFormatError", "ConfigurationError", "DomainError", "NumericalError", "QTwistError",
           "RangeError", "ResourceError", "__version__"]
