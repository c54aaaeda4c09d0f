"""Attribute-inference attacks on privacy-preserving data releases."""

from .errors import AnonAttackError, ConfigError, DataError, EligibilityError

__version__ = "0.1.0"

__all__ = ["AnonAttackError", "ConfigError", "DataError", "EligibilityError", "__version__"]
