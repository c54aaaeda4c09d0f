"""Exception types shared across the package.

The CLI maps ``ConfigError`` to exit code 2 and ``DataError`` (including
``EligibilityError``) to exit code 3.
"""


class AnonAttackError(Exception):
    """Base class for package errors."""


class ConfigError(AnonAttackError):
    """Bad schema, config file, or parameter."""


class DataError(AnonAttackError):
    """Input data that cannot be parsed or processed."""


class EligibilityError(DataError):
    """The table cannot be made l-diverse for the requested l."""

    def __init__(self, message, value=None, count=None):
        super().__init__(message)
        self.value = value
        self.count = count
