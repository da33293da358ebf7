"""Exception types shared across the package.

The CLI maps each class onto a fixed exit code, so library code should raise
the most specific one that applies.
"""


class MesgencovError(Exception):
    """Base class for all package errors."""


class ConfigError(MesgencovError, ValueError):
    """Invalid user configuration (bad field value, unknown chemical, ...)."""


class DataError(MesgencovError, ValueError):
    """Input data is malformed or insufficient for the requested analysis."""


class NumericError(MesgencovError, ArithmeticError):
    """A numerical procedure failed (singular matrix, rank deficiency, ...)."""
