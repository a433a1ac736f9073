"""Exception types raised across the package."""


class DigraphwaveError(Exception):
    """Base class for all package errors."""


class GraphFormatError(DigraphwaveError, ValueError):
    """Malformed edge list or graph file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphValidationError(DigraphwaveError, ValueError):
    """Graph data violates an invariant (e.g. a nonpositive weight)."""


class ConfigurationError(DigraphwaveError, ValueError):
    """Invalid hyperparameters or option combination."""


class NumericalError(DigraphwaveError, ArithmeticError):
    """A computed quantity fell outside its guaranteed error envelope."""
