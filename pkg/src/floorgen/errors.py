"""Exception types shared across the package."""


class FloorgenError(Exception):
    """Base class for all package errors."""


class DimensionError(FloorgenError, ValueError):
    """Operand shapes are incompatible."""


class ConfigurationError(FloorgenError, ValueError):
    """A layer, model or run was configured with unusable settings."""


class NumericalError(FloorgenError, ArithmeticError):
    """A computation produced NaN or Inf."""


class InputError(FloorgenError, ValueError):
    """Caller-supplied data violates an operation's preconditions."""


class GEDBoundError(FloorgenError, ValueError):
    """Graph too large for the exact edit-distance search."""
