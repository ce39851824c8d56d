"""Exception hierarchy shared across the package."""


class LacGanError(Exception):
    """Base class for all package errors."""


class DimensionError(LacGanError, ValueError):
    """Array shapes or flat buffer lengths do not line up."""


class ConfigError(LacGanError, ValueError):
    """Invalid hyperparameter or option value."""


class ValidationError(LacGanError, ValueError):
    """Input data violates a documented contract (labels, one-hot rows, sizes)."""


class DataError(LacGanError, ValueError):
    """Malformed dataset file."""


class StateError(LacGanError, RuntimeError):
    """Operation not allowed in the object's current state."""


class NumericalError(LacGanError, ArithmeticError):
    """A loss or gradient became NaN/Inf during training."""


class CheckpointError(LacGanError, IOError):
    """Checkpoint file is corrupt, truncated, or of an unknown version."""
