"""Exception types shared across the toolkit."""


class LtvkitError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(LtvkitError, ValueError):
    """Operands have incompatible shapes; message names both shapes."""


class DataError(LtvkitError, ValueError):
    """Input records violate a data contract (negative values, bad ids, bad dates)."""


class UsageError(LtvkitError, ValueError):
    """An operation was called in an unsupported way (empty input, missing cache)."""


class NumericError(LtvkitError, ArithmeticError):
    """A numeric routine failed to converge or produced non-finite values."""


class FittingError(LtvkitError, RuntimeError):
    """Model fitting failed; carries best-so-far parameters when available."""

    def __init__(self, message, best_params=None):
        super().__init__(message)
        self.best_params = best_params


class TrainingError(LtvkitError, RuntimeError):
    """Network training failed (non-finite loss or gradient)."""
