"""Exception types raised across the package."""


class GradseekError(Exception):
    """Base class for all package errors."""


class InvalidArgument(GradseekError, ValueError):
    """Bad shapes, non-finite values, or out-of-range parameters."""


class IllConditioned(GradseekError, ArithmeticError):
    """A ridge system could not be factorized reliably."""

    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


class SelectionFailed(GradseekError):
    """Every candidate of a cross-validation grid failed to fit."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class GradientUndefined(GradseekError, ArithmeticError):
    """The KDE log-gradient is requested where the density has underflowed."""
