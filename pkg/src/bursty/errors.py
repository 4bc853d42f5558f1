"""Exception types raised across the package."""


class BurstyError(Exception):
    """Base class for all package errors."""


class IngestError(BurstyError, ValueError):
    """Malformed or unusable event input.

    ``row`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class InsufficientDataError(BurstyError, ValueError):
    """Too few events or durations for the requested statistic."""


class UndefinedStatisticError(BurstyError, ValueError):
    """The statistic is undefined for this input (e.g. zero variance)."""


class ConvergenceWarning(UserWarning):
    """MCMC chains failed the Gelman-Rubin check."""


class ZeroDurationWarning(UserWarning):
    """Zero inter-event times were clamped to a positive floor."""
