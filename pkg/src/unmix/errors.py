"""Exception hierarchy shared by every module."""


class UnmixError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(UnmixError, ValueError):
    pass


class DimensionError(UnmixError, ValueError):
    pass


class PurityInfeasibleError(UnmixError):
    """Rejection sampling could not satisfy the purity cap."""


class RankDeficientError(UnmixError):
    pass


class SingularMatrixError(UnmixError):
    pass


class PreconditionError(UnmixError, ValueError):
    pass


class DegenerateDataError(UnmixError):
    pass


class StepFailureError(UnmixError):
    """Every candidate step of the outer solver was singular."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
