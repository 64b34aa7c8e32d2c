"""Exception hierarchy shared by all solvers.

The CLI maps each class to a distinct exit code, so solvers raise these
rather than returning sentinel values.
"""


class AdSignalError(Exception):
    """Base class for all package errors."""


class ValidationError(AdSignalError, ValueError):
    """Malformed input. ``field`` names the offending field when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SizeGuardError(AdSignalError):
    """A problem exceeds a configured size cap.

    ``required`` is the size the request would need, ``cap`` the limit.
    """

    def __init__(self, message, required=None, cap=None):
        super().__init__(message)
        self.required = required
        self.cap = cap


class NumericalError(AdSignalError):
    """An LP or oracle stage failed numerically. ``stage`` labels where."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
