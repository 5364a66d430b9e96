"""Exception types shared across the package."""


class XtalkError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(XtalkError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class NumericalFailureError(XtalkError):
    """A numerical routine failed to converge (CLI exit code 3)."""


class OutOfRangeError(XtalkError):
    """A requested point lies outside the covered scan or grid range."""


class LowSignalError(XtalkError):
    """Measured contrast is too small to extract a parameter."""


class ChannelConflictError(XtalkError):
    """A channel is already driven where a new pulse would be placed."""


class FitFailureError(NumericalFailureError):
    """Least-squares fit diverged; carries diagnostic details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateFitError(NumericalFailureError):
    """The fit Jacobian is singular, parameters are not identifiable."""
