"""Exception types shared across the package."""


class TcsimError(Exception):
    """Base class for all package-specific errors."""


class InvalidState(TcsimError):
    """A density matrix violates Hermiticity, trace, or positivity bounds."""


class InvalidParams(TcsimError):
    """System, loss, or simulation parameters are out of contract."""


class StabilityGuard(TcsimError):
    """Requested step size is too large for the fixed-step integrator."""


class NonFiniteState(TcsimError):
    """The state became non-finite during integration.

    Carries the partial trace recorded up to the failure, if any.
    """

    def __init__(self, message, partial_trace=None, step=None):
        super().__init__(message)
        self.partial_trace = partial_trace
        self.step = step


class NoConvergence(TcsimError):
    """Self-consistent fixed-point iteration failed to converge."""


class MissingChannel(TcsimError):
    """A requested trace channel is not present."""


class TooShort(TcsimError):
    """Input series is too short for the requested analysis."""


class WindowTooShort(TcsimError):
    """Correlation or classification window does not satisfy its preconditions."""


class WindowTooNarrow(TcsimError):
    """Fit window contains too few spectral bins."""


class FitDiverged(TcsimError):
    """Least-squares fit failed to reduce the residual."""


class NoPeriodDetected(TcsimError):
    """No dominant oscillation period found in the analysis window."""


class ConfigError(TcsimError):
    """Configuration file failed schema validation."""
