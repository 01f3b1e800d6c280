"""Exception types raised by the simulator."""


class LsfpError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(LsfpError, ValueError):
    """Invalid or unsupported configuration."""


class DomainError(LsfpError, ValueError):
    """Input outside the domain of a formula (e.g. non-positive distance)."""


class ConvergenceError(LsfpError, RuntimeError):
    """An iterative method ran out of iterations.

    The last residual is kept on the ``residual`` attribute.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateBeamformerError(LsfpError, ValueError):
    """A beamformer has zero projection on its own user's channel."""


class IllConditionedError(LsfpError, ValueError):
    """A fading block is numerically singular."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class SolverFailure(LsfpError, RuntimeError):
    """The convex feasibility oracle failed too often to trust the result."""
