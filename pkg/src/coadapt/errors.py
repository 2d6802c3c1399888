"""Exception types shared across the package."""


class CoadaptError(Exception):
    """Base class for package errors."""


class ConfigInvalid(CoadaptError):
    """Configuration is malformed, inconsistent, or names unknown keys."""


class IkNoConvergence(CoadaptError):
    """Inverse kinematics failed to reach the target within tolerance."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"IK residual {residual:.3e} m after {iterations} iterations"
        )


class MissingCheckpoint(CoadaptError):
    """An experiment configuration requires a checkpoint that does not exist."""


class EmptyTraceSet(CoadaptError):
    """A trace-analysis operation received no usable trace records."""


class InsufficientData(CoadaptError):
    """Not enough observations to form the requested estimate."""
