"""Exception types shared across the package."""


class DiffalError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(DiffalError, ValueError):
    """Invalid parameter, flag, or configuration value."""


class InfeasibleDrawError(ConfigurationError):
    """A requested random draw cannot be satisfied by the data."""


class FormatError(DiffalError, ValueError):
    """A binary or text artifact does not conform to its declared format."""


class ShapeError(DiffalError, ValueError):
    """Array dimensions do not match what an operation requires."""


class SingularSystemError(DiffalError):
    """The diffusion fixed-point system has no unique solution."""


class NonConvergenceError(DiffalError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InsufficientPoolError(DiffalError):
    """The unlabeled pool is too small for the requested batch."""
