"""Exception types shared across the toolkit."""


class WavetunerError(Exception):
    """Base class for toolkit-specific failures."""


class GridMismatchError(WavetunerError, ValueError):
    """Two fields or operators live on different grids or frequency bands."""


class GrazingNodeError(WavetunerError, ValueError):
    """A transverse direction sits on (or too close to) the circle |eta'| = 1."""


class MediumValidationError(WavetunerError, ValueError):
    """A medium definition violates one of its invariants."""


class SolveConvergenceError(WavetunerError, RuntimeError):
    """Iterative linear solve did not reach the requested residual."""

    def __init__(self, message: str, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class OrderUndeterminedError(WavetunerError, RuntimeError):
    """Peak-order fit failed because the eigenvalue curve is flat within tolerance."""


class DegeneratePairingError(WavetunerError, RuntimeError):
    """A normalization pairing vanished (degenerate test function or start field)."""


class DivergenceError(WavetunerError, RuntimeError):
    """Iteration produced non-finite amplitudes."""
