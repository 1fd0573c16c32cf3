"""Exception hierarchy shared by the solver, dynamics and CLI layers."""

from __future__ import annotations


class BetheError(Exception):
    """Base class for all package errors."""


class ParameterError(BetheError, ValueError):
    """Model parameters outside the supported domain."""


class PoleError(BetheError, ZeroDivisionError):
    """Two spectral parameters coincide where a formula has a simple pole."""


class InvalidRootSetError(BetheError, ValueError):
    """A root set violates distinctness or contains a zero root."""


class ConvergenceError(BetheError, RuntimeError):
    """Newton iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(ConvergenceError):
    """Newton Jacobian became singular, typically because roots collided."""


class IncompleteSpectrumError(BetheError, RuntimeError):
    """Fewer than N+1 distinct Bethe solutions were obtained."""

    def __init__(self, message: str, found: int, expected: int):
        super().__init__(message)
        self.found = found
        self.expected = expected

    @property
    def missing(self) -> int:
        return self.expected - self.found


class BranchLostError(BetheError, RuntimeError):
    """Continuation could not follow a branch past a given step."""

    def __init__(self, message: str, step: int, branch: int):
        super().__init__(message)
        self.step = step
        self.branch = branch


class SingularStateError(BetheError, RuntimeError):
    """Roots collided or hit zero along a trajectory or in an initial state.

    ``indices`` lists the offending root indices; ``time`` and ``last_roots``
    hold the last good state when the error is raised during integration.
    """

    def __init__(self, message: str, indices=(), time: float | None = None, last_roots=None):
        super().__init__(message)
        self.indices = tuple(indices)
        self.time = time
        self.last_roots = last_roots


class IntegrationError(BetheError, RuntimeError):
    """The adaptive integrator failed (step-size underflow, tolerance failure)."""

    def __init__(self, message: str, time: float | None = None, last_state=None, diagnosis: str = ""):
        super().__init__(message)
        self.time = time
        self.last_state = last_state
        self.diagnosis = diagnosis


class GridMismatchError(BetheError, ValueError):
    """Trajectories that must share a time grid do not."""


class ConfigError(BetheError, ValueError):
    """Invalid run configuration."""
