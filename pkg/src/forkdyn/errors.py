"""Exception types shared across forkdyn."""

from __future__ import annotations


class ForkdynError(Exception):
    """Base class for all forkdyn errors."""


class ValidationError(ForkdynError, ValueError):
    """Parameters violate a documented invariant."""


class DomainError(ForkdynError, ValueError):
    """Argument lies outside the domain of a formula."""


class PathCountOverflow(ForkdynError, ArithmeticError):
    """Requested lattice-path count exceeds the supported exact range."""


class SingularSystemError(ForkdynError, ArithmeticError):
    """The stationary equations have no unique solution."""


class QuadratureError(ForkdynError, ArithmeticError):
    """Numerical integration failed to reach the requested accuracy.

    Attributes:
        estimate: the value the integrator returned.
        error: the integrator's own error estimate.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class ReplicationError(ForkdynError, RuntimeError):
    """A simulation replication failed."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"replication {index} failed: {cause!r}")
        self.index = index
        self.cause = cause


class DegenerateInputError(ValidationError):
    """Data cannot determine the requested fit."""
