"""Exception types shared across the package."""

from __future__ import annotations


class KplError(Exception):
    """Base class for all package errors."""


class ConfigError(KplError):
    """Invalid configuration (unknown key, missing field, bad value)."""


class OutOfDomain(KplError):
    """A requested location lies outside the spatial grid."""


class Overflow(KplError):
    """Field weights left the representable range; dt/dx are misconfigured."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class BoundaryLeak(KplError):
    """Too much propagator/density mass near the truncated domain edges."""

    def __init__(self, message: str, replica_id: int | None = None):
        super().__init__(message)
        self.replica_id = replica_id


class DegenerateDensity(KplError):
    """All density weights underflowed to zero."""


class EmptyEnsemble(KplError):
    """An aggregation was requested over zero replicas."""


class InvalidParams(KplError):
    """Lower-bound parameter constraints are violated."""


class PathwiseViolation(KplError):
    """The exact pathwise coupling inequality failed beyond float tolerance."""

    def __init__(self, message: str, replica_id: int | None = None):
        super().__init__(message)
        self.replica_id = replica_id


class TooLarge(KplError):
    """Quadrature node budget exceeded."""


class ReplicaError(KplError):
    """Wraps a failure inside one Monte Carlo replica with its id and step."""

    def __init__(self, replica_id: int, cause: BaseException):
        self.replica_id = replica_id
        self.cause = cause
        step = getattr(cause, "step", None)
        where = f"replica {replica_id}" + (f", step {step}" if step is not None else "")
        super().__init__(f"{where}: {cause}")
