"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class InvalidInstanceError(ValueError):
    """Instance parameters violate their invariants."""


class InvalidScheduleError(ValueError):
    """A schedule input violates its feasibility constraints."""


class StateSpaceError(ValueError):
    """An enumeration would exceed its state-space guard."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach its tolerance."""
