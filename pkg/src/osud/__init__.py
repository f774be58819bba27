"""Online selection with uncertain disruption: benchmarks, policies and oracles."""

from .dist import Atom, Continuous, Instance, QuantileDistribution, hard_instance_dist, point_mass, uniform
from .errors import (DomainError, InvalidInstanceError, InvalidScheduleError, NumericalError,
                     QuadratureError, StateSpaceError)

__version__ = "0.1.0"

__all__ = [
    "Atom", "Continuous", "Instance", "QuantileDistribution", "hard_instance_dist", "point_mass",
    "uniform", "DomainError", "InvalidInstanceError", "InvalidScheduleError", "NumericalError",
    "QuadratureError", "StateSpaceError",
]
