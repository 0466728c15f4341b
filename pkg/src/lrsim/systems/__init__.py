"""Vector fields: one dynamical system per flow, on a flat state layout."""

from .base import Component, ROTATION, SKEW, System, UNIT, VECTOR, polar_project
from .chaplygin import (
    CotangentSystem,
    GsrSystem,
    LstarGeodesicSystem,
    RubberChaplyginSystem,
    contact_velocity,
    vertical_vector,
)
from .coupled import (
    CoupledFullSystem,
    CoupledReducedSystem,
    NCoupledSystem,
    commutator_constraint_matrices,
    reconstruct_coupled_W,
)
from .lr import GeodesicLplusRSystem, LplusRSystem, LRSystem, MultiplierError, penalty_pi0
from .support import RubberSupportSystem, SupportSystem, reconstruct_support_W

__all__ = [
    "Component",
    "ROTATION",
    "SKEW",
    "UNIT",
    "VECTOR",
    "System",
    "polar_project",
    "LRSystem",
    "LplusRSystem",
    "GeodesicLplusRSystem",
    "MultiplierError",
    "penalty_pi0",
    "CoupledFullSystem",
    "CoupledReducedSystem",
    "NCoupledSystem",
    "commutator_constraint_matrices",
    "reconstruct_coupled_W",
    "SupportSystem",
    "RubberSupportSystem",
    "reconstruct_support_W",
    "RubberChaplyginSystem",
    "CotangentSystem",
    "LstarGeodesicSystem",
    "GsrSystem",
    "contact_velocity",
    "vertical_vector",
]
