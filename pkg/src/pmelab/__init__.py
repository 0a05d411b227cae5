"""Porous medium flows on model manifolds: solver, transport bounds and numerical checks."""
__version__ = "0.1.0"

from .geometry import ModelManifold, HyperboloidPoint, geodesic_distance, exp_map, parallel_transport
from .nonlinearity import PorousNonlinearity, RegularizedNonlinearity, regularize, validate_hypotheses
from .solver import DensityField, RadialGrid, SolverConfig, Trajectory, evolve

__all__ = [
    "DensityField",
    "HyperboloidPoint",
    "ModelManifold",
    "PorousNonlinearity",
    "RadialGrid",
    "RegularizedNonlinearity",
    "SolverConfig",
    "Trajectory",
    "__version__",
    "evolve",
    "exp_map",
    "geodesic_distance",
    "parallel_transport",
    "regularize",
    "validate_hypotheses",
]
