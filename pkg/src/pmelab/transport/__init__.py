"""Optimal transport engines and Wasserstein bounds."""
from .duality import DualPotential, hopf_lax, kantorovich_lower_bound, lipschitz_constant, potential_from_duals
from .measures import DiscreteMeasure, TransportError, TransportPlan, measure_to_csv, plan_to_csv
from .radial import (
    QuadratureError,
    QuadratureSpec,
    quantile_w2_squared,
    radial_point_cloud,
    w1_bisector_lower_bound,
    w2_same_center_radial,
    w2_upper_discrete,
)
from .simplex import exact_ot, transportation_simplex
from .sinkhorn import round_to_marginals, sinkhorn

__all__ = [
    "DiscreteMeasure",
    "DualPotential",
    "QuadratureError",
    "QuadratureSpec",
    "TransportError",
    "TransportPlan",
    "exact_ot",
    "hopf_lax",
    "kantorovich_lower_bound",
    "lipschitz_constant",
    "measure_to_csv",
    "plan_to_csv",
    "potential_from_duals",
    "quantile_w2_squared",
    "radial_point_cloud",
    "round_to_marginals",
    "sinkhorn",
    "transportation_simplex",
    "w1_bisector_lower_bound",
    "w2_same_center_radial",
    "w2_upper_discrete",
]
