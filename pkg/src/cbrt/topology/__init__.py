"""Topology control: OTC and the k-connection baseline."""

from cbrt.topology.kconnection import KConnectionController, KDecision, k_connection_decision
from cbrt.topology.otc import (
    OtcController,
    PoissonField,
    RangeSolution,
    RegionPolicy,
    adjustment_probability,
    band_fraction,
    in_band,
    max_survival_area,
    min_distance_for,
    optimal_area,
    optimal_range,
    poisson_region_prob,
    predicted_adjustment_ratio,
    ptp,
    required_rnd,
    survival_area,
    unhealthy_prob,
)

__all__ = [
    "KConnectionController",
    "KDecision",
    "OtcController",
    "PoissonField",
    "RangeSolution",
    "RegionPolicy",
    "adjustment_probability",
    "band_fraction",
    "in_band",
    "k_connection_decision",
    "max_survival_area",
    "min_distance_for",
    "optimal_area",
    "optimal_range",
    "poisson_region_prob",
    "predicted_adjustment_ratio",
    "ptp",
    "required_rnd",
    "survival_area",
    "unhealthy_prob",
]
