"""Node kinematics, residual link lifetime and the simulated world."""

from cbrt.mobility.kinematics import (
    UNBOUNDED,
    KinematicState,
    LifetimeCase,
    LifetimePrediction,
    LifetimeScenario,
    is_unbounded,
    lifetime_case,
    link_geometry,
    predict_lifetime,
    relative_angle,
    relative_velocity,
    residual_lifetime,
    survival_exit_oracle,
)
from cbrt.mobility.world import (
    LINK_MODELS,
    LinkModel,
    Mobility,
    NodeState,
    World,
    WorldConfig,
    delivery_matrix,
    init_world,
    link_delivery_prob,
    rng_streams,
    step_mobility,
    survival_set,
    survival_set_toward,
    write_snapshot,
)

__all__ = [
    "LINK_MODELS",
    "UNBOUNDED",
    "KinematicState",
    "LifetimeCase",
    "LifetimePrediction",
    "LifetimeScenario",
    "LinkModel",
    "Mobility",
    "NodeState",
    "World",
    "WorldConfig",
    "delivery_matrix",
    "init_world",
    "is_unbounded",
    "lifetime_case",
    "link_delivery_prob",
    "link_geometry",
    "predict_lifetime",
    "relative_angle",
    "relative_velocity",
    "residual_lifetime",
    "rng_streams",
    "step_mobility",
    "survival_exit_oracle",
    "survival_set",
    "survival_set_toward",
    "write_snapshot",
]
