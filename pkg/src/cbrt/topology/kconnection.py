"""k-connection baseline: steer every node's degree towards k."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class KDecision(str, enum.Enum):
    GROW = "grow"
    SHRINK = "shrink"
    HOLD = "hold"


def k_connection_decision(n_i: int, k: int) -> KDecision:
    if n_i < 0 or k < 1:
        raise ValueError(f"need n_i >= 0 and k >= 1, got {n_i}, {k}")
    if n_i < k:
        return KDecision.GROW
    if n_i > k:
        return KDecision.SHRINK
    return KDecision.HOLD


@dataclass(frozen=True)
class KConnectionController:
    k: int = 5
    grow: float = 1.1
    shrink: float = 0.9
    r_min: float = 10.0
    r_max: float = 1000.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not (self.grow > 1.0 and 0.0 < self.shrink < 1.0):
            raise ValueError("grow must exceed 1 and shrink must lie in (0, 1)")

    def next_range(self, current: float, degree: int) -> tuple[KDecision, float]:
        decision = k_connection_decision(degree, self.k)
        if decision is KDecision.GROW:
            current *= self.grow
        elif decision is KDecision.SHRINK:
            current *= self.shrink
        return decision, min(max(current, self.r_min), self.r_max)
