"""
Opportunistic topology control (OTC).

A node is healthy while its relay node degree (RND, the size of its survival
set) stays inside [n1, n2]. Unhealthy nodes re-tune their transmission range
with a probability that grows with the distance of the RND from the healthy
band. The target survival area maximises the Poisson probability of landing
inside the band, at a density each node estimates from its own RND.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import bisect, minimize_scalar
from scipy.special import gammaln
from scipy.stats import poisson

from cbrt.errors import NoBracket, Unreachable

logger = logging.getLogger(__name__)


def ptp(p_i: float, n: int) -> float:
    """Probability that at least one of n relays hears a transmission."""
    if not 0.0 <= p_i <= 1.0 or n < 0:
        raise ValueError(f"invalid ptp arguments p_i={p_i}, n={n}")
    return 1.0 - (1.0 - p_i) ** n


def required_rnd(p_i: float, ptp_target: float) -> int:
    """Smallest relay count whose PTP reaches the target."""
    if not (0.0 < p_i < 1.0 and 0.0 < ptp_target < 1.0):
        raise ValueError(f"required_rnd needs 0 < p_i, target < 1, got {p_i}, {ptp_target}")
    n = max(0, math.ceil(math.log(1.0 - ptp_target) / math.log(1.0 - p_i) - 1e-9))
    while ptp(p_i, n) < ptp_target:
        n += 1
    while n > 0 and ptp(p_i, n - 1) >= ptp_target:
        n -= 1
    return n


@dataclass(frozen=True)
class RegionPolicy:
    """Healthy RND band [n1, n2] inside a network of N nodes."""

    n1: int
    n2: int
    N: int
    p1: float | None = None
    p2: float | None = None

    def __post_init__(self):
        if not (0 <= self.n1 < self.n2 <= self.N):
            raise ValueError(f"need 0 <= n1 < n2 <= N, got n1={self.n1} n2={self.n2} N={self.N}")
        if (self.p1 is None) != (self.p2 is None):
            raise ValueError("p1 and p2 must be given together")
        if self.p1 is not None and not (0.0 < self.p1 < self.p2 < 1.0):
            raise ValueError(f"need 0 < p1 < p2 < 1, got p1={self.p1} p2={self.p2}")

    @classmethod
    def from_ptp(cls, p1: float, p2: float, link_p: float, N: int) -> "RegionPolicy":
        return cls(required_rnd(link_p, p1), required_rnd(link_p, p2), N, p1, p2)

    def healthy(self, n_i: int) -> bool:
        return self.n1 <= n_i <= self.n2


@dataclass(frozen=True)
class PoissonField:
    rho: float

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError(f"node density must be positive, got {self.rho}")

    @classmethod
    def uniform(cls, node_count: int, side: float) -> "PoissonField":
        return cls(node_count / (side * side))

    def mean(self, area: float) -> float:
        return self.rho * area


@dataclass(frozen=True)
class RangeSolution:
    delta_star: float
    r_star: float
    d: float


def in_band(rnd, n1: int, n2: int) -> np.ndarray:
    """1.0 where an RND sample lies in [n1, n2], 0.0 outside and NaN where it is missing."""
    rnd = np.asarray(rnd, dtype=float)
    return np.where(np.isnan(rnd), np.nan, ((rnd >= n1) & (rnd <= n2)).astype(float))


def band_fraction(rnd, n1: int, n2: int) -> float:
    """Share of the present RND samples inside [n1, n2]; NaN when none are present."""
    flags = in_band(rnd, n1, n2)
    flags = flags[~np.isnan(flags)]
    return float(flags.mean()) if len(flags) else math.nan


def adjustment_probability(n_i: int, policy: RegionPolicy) -> float:
    if policy.healthy(n_i):
        return 0.0
    if n_i < policy.n1:
        p = (policy.n1 - n_i) / policy.n1
    elif policy.N > policy.n2:
        p = (n_i - policy.n2) / (policy.N - policy.n2)
    else:
        p = 1.0
    return min(max(p, 0.0), 1.0)


def _pmf(lo: int, hi: int, lam: float) -> np.ndarray:
    if hi < lo:
        return np.zeros(0)
    return poisson.pmf(np.arange(lo, hi + 1), lam)


def poisson_region_prob(field: PoissonField, area: float, n1: int, n2: int) -> float:
    if area <= 0.0:
        raise ValueError("area must be positive")
    return float(_pmf(max(n1, 0), n2, field.mean(area)).sum())


def unhealthy_prob(field: PoissonField, area: float, policy: RegionPolicy) -> float:
    lam = field.mean(area)
    return float(_pmf(0, policy.n1 - 1, lam).sum() + _pmf(policy.n2 + 1, policy.N, lam).sum())


def predicted_adjustment_ratio(field: PoissonField, area: float, policy: RegionPolicy) -> float:
    """Expected per-node adjustment probability for survival areas of this size."""
    lam = field.mean(area)
    low = np.arange(0, policy.n1)
    high = np.arange(policy.n2 + 1, policy.N + 1)
    total = sum(poisson.pmf(n, lam) * adjustment_probability(int(n), policy) for n in low)
    total += sum(poisson.pmf(n, lam) * adjustment_probability(int(n), policy) for n in high)
    return float(total)


def _region_slope(lam: float, n1: int, n2: int) -> float:
    """Sign-faithful, rescaled sum of (lam)^(n-1) (n - lam) / n! over the band."""
    n = np.arange(n1, n2 + 1, dtype=float)
    log_mag = (n - 1.0) * math.log(lam) - gammaln(n + 1.0)
    scale = log_mag.max()
    return float(np.sum(np.exp(log_mag - scale) * (n - lam)))


def optimal_area(field: PoissonField, n1: int, n2: int) -> float:
    """Survival area that maximises P(n1 <= RND <= n2)."""
    if n1 < 1 or n2 < n1:
        raise ValueError(f"need 1 <= n1 <= n2, got n1={n1} n2={n2}")
    if n1 == n2:
        return n1 / field.rho
    lo, hi = _region_slope(n1, n1, n2), _region_slope(n2, n1, n2)
    if lo * hi > 0.0:
        raise NoBracket(f"region slope keeps its sign on [{n1}, {n2}]")
    lam = bisect(_region_slope, n1, n2, args=(n1, n2), xtol=1e-12, rtol=1e-9)
    return lam / field.rho


def _neg_lens_shape(u: float) -> float:
    return -(u * u * math.acos(u))


# r^2 arccos(r / 2d) = 4 d^2 u^2 arccos(u) with u = r / 2d peaks here.
_PEAK_U = float(minimize_scalar(_neg_lens_shape, bounds=(0.0, 1.0), method="bounded",
                                options={"xatol": 1e-12}).x)
_PEAK_SHAPE = -_neg_lens_shape(_PEAK_U)


def max_survival_area(d: float) -> float:
    return 4.0 * d * d * _PEAK_SHAPE


def survival_area(r: float, d: float) -> float:
    """Area r^2 arccos(r / 2d) of range r towards a destination d away, held at its peak beyond it."""
    if r <= 0.0 or d <= 0.0:
        raise ValueError(f"need r > 0 and d > 0, got {r}, {d}")
    if math.isinf(d):
        return math.pi * r * r / 2.0
    u = min(r / (2.0 * d), _PEAK_U)
    return 4.0 * d * d * u * u * math.acos(u)


def min_distance_for(delta_star: float) -> float:
    """Smallest d at which the survival area delta_star is reachable."""
    return math.sqrt(delta_star / (4.0 * _PEAK_SHAPE))


def optimal_range(delta_star: float, d: float, *, r_min: float = 0.0, r_max: float = math.inf) -> float:
    """Range whose survival area towards a destination at distance d equals delta_star."""
    if delta_star <= 0.0 or d <= 0.0:
        raise ValueError(f"need delta_star > 0 and d > 0, got {delta_star}, {d}")
    if math.isinf(d):
        r = math.sqrt(2.0 * delta_star / math.pi)
    else:
        peak_r = 2.0 * d * _PEAK_U
        if delta_star > max_survival_area(d):
            fallback = r_max if math.isfinite(r_max) else peak_r
            logger.warning("%s", Unreachable(
                f"survival area {delta_star:.1f} m^2 unreachable at d={d:.1f} m; using range {fallback:.1f} m"))
            return fallback

        def excess(r: float) -> float:
            return r * r * math.acos(min(r / (2.0 * d), 1.0)) - delta_star

        r = bisect(excess, 0.0, peak_r, xtol=1e-7, rtol=1e-12)
    return min(max(r, r_min), r_max)


class OtcController:
    """Per-node OTC decisions for one network."""

    def __init__(self, policy: RegionPolicy, field: PoissonField, *, r_min: float, r_max: float):
        self.policy = policy
        self.field = field
        self.r_min = r_min
        self.r_max = r_max

    @cached_property
    def delta_star(self) -> float:
        return optimal_area(self.field, self.policy.n1, self.policy.n2)

    def adjust_probability(self, rnd: int) -> float:
        return adjustment_probability(rnd, self.policy)

    def decide(self, rnd: int, rng: np.random.Generator) -> bool:
        p = self.adjust_probability(rnd)
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return bool(rng.random() < p)

    def _solution(self, delta: float, d: float) -> RangeSolution:
        d_eff = max(d, min_distance_for(delta) * (1.0 + 1e-9))
        return RangeSolution(delta, optimal_range(delta, d_eff, r_min=self.r_min, r_max=self.r_max), d_eff)

    def solve(self, d: float) -> RangeSolution:
        """Target range for a destination at distance d (clamped so it stays solvable)."""
        return self._solution(self.delta_star, d)

    def local_field(self, rnd: int, area: float) -> PoissonField:
        """Density seen by one node: its RND over its survival area, pooled with
        the field density weighted as one optimal survival area."""
        if rnd < 0 or area < 0.0:
            raise ValueError(f"need rnd >= 0 and area >= 0, got {rnd}, {area}")
        return PoissonField((self.field.mean(self.delta_star) + rnd) / (self.delta_star + area))

    def retarget(self, r: float, rnd: int, d: float) -> RangeSolution:
        """Range that centres the RND of a node now at range r, seeing rnd relays
        towards a destination d away, on the Poisson-optimal count."""
        field = self.local_field(rnd, survival_area(r, d))
        return self._solution(optimal_area(field, self.policy.n1, self.policy.n2), d)

    @cached_property
    def target_count(self) -> int:
        """Relay count the optimal survival area holds on average, kept inside the band."""
        lam = self.field.mean(self.delta_star)
        return min(max(int(round(lam)), self.policy.n1), self.policy.n2)

    def settle(self, r: float, distances) -> float:
        """Trim range r to keep the target count of nearest members when more than n2 lie within it."""
        inside = np.sort(np.asarray(distances, dtype=float))
        inside = inside[inside <= r]
        t = self.target_count
        if len(inside) <= self.policy.n2 or t < 1:
            return r
        return min(max((inside[t - 1] + inside[t]) / 2.0, self.r_min), r)

    def predicted_ratio(self) -> float:
        return predicted_adjustment_ratio(self.field, self.delta_star, self.policy)
