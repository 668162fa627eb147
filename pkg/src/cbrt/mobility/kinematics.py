"""
Straight-line kinematics and residual link lifetime.

A relay r is a usable candidate of source s towards destination d while it
stays in the survival area: inside the range circle of s and strictly closer
to d than s is. ``residual_lifetime`` predicts when r leaves that area by
solving the two boundary equations in closed form:

* range circle, law-of-cosines form in the source frame::

      R^2 = d0^2 + (u t)^2 - 2 d0 u t cos(alpha)

  with u the speed of r relative to s and alpha the angle between r->s and
  that motion;

* destination circle, |r(t) - d(t)| = |s(t) - d(t)|, which reduces to::

      d_ds^2 = d_dr^2 + (w t)^2 - 2 d_dr w t cos(phi5)

  when s and d move together.

The lifetime is the smaller non-negative crossing time, and the prediction
names the boundary crossed: AWAY when r falls behind s, TOWARD when it
leaves the range circle. A link that never breaks takes the case of
``lifetime_case``, which judges the relay's velocity relative to the moving
s-d frame.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from cbrt.errors import CoincidentNodes, NotInSurvivalArea

TWO_PI = 2.0 * math.pi
UNBOUNDED = math.inf
DEFAULT_HORIZON_S = 1e9
ORACLE_CHUNK = 1 << 16


def is_unbounded(t: float) -> bool:
    return math.isinf(t)


def _wrap(angle: float) -> float:
    a = math.fmod(angle, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    return 0.0 if a >= TWO_PI else a


@dataclass(frozen=True)
class KinematicState:
    """Position (m) plus speed (m/s) and heading (rad, wrapped to [0, 2pi))."""

    x: float
    y: float
    speed: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("coordinates must be finite")
        if not math.isfinite(self.speed) or self.speed < 0.0:
            raise ValueError(f"speed must be a finite non-negative number, got {self.speed}")
        object.__setattr__(self, "heading", _wrap(float(self.heading)))

    @classmethod
    def from_velocity(cls, x: float, y: float, vx: float, vy: float) -> "KinematicState":
        speed = math.hypot(vx, vy)
        heading = math.atan2(vy, vx) if speed > 0.0 else 0.0
        return cls(x, y, speed, heading)

    @property
    def vx(self) -> float:
        return self.speed * math.cos(self.heading)

    @property
    def vy(self) -> float:
        return self.speed * math.sin(self.heading)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    def at(self, t: float) -> "KinematicState":
        return KinematicState(self.x + self.vx * t, self.y + self.vy * t, self.speed, self.heading)

    def shifted(self, dx: float = 0.0, dy: float = 0.0, dvx: float = 0.0, dvy: float = 0.0) -> "KinematicState":
        return KinematicState.from_velocity(self.x + dx, self.y + dy, self.vx + dvx, self.vy + dvy)


@dataclass(frozen=True)
class RelativeVelocity:
    speed: float
    heading: float
    vx: float
    vy: float

    @classmethod
    def from_components(cls, vx: float, vy: float) -> "RelativeVelocity":
        speed = math.hypot(vx, vy)
        heading = _wrap(math.atan2(vy, vx)) if speed > 0.0 else 0.0
        return cls(speed, heading, vx, vy)


@dataclass(frozen=True)
class LinkGeometry:
    d0: float
    d_ds: float
    d_dr: float
    R: float
    theta_sd_x: float


class LifetimeCase(str, enum.Enum):
    TOWARD = "toward"
    AWAY = "away"


class LifetimePrediction(NamedTuple):
    case: LifetimeCase
    range_exit: float
    destination_exit: float
    seconds: float


def relative_velocity(a: KinematicState, b: KinematicState) -> RelativeVelocity:
    """Velocity of a seen from b."""
    return RelativeVelocity.from_components(a.vx - b.vx, a.vy - b.vy)


def _bearing(s: KinematicState, d: KinematicState) -> float:
    if s.x == d.x and s.y == d.y:
        raise CoincidentNodes(f"source and destination share position ({s.x}, {s.y})")
    return _wrap(math.atan2(d.y - s.y, d.x - s.x))


def relative_angle(sdr: RelativeVelocity, s: KinematicState, d: KinematicState) -> float:
    """Heading of ``sdr`` measured from the s->d bearing, in [0, 2pi)."""
    return _wrap(sdr.heading - _bearing(s, d))


def link_geometry(s: KinematicState, r: KinematicState, d: KinematicState, R: float) -> LinkGeometry:
    return LinkGeometry(
        d0=math.hypot(r.x - s.x, r.y - s.y),
        d_ds=math.hypot(s.x - d.x, s.y - d.y),
        d_dr=math.hypot(r.x - d.x, r.y - d.y),
        R=float(R),
        theta_sd_x=_bearing(s, d),
    )


def frame_velocity(s: KinematicState, r: KinematicState, d: KinematicState) -> RelativeVelocity:
    """Relay velocity relative to the s-d frame: v_r - (v_s - v_d)."""
    v_sd = relative_velocity(s, d)
    return RelativeVelocity.from_components(r.vx - v_sd.vx, r.vy - v_sd.vy)


def lifetime_case(s: KinematicState, r: KinematicState, d: KinematicState) -> LifetimeCase:
    theta = relative_angle(frame_velocity(s, r, d), s, d)
    if theta <= math.pi / 2 or theta >= 3 * math.pi / 2:
        return LifetimeCase.TOWARD
    return LifetimeCase.AWAY


def _first_crossing(a: float, b: float, c: float) -> float:
    """First t >= 0 where a t^2 + b t + c turns positive, given c <= 0."""
    c = min(c, 0.0)
    if a == 0.0:
        return -c / b if b > 0.0 else UNBOUNDED
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return UNBOUNDED
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return 0.0 if a > 0.0 else UNBOUNDED
    lo, hi = sorted((q / a, c / q))
    if a > 0.0:
        return max(hi, 0.0)
    if lo >= 0.0 and hi > lo:
        return lo
    return UNBOUNDED


def _range_exit(s: KinematicState, r: KinematicState, geom: LinkGeometry) -> float:
    ux, uy = r.vx - s.vx, r.vy - s.vy
    u2 = ux * ux + uy * uy
    # d0 * u * cos(alpha), alpha measured between r->s and the relative motion
    d0_u_cos_alpha = (s.x - r.x) * ux + (s.y - r.y) * uy
    return _first_crossing(u2, -2.0 * d0_u_cos_alpha, geom.d0 ** 2 - geom.R ** 2)


def _destination_exit(s: KinematicState, r: KinematicState, d: KinematicState, geom: LinkGeometry) -> float:
    qx, qy = r.x - d.x, r.y - d.y
    wx, wy = r.vx - d.vx, r.vy - d.vy
    gx, gy = s.x - d.x, s.y - d.y
    zx, zy = s.vx - d.vx, s.vy - d.vy
    a = (wx * wx + wy * wy) - (zx * zx + zy * zy)
    b = 2.0 * ((qx * wx + qy * wy) - (gx * zx + gy * zy))
    return _first_crossing(a, b, geom.d_dr ** 2 - geom.d_ds ** 2)


def predict_lifetime(s: KinematicState, r: KinematicState, d: KinematicState, R: float,
                     horizon: float = DEFAULT_HORIZON_S) -> LifetimePrediction:
    if R <= 0.0:
        raise ValueError(f"range must be positive, got {R}")
    geom = link_geometry(s, r, d, R)
    slack = 1e-9 * max(1.0, geom.R, geom.d_ds)
    if geom.d0 > geom.R + slack or geom.d_dr > geom.d_ds + slack:
        raise NotInSurvivalArea(
            f"relay at ({r.x:.3f}, {r.y:.3f}) outside survival area: "
            f"d0={geom.d0:.3f} R={geom.R:.3f} d_dr={geom.d_dr:.3f} d_ds={geom.d_ds:.3f}"
        )
    t_range = _range_exit(s, r, geom)
    t_dest = _destination_exit(s, r, d, geom)
    if t_dest < t_range:
        case, t = LifetimeCase.AWAY, t_dest
    elif not is_unbounded(t_range):
        case, t = LifetimeCase.TOWARD, t_range
    else:
        case, t = lifetime_case(s, r, d), UNBOUNDED
    if t > horizon:
        t = UNBOUNDED
    return LifetimePrediction(case, t_range, t_dest, t)


def residual_lifetime(s: KinematicState, r: KinematicState, d: KinematicState, R: float,
                      horizon: float = DEFAULT_HORIZON_S) -> float:
    """Seconds until r leaves the survival area of s towards d, or UNBOUNDED."""
    return predict_lifetime(s, r, d, R, horizon).seconds


def survival_exit_oracle(s: KinematicState, r: KinematicState, d: KinematicState, R: float,
                         dt: float, horizon: float) -> float:
    """Step all three nodes along their straight lines; first violating step time."""
    if dt <= 0.0 or horizon <= 0.0:
        raise ValueError("dt and horizon must be positive")
    total = int(math.ceil(horizon / dt))
    start = 0
    while start < total:
        k = np.arange(start + 1, min(start + ORACLE_CHUNK, total) + 1, dtype=float)
        t = k * dt
        sx, sy = s.x + s.vx * t, s.y + s.vy * t
        rx, ry = r.x + r.vx * t, r.y + r.vy * t
        dx, dy = d.x + d.vx * t, d.y + d.vy * t
        out_of_range = np.hypot(rx - sx, ry - sy) > R
        behind = np.hypot(rx - dx, ry - dy) > np.hypot(sx - dx, sy - dy)
        hit = np.flatnonzero(out_of_range | behind)
        if hit.size:
            return float(t[hit[0]])
        start += ORACLE_CHUNK
    return UNBOUNDED


@dataclass(frozen=True)
class LifetimeScenario:
    """One source/relay/destination record for single-shot prediction."""

    source: KinematicState
    relay: KinematicState
    dest: KinematicState
    R: float

    FIELDS = ("x", "y", "speed", "heading")

    @classmethod
    def from_mapping(cls, record: dict) -> "LifetimeScenario":
        def state(key):
            part = record[key]
            if isinstance(part, (list, tuple)):
                return KinematicState(*(float(v) for v in part))
            return KinematicState(**{f: float(part.get(f, 0.0)) for f in cls.FIELDS})
        return cls(state("source"), state("relay"), state("dest"), float(record["range"]))
