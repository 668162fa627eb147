"""
The simulated deployment: node placement, mobility, neighbour geometry and
ground-truth link delivery probabilities.

State is held column-wise in numpy arrays so neighbour queries over the whole
network stay vectorised; ``World.node(i)`` gives the per-node view.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from cbrt.mobility.kinematics import KinematicState

STREAMS = ("mobility", "channel", "traffic", "control")
RWP_SPEED_RATIO = 3.0
SNAPSHOT_COLUMNS = ["id", "x", "y", "speed", "heading", "range", "energy"]


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per concern, all derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


def rwp_speed_bounds(speed_mean: float) -> tuple[float, float]:
    """Per-leg Random Waypoint speed range whose time-averaged speed is speed_mean.

    Legs of equal length last 1 / v, so the time average is the harmonic mean
    of the leg speeds, (hi - lo) / ln(hi / lo) for a uniform draw on [lo, hi].
    """
    lo = speed_mean * math.log(RWP_SPEED_RATIO) / (RWP_SPEED_RATIO - 1.0)
    return lo, lo * RWP_SPEED_RATIO


class Mobility(str, enum.Enum):
    RANDOM_WAYPOINT = "random_waypoint"
    CONSTANT_VELOCITY = "constant_velocity"


@dataclass(frozen=True)
class LinkModel:
    """Delivery probability as a function of distance / sender range.

    ``exponent`` shapes the falloff p = 1 - x**exponent inside the range;
    ``exponent=None`` is a disk model (p = 1 inside).
    """

    name: str = "quadratic"
    exponent: float | None = 2.0

    def p_of_distance(self, ratio):
        x = np.asarray(ratio, dtype=float)
        if self.exponent is None:
            p = np.ones_like(x)
        else:
            p = 1.0 - np.power(np.clip(x, 0.0, None), self.exponent)
        return np.where(x <= 1.0, np.clip(p, 0.0, 1.0), 0.0)


LINK_MODELS = {
    "quadratic": LinkModel("quadratic", 2.0),
    "linear": LinkModel("linear", 1.0),
    "disk": LinkModel("disk", None),
}


@dataclass(frozen=True)
class WorldConfig:
    side: float = 1000.0
    node_count: int = 50
    speed_mean: float = 0.2
    initial_range: float = 500.0
    seed: int = 1
    mobility: Mobility = Mobility.RANDOM_WAYPOINT
    initial_energy: float = 5.0
    pause_s: float = 0.0
    r_min: float = 10.0
    r_max: float | None = None
    link_model: str = "quadratic"

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError(f"side must be positive, got {self.side}")
        if self.node_count < 2:
            raise ValueError(f"node_count must be at least 2, got {self.node_count}")
        if self.speed_mean < 0:
            raise ValueError("speed_mean must be non-negative")
        if self.pause_s < 0:
            raise ValueError("pause_s must be non-negative")
        if not self.initial_range > 0:
            raise ValueError("initial_range must be positive")
        if self.link_model not in LINK_MODELS:
            raise ValueError(f"unknown link model {self.link_model!r}")
        object.__setattr__(self, "mobility", Mobility(self.mobility))

    @property
    def range_max(self) -> float:
        return self.side if self.r_max is None else self.r_max


@dataclass
class NodeState:
    id: int
    kin: KinematicState
    range: float
    energy: float
    queue: deque = field(repr=False)
    alive: bool = True


class World:
    def __init__(self, cfg: WorldConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.link_model = LINK_MODELS[cfg.link_model]
        n = cfg.node_count
        self.time = 0.0
        self.pos = rng.uniform(0.0, cfg.side, size=(n, 2))
        if cfg.mobility is Mobility.RANDOM_WAYPOINT:
            # time-stationary leg speeds: log-uniform on the per-leg range
            lo, hi = rwp_speed_bounds(cfg.speed_mean)
            u = rng.uniform(0.0, 1.0, size=n)
            self.speed = lo * (hi / lo) ** u if lo > 0 else np.zeros(n)
            self.waypoint = rng.uniform(0.0, cfg.side, size=(n, 2))
            to_wp = self.waypoint - self.pos
            self.heading = np.mod(np.arctan2(to_wp[:, 1], to_wp[:, 0]), 2 * math.pi)
        else:
            self.speed = rng.uniform(0.0, 2.0 * cfg.speed_mean, size=n)
            self.waypoint = None
            self.heading = rng.uniform(0.0, 2 * math.pi, size=n)
        self.range = np.full(n, min(max(cfg.initial_range, cfg.r_min), cfg.range_max))
        self.energy = np.full(n, float(cfg.initial_energy))
        self.alive = np.ones(n, dtype=bool)
        self.pause_left = np.zeros(n)
        self.queues = [deque() for _ in range(n)]
        self._dist = None

    @property
    def n(self) -> int:
        return self.cfg.node_count

    @property
    def velocity(self) -> np.ndarray:
        return np.column_stack((self.speed * np.cos(self.heading), self.speed * np.sin(self.heading)))

    def kinematic(self, i: int) -> KinematicState:
        return KinematicState(float(self.pos[i, 0]), float(self.pos[i, 1]),
                              float(self.speed[i]), float(self.heading[i]))

    def node(self, i: int) -> NodeState:
        return NodeState(i, self.kinematic(i), float(self.range[i]), float(self.energy[i]),
                         self.queues[i], bool(self.alive[i]))

    @property
    def nodes(self) -> list[NodeState]:
        return [self.node(i) for i in range(self.n)]

    def distances(self) -> np.ndarray:
        if self._dist is None:
            delta = self.pos[:, None, :] - self.pos[None, :, :]
            self._dist = np.hypot(delta[..., 0], delta[..., 1])
        return self._dist

    def distance(self, a: int, b: int) -> float:
        return float(self.distances()[a, b])

    def moved(self):
        self._dist = None

    def set_range(self, i: int, r: float) -> float:
        self.range[i] = min(max(r, self.cfg.r_min), self.cfg.range_max)
        return float(self.range[i])

    def charge(self, i: int, joules: float) -> float:
        """Drain a node; returns the energy actually removed."""
        if joules < 0:
            raise ValueError("cannot charge negative energy")
        applied = min(joules, float(self.energy[i]))
        self.energy[i] -= applied
        if self.energy[i] <= 0.0:
            self.energy[i] = 0.0
            self.alive[i] = False
        return applied

    def neighbours(self, i: int, radius: float | None = None) -> np.ndarray:
        """Alive nodes within ``radius`` (default: i's range), excluding i."""
        radius = self.range[i] if radius is None else radius
        mask = self.alive & (self.distances()[i] <= radius)
        mask[i] = False
        return np.flatnonzero(mask)

    def snapshot(self) -> pd.DataFrame:
        return pd.DataFrame({
            "id": np.arange(self.n),
            "x": self.pos[:, 0],
            "y": self.pos[:, 1],
            "speed": self.speed,
            "heading": self.heading,
            "range": self.range,
            "energy": self.energy,
        }, columns=SNAPSHOT_COLUMNS)


def init_world(cfg: WorldConfig, rng: np.random.Generator | None = None) -> World:
    """Uniform placement in the square; seeded from cfg.seed unless rng is given."""
    if rng is None:
        rng = rng_streams(cfg.seed)["mobility"]
    return World(cfg, rng)


def _reflect(world: World):
    side = world.cfg.side
    vel = world.velocity
    for axis in (0, 1):
        coord = world.pos[:, axis]
        while True:
            low, high = coord < 0.0, coord > side
            if not (low.any() or high.any()):
                break
            coord[low] = -coord[low]
            coord[high] = 2.0 * side - coord[high]
            vel[low | high, axis] *= -1.0
    world.heading = np.mod(np.arctan2(vel[:, 1], vel[:, 0]), 2 * math.pi)


def _step_waypoints(world: World, dt: float):
    cfg = world.cfg
    lo, hi = rwp_speed_bounds(cfg.speed_mean)
    resting = world.pause_left > 0.0
    if resting.any():
        world.pause_left[resting] = np.maximum(world.pause_left[resting] - dt, 0.0)
        resumed = resting & (world.pause_left == 0.0)
        world.speed[resumed] = world.rng.uniform(lo, hi, size=int(resumed.sum()))

    to_wp = world.waypoint - world.pos
    dist = np.hypot(to_wp[:, 0], to_wp[:, 1])
    step = world.speed * dt
    arrived = ~resting & (dist <= step)
    moving = ~resting & ~arrived & (dist > 0)
    world.pos[moving] += to_wp[moving] * (step[moving] / dist[moving])[:, None]
    world.pos[arrived] = world.waypoint[arrived]
    k = int(arrived.sum())
    if k:
        world.waypoint[arrived] = world.rng.uniform(0.0, cfg.side, size=(k, 2))
        if cfg.pause_s > 0.0:
            world.speed[arrived] = 0.0
            world.pause_left[arrived] = cfg.pause_s
        else:
            world.speed[arrived] = world.rng.uniform(lo, hi, size=k)
    to_wp = world.waypoint - world.pos
    world.heading = np.mod(np.arctan2(to_wp[:, 1], to_wp[:, 0]), 2 * math.pi)
    np.clip(world.pos, 0.0, cfg.side, out=world.pos)


def step_mobility(world: World, dt: float) -> World:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return world
    cfg = world.cfg
    if cfg.mobility is Mobility.CONSTANT_VELOCITY:
        world.pos += world.velocity * dt
        _reflect(world)
    else:
        _step_waypoints(world, dt)
    world.time += dt
    world.moved()
    return world


def survival_members(world: World, s: int, dest_xy, radius: float | None = None) -> np.ndarray:
    """Sorted ids of alive nodes in range of s and strictly closer to dest_xy than s."""
    radius = world.range[s] if radius is None else radius
    dest_xy = np.asarray(dest_xy, dtype=float)
    to_dest = np.hypot(world.pos[:, 0] - dest_xy[0], world.pos[:, 1] - dest_xy[1])
    mask = world.alive & (world.distances()[s] <= radius) & (to_dest < to_dest[s])
    mask[s] = False
    return np.flatnonzero(mask)


def survival_set(world: World, s: int, dest: int, radius: float | None = None) -> set[int]:
    if s == dest:
        raise ValueError("source and destination must differ")
    return {int(j) for j in survival_members(world, s, world.pos[dest], radius)}


def survival_set_toward(world: World, s: int, point, radius: float | None = None) -> set[int]:
    return {int(j) for j in survival_members(world, s, point, radius)}


def link_delivery_prob(world: World, a: int, b: int) -> float:
    if not (world.alive[a] and world.alive[b]):
        return 0.0
    return float(world.link_model.p_of_distance(world.distance(a, b) / world.range[a]))


def delivery_matrix(world: World) -> np.ndarray:
    """p[a, b] for every ordered pair; zero on the diagonal and for dead nodes."""
    p = world.link_model.p_of_distance(world.distances() / world.range[:, None])
    p[~world.alive, :] = 0.0
    p[:, ~world.alive] = 0.0
    np.fill_diagonal(p, 0.0)
    return p


def write_snapshot(world: World, path: str | Path) -> Path:
    path = Path(path)
    world.snapshot().to_csv(path, index=False, float_format="%.6f")
    return path
