"""
Side-by-side run of OTC and k-connection on identical mobility traces.

Both controllers get a world built from the same seed; ranges never feed back
into motion, so the two worlds move identically and only the range decisions
differ. OTC measures each node's RND towards a distant sink placed beyond the
centre of the field, which makes its survival area a half disc. Unhealthy
nodes retarget from their own RND, so each converges on the band even where
the local density departs from the field average; a node that shrinks keeps
the target count of its nearest survival members.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from cbrt.mobility.world import WorldConfig, init_world, rng_streams, step_mobility, survival_members
from cbrt.topology.kconnection import KConnectionController, KDecision
from cbrt.topology.otc import OtcController, PoissonField, RegionPolicy, band_fraction

logger = logging.getLogger(__name__)

SINK_DISTANCE_M = 1e7
TOPO_COLUMNS = [
    "time", "controller", "node_count", "seed", "adjust_ratio",
    "mean_degree", "mean_rnd", "mean_range_m", "predicted_ratio",
]
OTC, KCONN = "otc", "kconnection"


def sink_points(world) -> np.ndarray:
    """Per-node reference sink: far out along the node-to-centre direction."""
    centre = np.full(2, world.cfg.side / 2.0)
    direction = centre - world.pos
    norm = np.hypot(direction[:, 0], direction[:, 1])
    direction[norm == 0.0] = (1.0, 0.0)
    norm[norm == 0.0] = 1.0
    return world.pos + direction / norm[:, None] * SINK_DISTANCE_M


def settled_range(otc: OtcController, world, i: int, rnd: int, dest_xy, d: float) -> float:
    """OTC range for node i towards dest_xy (d away), trimmed to the target count of its survival set."""
    target = otc.retarget(float(world.range[i]), rnd, d).r_star
    members = survival_members(world, i, dest_xy, target)
    return otc.settle(target, world.distances()[i, members])


def degrees(world) -> np.ndarray:
    """Alive neighbours inside each node's own range."""
    in_range = world.distances() <= world.range[:, None]
    in_range &= world.alive[None, :]
    np.fill_diagonal(in_range, False)
    return in_range.sum(axis=1)


def sink_rnd(world) -> np.ndarray:
    """RND of every node towards its own distant sink."""
    sinks = sink_points(world)
    # to_sink[i, j]: distance from node j to node i's sink
    to_sink = np.hypot(world.pos[None, :, 0] - sinks[:, None, 0], world.pos[None, :, 1] - sinks[:, None, 1])
    closer = to_sink < np.diag(to_sink)[:, None]
    in_range = world.distances() <= world.range[:, None]
    members = closer & in_range & world.alive[None, :]
    np.fill_diagonal(members, False)
    return members.sum(axis=1)


@dataclass(frozen=True)
class TopologySummary:
    controller: str
    adjust_ratio: float
    mean_degree: float
    mean_rnd: float
    rnd_in_band: float


class TopologyHarness:
    def __init__(self, world_cfg: WorldConfig, n1: int, n2: int, kconn: KConnectionController, *,
                 duration: float = 300.0, epoch: float = 1.0):
        if duration <= 0 or epoch <= 0:
            raise ValueError("duration and epoch must be positive")
        self.world_cfg = world_cfg
        self.policy = RegionPolicy(n1, n2, max(world_cfg.node_count, n2))
        self.kconn = kconn
        self.duration = duration
        self.epoch = epoch
        self.otc = OtcController(self.policy, PoissonField.uniform(world_cfg.node_count, world_cfg.side),
                                 r_min=world_cfg.r_min, r_max=world_cfg.range_max)
        self.otc_range = self.otc.solve(SINK_DISTANCE_M).r_star
        logger.info("OTC field target: delta*=%.1f m^2, r*=%.2f m (N=%d)",
                    self.otc.delta_star, self.otc_range, world_cfg.node_count)

    def _row(self, world, controller: str, adjusted: int, predicted: float) -> dict:
        alive = world.alive
        count = max(int(alive.sum()), 1)
        return {
            "time": round(world.time, 9),
            "controller": controller,
            "node_count": world.cfg.node_count,
            "seed": world.cfg.seed,
            "adjust_ratio": adjusted / count,
            "mean_degree": float(degrees(world)[alive].mean()),
            "mean_rnd": float(sink_rnd(world)[alive].mean()),
            "mean_range_m": float(world.range[alive].mean()),
            "predicted_ratio": predicted,
        }

    def _epochs(self):
        return int(math.floor(self.duration / self.epoch + 1e-9))

    def run_otc(self) -> pd.DataFrame:
        streams = rng_streams(self.world_cfg.seed)
        world = init_world(self.world_cfg, streams["mobility"])
        control = streams["control"]
        predicted = self.otc.predicted_ratio()
        rows = []
        for _ in range(self._epochs()):
            step_mobility(world, self.epoch)
            rnd = sink_rnd(world)
            sinks = sink_points(world)
            adjusted = 0
            for i in np.flatnonzero(world.alive):
                if self.otc.decide(int(rnd[i]), control):
                    adjusted += 1
                    r = settled_range(self.otc, world, int(i), int(rnd[i]), sinks[i], SINK_DISTANCE_M)
                    world.set_range(int(i), r)
            rows.append(self._row(world, OTC, adjusted, predicted))
        return pd.DataFrame(rows, columns=TOPO_COLUMNS)

    def run_kconnection(self) -> pd.DataFrame:
        world = init_world(self.world_cfg, rng_streams(self.world_cfg.seed)["mobility"])
        rows = []
        for _ in range(self._epochs()):
            step_mobility(world, self.epoch)
            deg = degrees(world)
            adjusted = 0
            for i in np.flatnonzero(world.alive):
                decision, r = self.kconn.next_range(float(world.range[i]), int(deg[i]))
                if decision is not KDecision.HOLD:
                    adjusted += 1
                    world.set_range(int(i), r)
            rows.append(self._row(world, KCONN, adjusted, math.nan))
        return pd.DataFrame(rows, columns=TOPO_COLUMNS)

    def run(self) -> pd.DataFrame:
        return pd.concat([self.run_otc(), self.run_kconnection()], ignore_index=True)


def summarize(frame: pd.DataFrame, n1: int, n2: int, warmup: float) -> list[TopologySummary]:
    """Post-warmup aggregates per controller."""
    steady = frame[frame["time"] > warmup]
    out = []
    for controller, group in steady.groupby("controller", sort=True):
        rnd = group["mean_rnd"]
        out.append(TopologySummary(
            controller=str(controller),
            adjust_ratio=float(group["adjust_ratio"].mean()),
            mean_degree=float(group["mean_degree"].mean()),
            mean_rnd=float(rnd.mean()),
            rnd_in_band=band_fraction(rnd, n1, n2),
        ))
    return out
