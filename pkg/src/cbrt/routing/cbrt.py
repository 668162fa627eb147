"""
CBRT: route discovery with cross-layer candidate ranking and OTC ranges.

For each hop the sender broadcasts a route request. Nodes of its survival
set reply with seven metrics; the sender may re-tune its range from the
measured RND, filters the replies through the eligibility thresholds and
ranks the rest with the fuzzy weighting.
"""

from __future__ import annotations

import logging

import numpy as np

from cbrt.config import CANDIDATE_METRICS
from cbrt.errors import CbrtError, NoCandidates
from cbrt.mobility.kinematics import is_unbounded, predict_lifetime
from cbrt.mobility.world import survival_members
from cbrt.ranking.sbfl import FuzzySystem, prioritize
from cbrt.ranking.table import MetricTable, Orientation
from cbrt.routing.events import EventKind
from cbrt.routing.forwarding import opportunistic_forward
from cbrt.routing.packets import Candidate, CandidateRelaySet
from cbrt.topology.harness import SINK_DISTANCE_M, settled_range, sink_points, sink_rnd
from cbrt.topology.otc import OtcController, PoissonField, RegionPolicy

logger = logging.getLogger(__name__)

ORIENTATIONS = {
    "energy": Orientation.BENEFIT,
    "link_etx": Orientation.COST,
    "queue": Orientation.COST,
    "proc_delay": Orientation.COST,
    "dest_distance": Orientation.COST,
    "lifetime": Orientation.BENEFIT,
    "closing_speed": Orientation.BENEFIT,
}


def closing_speed(world, j: int, dest: int) -> float:
    """Rate at which j approaches dest (m/s); zero for dest itself."""
    gap = world.pos[dest] - world.pos[j]
    dist = float(np.hypot(*gap))
    if dist == 0.0:
        return 0.0
    v = world.velocity
    return float(np.dot(gap, v[j] - v[dest]) / dist)


def link_lifetime(world, s: int, j: int, dest: int, horizon: float) -> float:
    """Predicted residual lifetime of s -> j towards dest, capped at ``horizon``."""
    try:
        t = predict_lifetime(world.kinematic(s), world.kinematic(j), world.kinematic(dest),
                             float(world.range[s]), horizon)
    except CbrtError:
        return 0.0
    return horizon if is_unbounded(t.seconds) else float(t.seconds)


def candidate_metrics(sim, s: int, dest: int, ids) -> MetricTable:
    """One row of reply metrics per responder."""
    world = sim.world
    horizon = sim.cfg.routing.lifetime_horizon_s
    rows = []
    for j in ids:
        rows.append([
            float(world.energy[j]),
            sim.estimator.etx(s, j),
            float(len(world.queues[j])),
            float(sim.proc_delay[j]),
            world.distance(j, dest),
            link_lifetime(world, s, j, dest, horizon),
            closing_speed(world, j, dest),
        ])
    return MetricTable(np.array(rows, dtype=float).reshape(len(rows), len(CANDIDATE_METRICS)),
                       tuple(ORIENTATIONS[m] for m in CANDIDATE_METRICS), CANDIDATE_METRICS,
                       tuple(f"node{j}" for j in ids))


def eligible(table: MetricTable, ids, dest: int, bounds: dict[str, float]) -> np.ndarray:
    """Row mask of replies passing every threshold; the destination always passes."""
    keep = np.ones(table.m, dtype=bool)
    for name, bound in bounds.items():
        if name not in table.column_names:
            continue
        col = table.column(table.column_names.index(name))
        if ORIENTATIONS[name] is Orientation.BENEFIT:
            keep &= col >= bound
        else:
            keep &= col <= bound
    keep |= np.asarray(ids) == dest
    return keep


class CbrtRouter:
    name = "cbrt"

    def __init__(self, sim):
        self.sim = sim
        cfg = sim.cfg
        world = sim.world
        n1, n2 = cfg.policy.band()
        # tiny test networks can hold fewer nodes than the band's upper edge
        self.policy = RegionPolicy(n1, n2, max(world.n, n2))
        self.otc = OtcController(self.policy, PoissonField.uniform(world.n, world.cfg.side),
                                 r_min=world.cfg.r_min, r_max=world.cfg.range_max)
        self.fuzzy = FuzzySystem(term_count=cfg.routing.fuzzy_terms)
        self.bounds = {"energy": cfg.routing.energy_threshold_j, **cfg.routing.thresholds}
        self._cache: dict[tuple[int, int], tuple[float, float, CandidateRelaySet]] = {}
        self._route_tuned: dict[int, float] = {}

    # ── range control ────────────────────────────────────────────────

    def _set_range(self, i: int, r: float, rnd: int, cause: str) -> float:
        world = self.sim.world
        old = float(world.range[i])
        new = world.set_range(i, r)
        if new != old:
            self.sim.record_adjust(i, rnd, old, new, cause)
        return new

    def adjust_range(self, s: int, rnd: int, dest: int) -> float:
        """Algorithm-1 OTC step: with probability p(rnd) retarget the range on the RND just measured."""
        sim = self.sim
        world = sim.world
        self._route_tuned[s] = sim.env.now
        if self.otc.decide(rnd, sim.control):
            d = world.distance(s, dest)
            r = settled_range(self.otc, world, s, rnd, world.pos[dest], d)
            if d <= world.range[s]:
                # a destination already in reach stays in reach
                r = max(r, d)
            return self._set_range(s, r, rnd, "route")
        return float(world.range[s])

    def maintain(self):
        """Periodic OTC pass of alive nodes towards the distant central sink.

        Nodes that tuned for a route within ``routing.route_hold_s`` keep
        their range.
        """
        sim = self.sim
        world = sim.world
        hold = sim.cfg.routing.route_hold_s
        now = sim.env.now
        rnd = sink_rnd(world)
        sinks = sink_points(world)
        for i in np.flatnonzero(world.alive):
            i = int(i)
            if now - self._route_tuned.get(i, -np.inf) < hold:
                continue
            if self.otc.decide(int(rnd[i]), sim.control):
                r = settled_range(self.otc, world, i, int(rnd[i]), sinks[i], SINK_DISTANCE_M)
                self._set_range(i, r, int(rnd[i]), "maintenance")

    # ── candidate discovery ──────────────────────────────────────────

    def build_candidates(self, s: int, dest: int) -> CandidateRelaySet:
        sim = self.sim
        world = sim.world
        radio = sim.cfg.radio
        dest_xy = world.pos[dest]

        sim.broadcast(s, radio.control_bits, "control")
        responders = survival_members(world, s, dest_xy)
        rnd = len(responders)
        sim.emit(EventKind.ROUTE_REQUEST, node=s, dest=dest, range=float(world.range[s]), rnd=rnd)

        before = float(world.range[s])
        after = self.adjust_range(s, rnd, dest)
        if after > before:
            wider = survival_members(world, s, dest_xy)
            fresh = np.setdiff1d(wider, responders)
            sim.broadcast(s, radio.control_bits, "control", receivers=fresh)
            sim.emit(EventKind.ROUTE_REQUEST, node=s, dest=dest, range=after, rnd=len(wider))
            responders = wider
        elif after < before:
            responders = responders[world.distances()[s, responders] <= after]

        for j in responders:
            sim.unicast(int(j), s, radio.control_bits, "control")
            sim.emit(EventKind.ROUTE_REPLY, node=int(j), to=s)
        if len(responders) == 0:
            raise NoCandidates(f"node {s} has no survival set towards {dest}")

        ids = [int(j) for j in responders]
        table = candidate_metrics(sim, s, dest, ids)
        keep = eligible(table, ids, dest, self.bounds)
        if not keep.any():
            raise NoCandidates(f"no reply from node {s}'s survival set passed the thresholds")
        ids = [j for j, k in zip(ids, keep) if k]
        table = MetricTable(table.values[keep], table.orientations, table.column_names,
                            tuple(r for r, k in zip(table.row_names, keep) if k))
        order = prioritize(table, self.fuzzy, warn_zero_mean=False)
        members = tuple(Candidate(ids[i], u, sim.estimator.p_hat(s, ids[i])) for i, u in order)
        return CandidateRelaySet(members, sim.env.now, rnd).destination_first(dest)

    def candidates(self, s: int, dest: int) -> CandidateRelaySet:
        sim = self.sim
        key = (s, dest)
        cached = self._cache.get(key)
        now = sim.env.now
        if cached is not None:
            built_at, r, cands = cached
            if now - built_at < sim.cfg.routing.cache_s and r == float(sim.world.range[s]):
                return cands
        cands = self.build_candidates(s, dest)
        self._cache[key] = (now, float(sim.world.range[s]), cands)
        return cands

    def forward(self, s: int, pkt):
        cands = self.candidates(s, pkt.dest)
        return (yield from opportunistic_forward(self.sim, s, pkt, cands))

    def on_beacon(self):
        if self.sim.cfg.routing.otc_maintenance:
            self.maintain()
