"""
ExOR baseline: fixed ranges, forwarders prioritised by ETX to the destination.

Path ETX comes from shortest paths over the beacon graph (edge weight
1 / p_hat). The forwarder list is the sender's survival set sorted by that
ETX, pruned to candidates expected to forward a meaningful share of packets.
"""

from __future__ import annotations

import logging
import math

import networkx as nx

from cbrt.errors import NoCandidates
from cbrt.mobility.world import survival_members
from cbrt.routing.forwarding import opportunistic_forward
from cbrt.routing.packets import Candidate, CandidateRelaySet

logger = logging.getLogger(__name__)


def etx_to_destination(graph: nx.DiGraph, dest: int) -> dict[int, float]:
    """Shortest cumulative ETX from every node to dest."""
    return nx.single_source_dijkstra_path_length(graph.reverse(copy=False), dest, weight="weight")


def forwarder_list(ids, path_etx: dict[int, float], p_hat, min_share: float) -> list[tuple[int, float, float]]:
    """(node, path ETX, p_hat) in priority order after pruning.

    A candidate stays while the chance that it, and no better-placed candidate,
    receives a transmission is at least ``min_share``.
    """
    ranked = sorted(ids, key=lambda j: (path_etx.get(j, math.inf), j))
    kept = []
    miss = 1.0
    for j in ranked:
        etx = path_etx.get(j, math.inf)
        if math.isinf(etx):
            break
        p = p_hat(j)
        if miss * p >= min_share:
            kept.append((j, etx, p))
            miss *= 1.0 - p
    return kept


class ExorRouter:
    name = "exor"

    def __init__(self, sim):
        self.sim = sim
        self._etx_cache: dict[int, dict[int, float]] = {}
        self._graph: nx.DiGraph | None = None

    def path_etx(self, dest: int) -> dict[int, float]:
        if dest not in self._etx_cache:
            if self._graph is None:
                self._graph = self.sim.estimator.graph(alive=self.sim.world.alive)
            self._etx_cache[dest] = etx_to_destination(self._graph, dest)
        return self._etx_cache[dest]

    def candidates(self, s: int, dest: int) -> CandidateRelaySet:
        sim = self.sim
        world = sim.world
        survivors = survival_members(world, s, world.pos[dest])
        kept = forwarder_list([int(j) for j in survivors], self.path_etx(dest),
                              lambda j: sim.estimator.p_hat(s, j), sim.cfg.routing.exor_min_share)
        if not kept:
            raise NoCandidates(f"node {s} has no usable forwarder towards {dest}")
        members = tuple(Candidate(j, -etx, p) for j, etx, p in kept)
        return CandidateRelaySet(members, sim.env.now, len(survivors))

    def forward(self, s: int, pkt):
        cands = self.candidates(s, pkt.dest)
        return (yield from opportunistic_forward(self.sim, s, pkt, cands))

    def on_beacon(self):
        self._graph = None
        self._etx_cache.clear()


def exor_forward(sim, s: int, pkt):
    """simpy generator: one ExOR hop from s using the simulation's ExOR router."""
    router = sim.router if isinstance(sim.router, ExorRouter) else ExorRouter(sim)
    return (yield from router.forward(s, pkt))
