"""
Opportunistic hop transmission shared by CBRT and ExOR.

The sender broadcasts; every candidate hears it independently with its true
delivery probability. The highest-priority receiver forwards and the others
suppress on overhearing its acknowledgement. Routers list the destination
first whenever it is a candidate. Without any receiver the sender
retransmits, up to ``max_retries`` transmissions in total.
"""

from __future__ import annotations

import numpy as np

from cbrt.errors import Dropped, NoCandidates
from cbrt.mobility.world import link_delivery_prob
from cbrt.routing.events import EventKind
from cbrt.routing.packets import CandidateRelaySet, HopResult, Outcome, Packet


def pick_forwarder(heard: np.ndarray) -> int | None:
    """Index of the highest-priority receiver, or None when nobody heard."""
    receivers = np.flatnonzero(heard)
    return int(receivers[0]) if receivers.size else None


def opportunistic_forward(sim, s: int, pkt: Packet, cands: CandidateRelaySet):
    """simpy generator; returns a HopResult or raises Dropped / NoCandidates."""
    if len(cands) == 0:
        raise NoCandidates(f"node {s} has no relay towards {pkt.dest}")
    ids = cands.ids
    world = sim.world
    for attempt in range(1, sim.cfg.routing.max_retries + 1):
        if not world.alive[s]:
            raise Dropped(f"node {s} died holding packet {pkt.id}")
        pkt.tx_count += 1
        sim.counters.data_tx += 1
        sim.broadcast(s, sim.cfg.radio.data_bits, "data")
        sim.emit(EventKind.DATA_TX, node=s, packet=pkt.id, attempt=attempt, candidates=len(ids))
        yield sim.env.timeout(sim.data_airtime)

        p = np.array([link_delivery_prob(world, s, m) for m in ids])
        heard = sim.channel.random(len(ids)) < p
        idx = pick_forwarder(heard)
        if idx is None:
            continue
        forwarder = ids[idx]
        pkt.hops += 1
        sim.counters.hops += 1
        sim.emit(EventKind.DATA_RX, node=forwarder, packet=pkt.id, sender=s)
        suppressed = [ids[k] for k in np.flatnonzero(heard) if k != idx]
        if suppressed:
            sim.emit(EventKind.ACK_OVERHEAR, node=forwarder, packet=pkt.id, suppressed=suppressed)
        outcome = Outcome.DELIVERED if forwarder == pkt.dest else Outcome.FORWARDED
        return HopResult(outcome, forwarder, attempt)
    raise Dropped(f"packet {pkt.id} dropped at node {s} after {sim.cfg.routing.max_retries} transmissions")
