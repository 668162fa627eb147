"""
Beacon-driven link quality estimation.

Every node broadcasts one beacon per round. Receivers remember the last
``window`` rounds per sender; the delivery ratio over that window feeds an
exponentially weighted estimate of the link's delivery probability.
"""

from __future__ import annotations

import logging

import networkx as nx
import numpy as np

from cbrt.mobility.world import delivery_matrix
from cbrt.routing.energy import Action, airtime

logger = logging.getLogger(__name__)

ETX_FLOOR_P = 0.01


class LinkEstimator:
    def __init__(self, node_count: int, window: int = 100, alpha: float = 0.2):
        if window < 1 or not 0.0 < alpha <= 1.0:
            raise ValueError(f"need window >= 1 and 0 < alpha <= 1, got {window}, {alpha}")
        self.window = window
        self.alpha = alpha
        self.rounds = 0
        self._heard = np.zeros((window, node_count, node_count), dtype=bool)
        self._sent = np.zeros((window, node_count), dtype=bool)
        self._seen = np.zeros((node_count, node_count), dtype=bool)
        self.estimate = np.zeros((node_count, node_count))

    def observe(self, heard: np.ndarray, sent: np.ndarray):
        """Record one round: heard[a, b] is True when b received a's beacon."""
        slot = self.rounds % self.window
        self._heard[slot] = heard & sent[:, None]
        self._sent[slot] = sent
        self.rounds += 1

        sent_count = self._sent.sum(axis=0)
        active = sent & (sent_count > 0)
        ratio = self._heard.sum(axis=0)[active] / sent_count[active, None]
        previous = self.estimate[active]
        seen = self._seen[active]
        self.estimate[active] = np.where(seen, (1.0 - self.alpha) * previous + self.alpha * ratio, ratio)
        self._seen[active] = True

    def p_hat(self, a: int, b: int) -> float:
        return float(self.estimate[a, b])

    def etx(self, a: int, b: int) -> float:
        return 1.0 / max(self.p_hat(a, b), ETX_FLOOR_P)

    def graph(self, alive=None, min_p: float = ETX_FLOOR_P) -> nx.DiGraph:
        """Directed beacon graph weighted by link ETX."""
        g = nx.DiGraph()
        n = self.estimate.shape[0]
        g.add_nodes_from(range(n))
        usable = self.estimate >= min_p
        np.fill_diagonal(usable, False)
        if alive is not None:
            usable &= alive[:, None] & alive[None, :]
        rows, cols = np.nonzero(usable)
        g.add_weighted_edges_from(
            (int(a), int(b), 1.0 / float(self.estimate[a, b])) for a, b in zip(rows, cols)
        )
        return g


def beacon_round(world, estimator: LinkEstimator, rng: np.random.Generator,
                 ledger=None, radio=None) -> np.ndarray:
    """One beacon from every alive node; returns the updated estimate matrix."""
    p = delivery_matrix(world)
    heard = rng.random(p.shape) < p
    sent = world.alive.copy()
    estimator.observe(heard, sent)
    if ledger is not None and radio is not None:
        duration = airtime(radio.beacon_bits, radio.rate_bps)
        for i in np.flatnonzero(sent):
            ledger.charge(world, int(i), Action.TX, duration, radio, "beacon")
    return estimator.estimate
