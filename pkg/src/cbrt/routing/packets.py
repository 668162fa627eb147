"""Packets, candidate relay sets and per-hop outcomes."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple


@dataclass
class Packet:
    id: int
    src: int
    dest: int
    created_at: float
    hops: int = 0
    tx_count: int = 0
    retries: int = 0
    delivered_at: float | None = None

    @property
    def delay(self) -> float | None:
        return None if self.delivered_at is None else self.delivered_at - self.created_at


class Candidate(NamedTuple):
    node: int
    utility: float
    p: float


@dataclass(frozen=True)
class CandidateRelaySet:
    """Relays in forwarding priority order (descending utility)."""

    members: tuple[Candidate, ...]
    built_at: float
    rnd: int = 0

    def __post_init__(self):
        utilities = [c.utility for c in self.members]
        if any(a < b for a, b in zip(utilities, utilities[1:])):
            raise ValueError("candidate relay set must be ordered by descending utility")

    @property
    def ids(self) -> list[int]:
        return [c.node for c in self.members]

    def __len__(self) -> int:
        return len(self.members)

    def without(self, dropped) -> "CandidateRelaySet":
        dropped = set(dropped)
        return CandidateRelaySet(tuple(c for c in self.members if c.node not in dropped), self.built_at, self.rnd)

    def destination_first(self, dest: int) -> "CandidateRelaySet":
        """Move dest to the head of the list at the top utility; a no-op when it is absent or leads."""
        if not self.members or self.members[0].node == dest or dest not in self.ids:
            return self
        rest = tuple(c for c in self.members if c.node != dest)
        head = next(c for c in self.members if c.node == dest)._replace(utility=rest[0].utility)
        return CandidateRelaySet((head, *rest), self.built_at, self.rnd)


class Outcome(str, enum.Enum):
    FORWARDED = "forwarded"
    DELIVERED = "delivered"
    DROPPED = "dropped"


class HopResult(NamedTuple):
    outcome: Outcome
    forwarder: int
    attempts: int
