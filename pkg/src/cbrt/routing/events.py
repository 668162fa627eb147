"""Simulator event records and the optional JSON-lines trace."""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path


class EventKind(str, enum.Enum):
    BEACON_ROUND = "BeaconRound"
    ROUTE_REQUEST = "RouteRequest"
    ROUTE_REPLY = "RouteReply"
    DATA_TX = "DataTx"
    DATA_RX = "DataRx"
    ACK_OVERHEAR = "AckOverhear"
    RANGE_ADJUST = "RangeAdjust"
    MOBILITY_TICK = "MobilityTick"
    METRIC_SAMPLE = "MetricSample"


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        record = {"time": round(self.time, 9), "kind": self.kind.value, **self.payload}
        return json.dumps(record, default=_plain, sort_keys=False)


def _plain(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    return str(obj)


class EventRecorder:
    """Counts every event; writes them to ``trace_path`` when one is given."""

    def __init__(self, trace_path: str | Path | None = None):
        self.counts: Counter = Counter()
        self._fh = open(trace_path, "w") if trace_path else None

    def record(self, event: Event):
        self.counts[event.kind] += 1
        if self._fh is not None:
            self._fh.write(event.to_json() + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None
