"""
Periodic metric rows and their CSV form.

Cumulative columns (etx, delay_s) cover everything since t = 0; the others
describe the sample interval or the instant of sampling. Absent aggregates
are NaN and serialise as empty cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from cbrt.mobility.world import survival_members
from cbrt.topology.otc import band_fraction

METRIC_COLUMNS = [
    "time", "protocol", "node_count", "seed", "etx", "delay_s", "queue_len", "rnd",
    "range_m", "energy_j", "throughput_bps", "lifetime_s", "c_otc",
]
FINAL_VALUE_COLUMNS = ("etx", "delay_s", "energy_j")
STEADY_COLUMNS = ("queue_len", "rnd", "range_m", "throughput_bps", "lifetime_s", "c_otc")
FLOAT_FORMAT = "%.6f"


@dataclass
class Counters:
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    data_tx: int = 0
    hops: int = 0
    delay_sum: float = 0.0
    range_adjusts: int = 0


@dataclass
class IntervalStats:
    started: float = 0.0
    delivered_bits: int = 0
    lifetimes: list = field(default_factory=list)
    adjusters: set = field(default_factory=set)


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else math.nan


class MetricsLog:
    def __init__(self, rows: list[dict] | None = None):
        self.rows: list[dict] = list(rows or [])

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: dict):
        missing = set(METRIC_COLUMNS) - set(row)
        if missing:
            raise KeyError(f"metric row lacks {sorted(missing)}")
        self.rows.append({c: row[c] for c in METRIC_COLUMNS})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=METRIC_COLUMNS)

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        return path

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "MetricsLog":
        if list(frame.columns) != METRIC_COLUMNS:
            raise ValueError(f"unexpected metric columns {list(frame.columns)}")
        return cls(frame.to_dict(orient="records"))

    @classmethod
    def from_csv(cls, path: str | Path) -> "MetricsLog":
        return cls.from_frame(pd.read_csv(path))

    def summary(self, warmup: float) -> dict[str, float]:
        """Final cumulative values plus post-warmup means of the interval columns."""
        frame = self.to_frame()
        out: dict[str, float] = {}
        for col in FINAL_VALUE_COLUMNS:
            values = frame[col].dropna()
            out[col] = float(values.iloc[-1]) if len(values) else math.nan
        steady = frame[frame["time"] > warmup]
        for col in STEADY_COLUMNS:
            values = steady[col].dropna()
            out[col] = float(values.mean()) if len(values) else math.nan
        return out

    def rnd_in_band(self, n1: int, n2: int, warmup: float) -> float:
        """Share of post-warmup samples whose mean RND lies in [n1, n2]; empty intervals are skipped."""
        frame = self.to_frame()
        return band_fraction(frame.loc[frame["time"] > warmup, "rnd"], n1, n2)


def source_rnd(sim) -> list[int]:
    """Current RND of every alive flow source towards its destination."""
    world = sim.world
    return [len(survival_members(world, s, world.pos[d])) for s, d in sim.flows if world.alive[s]]


def sample_metrics(sim, t: float) -> dict:
    """Append one row describing the simulation at time t and open a new interval."""
    world = sim.world
    c = sim.counters
    iv = sim.interval
    alive = world.alive
    alive_count = int(alive.sum())
    elapsed = t - iv.started
    row = {
        "time": round(t, 9),
        "protocol": sim.protocol,
        "node_count": world.n,
        "seed": world.cfg.seed,
        "etx": c.data_tx / c.hops if c.hops else math.nan,
        "delay_s": c.delay_sum / c.delivered if c.delivered else math.nan,
        "queue_len": _mean([len(world.queues[i]) for i in np.flatnonzero(alive)]),
        "rnd": _mean(source_rnd(sim)),
        "range_m": float(world.range[alive].mean()) if alive_count else math.nan,
        "energy_j": float(world.energy.sum()),
        "throughput_bps": iv.delivered_bits / elapsed if elapsed > 0 else math.nan,
        "lifetime_s": _mean(iv.lifetimes),
        "c_otc": len(iv.adjusters) / alive_count if alive_count else math.nan,
    }
    sim.log.append(row)
    sim.interval = IntervalStats(started=t)
    return row
