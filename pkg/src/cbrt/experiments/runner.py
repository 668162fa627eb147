"""
Sweeps, replicas and their aggregation.

Every job is a pure function of the configuration and its seed (replica k of
a sweep point runs with seed base + k), so jobs can run in any order and in
worker processes. Results are put back in job order before aggregation and
all files are written by the calling process.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd
import yaml

from cbrt.config import ExperimentConfig
from cbrt.experiments.plots import Series, write_chart
from cbrt.mobility.world import write_snapshot
from cbrt.routing.engine import RunResult, Simulation
from cbrt.routing.metrics import FLOAT_FORMAT
from cbrt.topology.harness import KCONN, OTC, TOPO_COLUMNS, TopologyHarness
from cbrt.topology.kconnection import KConnectionController
from cbrt.topology.otc import in_band

logger = logging.getLogger(__name__)

# column -> (chart title, y-axis label)
OBSERVABLES = {
    "etx": ("Per-hop ETX", "transmissions per hop"),
    "delay_s": ("End-to-end delay", "delay (s)"),
    "queue_len": ("Queue length", "packets"),
    "rnd": ("Relay node degree", "RND"),
    "range_m": ("Transmission range", "range (m)"),
    "energy_j": ("Residual energy", "total energy (J)"),
    "throughput_bps": ("Throughput", "bit/s"),
    "lifetime_s": ("Predicted link lifetime", "lifetime (s)"),
}
COUNT_COLUMNS = ("generated", "delivered", "dropped", "in_flight", "range_adjusts")
COMPARE_COLUMNS = ["protocol", "node_count", "replicas", *OBSERVABLES, *COUNT_COLUMNS]
TOPO_SUMMARY_COLUMNS = [
    "controller", "node_count", "replicas", "adjust_ratio", "mean_degree", "mean_rnd",
    "mean_range_m", "rnd_in_band", "predicted_ratio",
]


@dataclass(frozen=True)
class Job:
    protocol: str
    node_count: int
    replica: int
    seed: int


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def sweep_jobs(cfg: ExperimentConfig, protocols: Sequence[str], node_counts: Sequence[int]) -> list[Job]:
    base = cfg.experiment.seed
    return [Job(protocol, int(n), k, base + k)
            for protocol in protocols
            for n in node_counts
            for k in range(cfg.experiment.replicas)]


def run_jobs(fn: Callable, cfg: ExperimentConfig, jobs: Sequence, workers: int = 1) -> list:
    """fn(cfg, job) for every job, returned in job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(cfg, job) for job in jobs]
    results: list = [None] * len(jobs)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, cfg, job): idx for idx, job in enumerate(jobs)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
            logger.info("job %s finished", jobs[futures[future]])
    return results


# ── single runs ──────────────────────────────────────────────────────

def point_config(cfg: ExperimentConfig, job: Job) -> ExperimentConfig:
    """Configuration of one sweep job; sweeps never write event traces."""
    point = cfg.at(protocol=job.protocol, node_count=job.node_count, seed=job.seed)
    return dataclasses.replace(point, sim=dataclasses.replace(point.sim, trace_path=None))


def run_job(cfg: ExperimentConfig, job: Job) -> dict:
    result = Simulation(point_config(cfg, job)).run()
    return {"protocol": job.protocol, "node_count": job.node_count, "replica": job.replica,
            "seed": job.seed, **result.summary(cfg.sim.warmup_s)}


def run_single(cfg: ExperimentConfig, out_dir: Path, *, snapshot: bool = False) -> RunResult:
    """One run of cfg.routing.protocol; writes metrics.csv and optionally snapshot.csv."""
    out_dir.mkdir(parents=True, exist_ok=True)
    sim = Simulation(cfg)
    result = sim.run()
    result.log.to_csv(out_dir / "metrics.csv")
    if snapshot:
        write_snapshot(sim.world, out_dir / "snapshot.csv")
    return result


# ── protocol comparison ──────────────────────────────────────────────

def aggregate(rows: Sequence[dict]) -> pd.DataFrame:
    """Replica means per protocol and node count."""
    frame = pd.DataFrame(list(rows))
    grouped = frame.groupby(["protocol", "node_count"], sort=True)
    out = grouped[[*OBSERVABLES, *COUNT_COLUMNS]].mean()
    out.insert(0, "replicas", grouped.size())
    return out.reset_index()[COMPARE_COLUMNS]


def _column(frame: pd.DataFrame, protocol: str, col: str) -> pd.Series:
    part = frame[frame["protocol"] == protocol].sort_values("node_count")
    return pd.Series(part[col].to_numpy(), index=part["node_count"].to_numpy())


def _non_increasing(values: pd.Series, tol: float = 1e-9) -> bool:
    diffs = np.diff(values.to_numpy(dtype=float))
    return bool(np.all(diffs <= tol * np.maximum(1.0, np.abs(values.to_numpy()[:-1]))))


def _fmt(values: pd.Series) -> str:
    return ", ".join(f"{n}: {v:.4g}" for n, v in values.items())


def compare_checks(frame: pd.DataFrame) -> list[Check]:
    """Direction checks of CBRT against ExOR over the node-count sweep."""
    protocols = set(frame["protocol"])
    if not {"cbrt", "exor"} <= protocols:
        return []
    cbrt = {c: _column(frame, "cbrt", c) for c in ("etx", "delay_s", "energy_j", "range_m", "lifetime_s")}
    exor = {c: _column(frame, "exor", c) for c in ("etx", "delay_s", "energy_j", "range_m", "lifetime_s")}
    checks = []
    for col, label, better in (("etx", "CBRT ETX below ExOR", np.less),
                               ("delay_s", "CBRT delay below ExOR", np.less),
                               ("energy_j", "CBRT residual energy above ExOR", np.greater)):
        a, b = cbrt[col].align(exor[col], join="inner")
        passed = bool(len(a)) and bool(np.all(better(a.to_numpy(), b.to_numpy())))
        checks.append(Check(label, passed, f"cbrt [{_fmt(a)}] vs exor [{_fmt(b)}]"))

    exor_range = exor["range_m"].to_numpy(dtype=float)
    spread = float(np.ptp(exor_range)) if exor_range.size else math.nan
    checks.append(Check("ExOR range constant", bool(exor_range.size) and spread <= 1e-6,
                        f"exor [{_fmt(exor['range_m'])}]"))
    checks.append(Check("CBRT range non-increasing", _non_increasing(cbrt["range_m"]),
                        f"cbrt [{_fmt(cbrt['range_m'])}]"))
    checks.append(Check("CBRT lifetime non-increasing", _non_increasing(cbrt["lifetime_s"]),
                        f"cbrt [{_fmt(cbrt['lifetime_s'])}]"))
    life = exor["lifetime_s"].to_numpy(dtype=float)
    variation = float(np.ptp(life) / np.mean(life)) if life.size and np.mean(life) > 0 else math.nan
    checks.append(Check("ExOR lifetime varies under 10%", variation < 0.1,
                        f"relative spread {variation:.3f}"))
    return checks


def compare_charts(frame: pd.DataFrame, out_dir: Path) -> list[Path]:
    paths = []
    for col, (title, ylabel) in OBSERVABLES.items():
        series = [Series(protocol.upper(), list(_column(frame, protocol, col).index),
                         list(_column(frame, protocol, col).to_numpy(dtype=float)))
                  for protocol in sorted(set(frame["protocol"]))]
        paths.append(write_chart(out_dir / f"{col}.svg", series, title, "number of nodes", ylabel))
    return paths


# ── topology comparison ──────────────────────────────────────────────

@dataclass(frozen=True)
class TopoJob:
    node_count: int
    replica: int
    seed: int


def topo_jobs(cfg: ExperimentConfig) -> list[TopoJob]:
    base = cfg.experiment.seed
    return [TopoJob(int(n), k, base + k)
            for n in cfg.topology.node_counts
            for k in range(cfg.experiment.replicas)]


def topo_harness(cfg: ExperimentConfig, node_count: int, seed: int) -> TopologyHarness:
    point = cfg.at(node_count=node_count, seed=seed)
    world_cfg = point.world_config(initial_range=cfg.topology.initial_range)
    t = cfg.topology
    kconn = KConnectionController(t.k, t.grow, t.shrink, r_min=world_cfg.r_min, r_max=world_cfg.range_max)
    n1, n2 = cfg.policy.band()
    return TopologyHarness(world_cfg, n1, n2, kconn, duration=cfg.sim.duration_s, epoch=t.epoch_s)


def run_topo_job(cfg: ExperimentConfig, job: TopoJob) -> pd.DataFrame:
    return topo_harness(cfg, job.node_count, job.seed).run()


def topo_aggregate(frame: pd.DataFrame, n1: int, n2: int, warmup: float) -> pd.DataFrame:
    """Post-warmup means per controller and node count."""
    steady = frame[frame["time"] > warmup].copy()
    steady["rnd_in_band"] = in_band(steady["mean_rnd"], n1, n2)
    grouped = steady.groupby(["controller", "node_count"], sort=True)
    out = grouped[["adjust_ratio", "mean_degree", "mean_rnd", "mean_range_m", "rnd_in_band",
                   "predicted_ratio"]].mean()
    out.insert(0, "replicas", grouped["seed"].nunique())
    return out.reset_index()[TOPO_SUMMARY_COLUMNS]


def _topo_column(summary: pd.DataFrame, controller: str, col: str) -> pd.Series:
    part = summary[summary["controller"] == controller].sort_values("node_count")
    return pd.Series(part[col].to_numpy(), index=part["node_count"].to_numpy())


def topo_checks(summary: pd.DataFrame, k: int) -> list[Check]:
    otc_ratio = _topo_column(summary, OTC, "adjust_ratio")
    k_ratio = _topo_column(summary, KCONN, "adjust_ratio")
    a, b = otc_ratio.align(k_ratio, join="inner")
    k_degree = _topo_column(summary, KCONN, "mean_degree")
    band_share = _topo_column(summary, OTC, "rnd_in_band")
    return [
        Check("OTC adjusts less than k-connection", bool(len(a)) and bool(np.all(a < b)),
              f"otc [{_fmt(a)}] vs k-connection [{_fmt(b)}]"),
        Check(f"k-connection degree within {k} ± 1", bool(np.all(np.abs(k_degree - k) <= 1.0)),
              f"[{_fmt(k_degree)}]"),
        Check("OTC RND in healthy band at least 90% of the time", bool(np.all(band_share >= 0.9)),
              f"[{_fmt(band_share)}]"),
    ]


def topo_charts(summary: pd.DataFrame, out_dir: Path) -> list[Path]:
    def series(label, controller, col):
        s = _topo_column(summary, controller, col)
        return Series(label, list(s.index), list(s.to_numpy(dtype=float)))

    return [
        write_chart(out_dir / "adjust_ratio.svg",
                    [series("OTC", OTC, "adjust_ratio"), series("k-connection", KCONN, "adjust_ratio"),
                     series("OTC predicted", OTC, "predicted_ratio")],
                    "Range adjustment ratio", "number of nodes", "adjusting fraction per epoch"),
        write_chart(out_dir / "degree.svg",
                    [series("OTC RND", OTC, "mean_rnd"), series("OTC degree", OTC, "mean_degree"),
                     series("k-connection degree", KCONN, "mean_degree")],
                    "Node degree", "number of nodes", "nodes"),
    ]


def write_topo_csv(frames: Sequence[pd.DataFrame], path: Path) -> pd.DataFrame:
    frame = pd.concat(list(frames), ignore_index=True)[TOPO_COLUMNS]
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
    return frame


# ── summaries ────────────────────────────────────────────────────────

def markdown_table(frame: pd.DataFrame) -> str:
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return "" if math.isnan(v) else f"{v:.4g}"
        return str(v)

    head = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    body = ["| " + " | ".join(cell(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([head, rule, *body])


def write_summary(path: Path, meta: dict, table: pd.DataFrame, checks: Sequence[Check] = ()) -> Path:
    """Markdown with YAML frontmatter, readable by the report site."""
    parts = ["---", yaml.safe_dump(meta, sort_keys=False).strip(), "---", "",
             f"# {meta.get('title', 'Results')}", "", markdown_table(table), ""]
    if checks:
        parts += ["## Checks", ""]
        parts += [f"- {'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in checks]
        parts.append("")
    path.write_text("\n".join(parts))
    return path
