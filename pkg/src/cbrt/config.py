"""
Experiment configuration: YAML files with one mapping per section.

    world:       deployment square, population, mobility, link model
    policy:      healthy RND band, either n1/n2 or p1/p2 + link_p
    topology:    k-connection parameters and the topology sweep
    radio:       packet sizes, data rate, power levels, battery
    traffic:     Poisson flows
    routing:     protocol knobs (retries, caches, thresholds, estimator)
    sim:         duration, warmup, sampling, optional event trace
    experiment:  seed base, replicas, routing sweep, workers, output

Every key is optional; missing keys take the module defaults below. Problems
are reported as ``path:line: section.key: detail``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from cbrt.errors import ConfigError
from cbrt.mobility.world import LINK_MODELS, Mobility, WorldConfig
from cbrt.topology.otc import required_rnd

DEFAULT_SEED = 1
DEFAULT_SIDE_M = 1000.0
DEFAULT_ROUTING_RANGE_M = 500.0
DEFAULT_TOPOLOGY_RANGE_M = 100.0
DEFAULT_SPEED_MEAN = 0.2
DEFAULT_ROUTING_SWEEP = (25, 50, 75, 100, 125, 150)
DEFAULT_TOPOLOGY_SWEEP = (50, 100, 150, 200)
DEFAULT_DURATION_S = 300.0
DEFAULT_WARMUP_S = 30.0
PROTOCOLS = ("cbrt", "exor")
CANDIDATE_METRICS = ("energy", "link_etx", "queue", "proc_delay", "dest_distance", "lifetime", "closing_speed")
MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class WorldSection:
    side: float = DEFAULT_SIDE_M
    node_count: int = 50
    speed_mean: float = DEFAULT_SPEED_MEAN
    initial_range: float = DEFAULT_ROUTING_RANGE_M
    mobility: str = Mobility.RANDOM_WAYPOINT.value
    pause_s: float = 0.0
    link_model: str = "quadratic"
    r_min: float = 10.0
    r_max: float | None = None


@dataclass(frozen=True)
class PolicySection:
    n1: int = 7
    n2: int = 9
    p1: float | None = None
    p2: float | None = None
    link_p: float | None = None

    def band(self) -> tuple[int, int]:
        """Healthy RND band; derived from the PTP bounds when they are given."""
        if self.p1 is not None and self.p2 is not None and self.link_p is not None:
            return required_rnd(self.link_p, self.p1), required_rnd(self.link_p, self.p2)
        return self.n1, self.n2


@dataclass(frozen=True)
class TopologySection:
    k: int = 5
    grow: float = 1.1
    shrink: float = 0.9
    initial_range: float = DEFAULT_TOPOLOGY_RANGE_M
    epoch_s: float = 1.0
    node_counts: tuple = DEFAULT_TOPOLOGY_SWEEP


@dataclass(frozen=True)
class RadioSection:
    data_bits: int = 1024
    control_bits: int = 128
    beacon_bits: int = 64
    rate_bps: float = 15000.0
    tx_high_w: float = 0.8
    tx_low_w: float = 0.1
    rx_w: float = 0.05
    initial_energy_j: float = 5.0


@dataclass(frozen=True)
class TrafficSection:
    flows: int = 1
    rate_pps: float = 2.0
    pairs: tuple = ()


@dataclass(frozen=True)
class RoutingSection:
    protocol: str = "cbrt"
    protocols: tuple = PROTOCOLS
    max_retries: int = 7
    cache_s: float = 1.0
    energy_threshold_j: float = 0.25
    thresholds: dict = field(default_factory=dict)
    otc_maintenance: bool = True
    route_hold_s: float = 30.0
    exor_min_share: float = 0.1
    beacon_interval_s: float = 1.0
    beacon_window: int = 100
    ewma_alpha: float = 0.2
    proc_delay_ms: tuple = (1.0, 5.0)
    lifetime_horizon_s: float = 1000.0
    fuzzy_terms: int = 7


@dataclass(frozen=True)
class SimSection:
    duration_s: float = DEFAULT_DURATION_S
    warmup_s: float = DEFAULT_WARMUP_S
    sample_interval_s: float = 5.0
    mobility_tick_s: float = 1.0
    trace_path: str | None = None


@dataclass(frozen=True)
class ExperimentSection:
    seed: int = DEFAULT_SEED
    replicas: int = 5
    node_counts: tuple = DEFAULT_ROUTING_SWEEP
    workers: int = 1
    out_dir: str = "out"
    svg: bool = True


SECTIONS = {
    "world": WorldSection,
    "policy": PolicySection,
    "topology": TopologySection,
    "radio": RadioSection,
    "traffic": TrafficSection,
    "routing": RoutingSection,
    "sim": SimSection,
    "experiment": ExperimentSection,
}

# Declared type per optional (None-default) key.
_OPTIONAL = {
    ("world", "r_max"): float,
    ("policy", "p1"): float,
    ("policy", "p2"): float,
    ("policy", "link_p"): float,
    ("sim", "trace_path"): str,
}


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldSection = field(default_factory=WorldSection)
    policy: PolicySection = field(default_factory=PolicySection)
    topology: TopologySection = field(default_factory=TopologySection)
    radio: RadioSection = field(default_factory=RadioSection)
    traffic: TrafficSection = field(default_factory=TrafficSection)
    routing: RoutingSection = field(default_factory=RoutingSection)
    sim: SimSection = field(default_factory=SimSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    source: str | None = field(default=None, compare=False)
    lines: Mapping[str, int] = field(default_factory=dict, compare=False, repr=False)

    def world_config(self, *, initial_range: float | None = None) -> WorldConfig:
        w = self.world
        return WorldConfig(
            side=w.side,
            node_count=w.node_count,
            speed_mean=w.speed_mean,
            initial_range=w.initial_range if initial_range is None else initial_range,
            seed=self.experiment.seed,
            mobility=Mobility(w.mobility),
            initial_energy=self.radio.initial_energy_j,
            pause_s=w.pause_s,
            r_min=w.r_min,
            r_max=w.r_max,
            link_model=w.link_model,
        )

    def at(self, *, protocol: str | None = None, node_count: int | None = None,
           seed: int | None = None) -> "ExperimentConfig":
        """Copy pinned to one sweep point."""
        cfg = self
        if protocol is not None:
            cfg = dataclasses.replace(cfg, routing=dataclasses.replace(cfg.routing, protocol=protocol))
        if node_count is not None:
            cfg = dataclasses.replace(cfg, world=dataclasses.replace(cfg.world, node_count=node_count))
        if seed is not None:
            cfg = dataclasses.replace(cfg, experiment=dataclasses.replace(cfg.experiment, seed=seed))
        return cfg

    def replace(self, **sections: Mapping[str, Any]) -> "ExperimentConfig":
        """Copy with keys of the named sections replaced, e.g. ``replace(sim={"duration_s": 60})``."""
        changes = {name: dataclasses.replace(getattr(self, name), **_coerce_section(name, dict(values)))
                   for name, values in sections.items()}
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            section = dataclasses.asdict(getattr(self, name))
            out[name] = {k: _plain(v) for k, v in section.items()}
        return out


def _plain(value):
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def _key_lines(node: yaml.Node | None) -> dict[str, int]:
    lines: dict[str, int] = {}
    if not isinstance(node, yaml.MappingNode):
        return lines
    for key_node, value_node in node.value:
        section = str(key_node.value)
        lines[section] = key_node.start_mark.line + 1
        if isinstance(value_node, yaml.MappingNode):
            for sub_key, _ in value_node.value:
                lines[f"{section}.{sub_key.value}"] = sub_key.start_mark.line + 1
    return lines


def _expected_type(section: str, key: str, default):
    if (section, key) in _OPTIONAL:
        return _OPTIONAL[(section, key)]
    return type(default)


def _coerce(section: str, key: str, value, default):
    expected = _expected_type(section, key, default)
    if value is None and (section, key) in _OPTIONAL:
        return None
    if expected is bool:
        if not isinstance(value, bool):
            raise TypeError(f"expected true/false, got {value!r}")
        return value
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"expected an integer, got {value!r}")
        return value
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"expected a number, got {value!r}")
        return float(value)
    if expected is str:
        if not isinstance(value, str):
            raise TypeError(f"expected a string, got {value!r}")
        return value
    if expected is tuple:
        if not isinstance(value, (list, tuple)):
            raise TypeError(f"expected a list, got {value!r}")
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if expected is dict:
        if not isinstance(value, dict):
            raise TypeError(f"expected a mapping, got {value!r}")
        return dict(value)
    return value


def _coerce_section(name: str, values: dict, errors: list[str] | None = None,
                    where=lambda key: "") -> dict:
    defaults = SECTIONS[name]()
    known = {f.name for f in dataclasses.fields(defaults)}
    out = {}
    for key, value in values.items():
        if key not in known:
            msg = f"{where(f'{name}.{key}')}{name}.{key}: unknown key"
            if errors is None:
                raise ConfigError(msg)
            errors.append(msg)
            continue
        try:
            out[key] = _coerce(name, key, value, getattr(defaults, key))
        except TypeError as exc:
            msg = f"{where(f'{name}.{key}')}{name}.{key}: {exc}"
            if errors is None:
                raise ConfigError(msg) from None
            errors.append(msg)
    return out


def _locator(source: str | None, lines: Mapping[str, int]):
    def where(key: str) -> str:
        line = lines.get(key) or lines.get(key.split(".")[0])
        if source and line:
            return f"{source}:{line}: "
        if source:
            return f"{source}: "
        return ""
    return where


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Every range or consistency problem in ``cfg``; empty when valid."""
    where = _locator(cfg.source, cfg.lines)
    errors: list[str] = []

    def check(ok: bool, key: str, detail: str):
        if not ok:
            errors.append(f"{where(key)}{key}: {detail}")

    w = cfg.world
    check(w.side > 0, "world.side", "must be positive")
    check(w.node_count >= 2, "world.node_count", "need at least 2 nodes")
    check(w.speed_mean >= 0, "world.speed_mean", "must be non-negative")
    check(w.pause_s >= 0, "world.pause_s", "must be non-negative")
    check(w.initial_range > 0, "world.initial_range", "must be positive")
    check(w.mobility in {m.value for m in Mobility}, "world.mobility",
          f"must be one of {', '.join(m.value for m in Mobility)}")
    check(w.link_model in LINK_MODELS, "world.link_model", f"must be one of {', '.join(LINK_MODELS)}")
    check(w.r_min > 0, "world.r_min", "must be positive")
    check(w.r_max is None or w.r_max >= w.r_min, "world.r_max", "must be at least r_min")

    p = cfg.policy
    given = [v is not None for v in (p.p1, p.p2, p.link_p)]
    check(all(given) or not any(given), "policy.p1", "p1, p2 and link_p must be given together")
    if all(given):
        check(0 < p.p1 < p.p2 < 1, "policy.p1", "need 0 < p1 < p2 < 1")
        check(0 < p.link_p < 1, "policy.link_p", "must lie in (0, 1)")
    else:
        check(1 <= p.n1 < p.n2, "policy.n1", "need 1 <= n1 < n2")

    t = cfg.topology
    check(t.k >= 1, "topology.k", "must be at least 1")
    check(t.grow > 1, "topology.grow", "must exceed 1")
    check(0 < t.shrink < 1, "topology.shrink", "must lie in (0, 1)")
    check(t.initial_range > 0, "topology.initial_range", "must be positive")
    check(t.epoch_s > 0, "topology.epoch_s", "must be positive")
    check(_counts_ok(t.node_counts), "topology.node_counts", "need a non-empty list of integers >= 2")

    r = cfg.radio
    for key in ("data_bits", "control_bits", "beacon_bits", "rate_bps", "initial_energy_j"):
        check(getattr(r, key) > 0, f"radio.{key}", "must be positive")
    for key in ("tx_high_w", "tx_low_w", "rx_w"):
        check(getattr(r, key) >= 0, f"radio.{key}", "must be non-negative")

    tr = cfg.traffic
    check(tr.flows >= 1, "traffic.flows", "must be at least 1")
    check(tr.rate_pps > 0, "traffic.rate_pps", "must be positive")
    for pair in tr.pairs:
        ok = (isinstance(pair, tuple) and len(pair) == 2 and all(isinstance(v, int) for v in pair)
              and pair[0] != pair[1] and all(0 <= v < w.node_count for v in pair))
        check(ok, "traffic.pairs", f"bad pair {pair!r}: need two distinct node ids below node_count")

    ro = cfg.routing
    check(ro.protocol in PROTOCOLS, "routing.protocol", f"must be one of {', '.join(PROTOCOLS)}")
    check(bool(ro.protocols) and all(x in PROTOCOLS for x in ro.protocols), "routing.protocols",
          f"need a non-empty subset of {', '.join(PROTOCOLS)}")
    check(ro.max_retries >= 1, "routing.max_retries", "must be at least 1")
    check(ro.cache_s >= 0, "routing.cache_s", "must be non-negative")
    check(ro.route_hold_s >= 0, "routing.route_hold_s", "must be non-negative")
    check(ro.energy_threshold_j >= 0, "routing.energy_threshold_j", "must be non-negative")
    unknown = sorted(set(ro.thresholds) - set(CANDIDATE_METRICS))
    check(not unknown, "routing.thresholds", f"unknown metrics {unknown}")
    check(0 <= ro.exor_min_share < 1, "routing.exor_min_share", "must lie in [0, 1)")
    check(ro.beacon_interval_s > 0, "routing.beacon_interval_s", "must be positive")
    check(ro.beacon_window >= 1, "routing.beacon_window", "must be at least 1")
    check(0 < ro.ewma_alpha <= 1, "routing.ewma_alpha", "must lie in (0, 1]")
    delay = ro.proc_delay_ms
    check(len(delay) == 2 and all(isinstance(v, (int, float)) for v in delay) and 0 <= delay[0] <= delay[1],
          "routing.proc_delay_ms", "need [low, high] with 0 <= low <= high")
    check(ro.lifetime_horizon_s > 0, "routing.lifetime_horizon_s", "must be positive")
    check(ro.fuzzy_terms >= 2, "routing.fuzzy_terms", "must be at least 2")

    s = cfg.sim
    check(s.duration_s > 0, "sim.duration_s", "must be positive")
    check(0 <= s.warmup_s < s.duration_s, "sim.warmup_s", "need 0 <= warmup < duration")
    check(s.sample_interval_s > 0, "sim.sample_interval_s", "must be positive")
    check(s.mobility_tick_s > 0, "sim.mobility_tick_s", "must be positive")

    e = cfg.experiment
    check(0 <= e.seed <= MAX_SEED, "experiment.seed", "must be an unsigned 64-bit integer")
    check(e.replicas >= 1, "experiment.replicas", "must be at least 1")
    check(_counts_ok(e.node_counts), "experiment.node_counts", "need a non-empty list of integers >= 2")
    check(e.workers >= 1, "experiment.workers", "must be at least 1")
    return errors


def _counts_ok(counts) -> bool:
    return bool(counts) and all(isinstance(n, int) and not isinstance(n, bool) and n >= 2 for n in counts)


def _apply_overrides(raw: dict, overrides: Mapping[str, Any]):
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        raw.setdefault(section, {})
        if raw[section] is None:
            raw[section] = {}
        raw[section][key] = value


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Read, coerce and validate a configuration; raises ConfigError listing every problem."""
    raw: dict = {}
    lines: dict[str, int] = {}
    source = None
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text()
        except FileNotFoundError:
            raise ConfigError(f"{source}: no such config file") from None
        except OSError as exc:
            raise ConfigError(f"{source}: cannot read config: {exc.strerror}") from None
        try:
            raw = yaml.safe_load(text) or {}
            lines = _key_lines(yaml.compose(text))
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = f"{mark.line + 1}:" if mark is not None else ""
            problem = getattr(exc, "problem", None) or str(exc)
            raise ConfigError(f"{source}:{line} YAML syntax error: {problem}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}:1: top level must be a mapping of sections")
    _apply_overrides(raw, overrides or {})

    where = _locator(source, lines)
    errors: list[str] = []
    sections = {}
    for name, values in raw.items():
        if name not in SECTIONS:
            errors.append(f"{where(str(name))}{name}: unknown section")
            continue
        if values is None:
            values = {}
        if not isinstance(values, dict):
            errors.append(f"{where(name)}{name}: section must be a mapping")
            continue
        sections[name] = SECTIONS[name](**_coerce_section(name, values, errors, where))
    if errors:
        raise ConfigError("\n".join(errors))

    cfg = ExperimentConfig(**sections, source=source, lines=lines)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("\n".join(problems))
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
