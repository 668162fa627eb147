"""
Discrete-event simulation of one routing run.

simpy processes drive the run:

* mobility ticks move every node;
* beacon rounds refresh link estimates, run protocol housekeeping and wake
  packets waiting for a route;
* one Poisson traffic process per flow;
* one service process per node, draining its FIFO queue;
* the metric sampler.

Randomness comes from per-concern substreams of the run seed, so the event
sequence is reproducible bit for bit.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import simpy

from cbrt.config import ExperimentConfig, validate_config
from cbrt.errors import ConfigError, Dropped, NoCandidates
from cbrt.mobility.world import World, init_world, rng_streams, step_mobility
from cbrt.routing.beacons import LinkEstimator, beacon_round
from cbrt.routing.cbrt import CbrtRouter, link_lifetime
from cbrt.routing.energy import Action, EnergyLedger, airtime
from cbrt.routing.events import Event, EventKind, EventRecorder
from cbrt.routing.exor import ExorRouter
from cbrt.routing.metrics import Counters, IntervalStats, MetricsLog, sample_metrics
from cbrt.routing.packets import Outcome, Packet

logger = logging.getLogger(__name__)

ROUTERS = {"cbrt": CbrtRouter, "exor": ExorRouter}


@dataclass
class RunResult:
    log: MetricsLog
    protocol: str
    node_count: int
    seed: int
    counters: Counters
    in_flight: int
    energy_initial: float
    energy_residual: float
    ledger: dict[str, float]
    events: dict[str, int]
    adjustments: list[tuple] = field(default_factory=list)
    band: tuple[int, int] | None = None

    @property
    def generated(self) -> int:
        return self.counters.generated

    @property
    def delivered(self) -> int:
        return self.counters.delivered

    @property
    def dropped(self) -> int:
        return self.counters.dropped

    @property
    def conserved(self) -> bool:
        return self.generated == self.delivered + self.dropped + self.in_flight

    @property
    def energy_charged(self) -> float:
        return float(sum(self.ledger.values()))

    def summary(self, warmup: float) -> dict[str, float]:
        out = self.log.summary(warmup)
        out.update(generated=self.generated, delivered=self.delivered, dropped=self.dropped,
                   in_flight=self.in_flight, range_adjusts=self.counters.range_adjusts)
        if self.band is not None:
            out["rnd_in_band"] = self.log.rnd_in_band(*self.band, warmup)
        return out


class Simulation:
    def __init__(self, cfg: ExperimentConfig, world: World | None = None):
        problems = validate_config(cfg)
        if problems:
            raise ConfigError("\n".join(problems))
        self.cfg = cfg
        self.protocol = cfg.routing.protocol
        streams = rng_streams(cfg.experiment.seed)
        self.channel = streams["channel"]
        self.traffic = streams["traffic"]
        self.control = streams["control"]
        self.world = world if world is not None else init_world(cfg.world_config(), streams["mobility"])
        n = self.world.n

        self.env = simpy.Environment()
        self.estimator = LinkEstimator(n, cfg.routing.beacon_window, cfg.routing.ewma_alpha)
        self.ledger = EnergyLedger()
        self.recorder = EventRecorder(cfg.sim.trace_path)
        self.counters = Counters()
        self.interval = IntervalStats()
        self.log = MetricsLog()
        self.in_flight: dict[int, Packet] = {}
        self.adjustments: list[tuple] = []
        self.data_airtime = airtime(cfg.radio.data_bits, cfg.radio.rate_bps)

        lo, hi = cfg.routing.proc_delay_ms
        self.proc_delay = self.control.uniform(lo, hi, size=n) / 1000.0
        self.flows = self._pick_flows()
        self.router = ROUTERS[self.protocol](self)

        self._packet_ids = itertools.count()
        self._wake: list[simpy.Event | None] = [None] * n
        self._beacon = self.env.event()

    # ── plumbing used by routers ─────────────────────────────────────

    def emit(self, kind: EventKind, **payload):
        self.recorder.record(Event(self.env.now, EventKind(kind), payload))

    def broadcast(self, s: int, bits: int, kind: str, receivers=None):
        """Charge one transmission at s and reception at every listener in range."""
        world = self.world
        duration = airtime(bits, self.cfg.radio.rate_bps)
        listeners = world.neighbours(s) if receivers is None else receivers
        self.ledger.charge(world, s, Action.TX, duration, self.cfg.radio, kind)
        for j in listeners:
            if world.alive[j]:
                self.ledger.charge(world, int(j), Action.RX, duration, self.cfg.radio, kind)

    def unicast(self, s: int, to: int, bits: int, kind: str):
        self.broadcast(s, bits, kind, receivers=[to])

    def record_adjust(self, i: int, rnd: int, old: float, new: float, cause: str):
        self.counters.range_adjusts += 1
        self.interval.adjusters.add(int(i))
        self.adjustments.append((self.env.now, int(i), int(rnd), old, new, cause))
        self.emit(EventKind.RANGE_ADJUST, node=int(i), rnd=int(rnd), old=old, new=new, cause=cause)

    # ── packets ──────────────────────────────────────────────────────

    def _pick_flows(self) -> list[tuple[int, int]]:
        pairs = [tuple(p) for p in self.cfg.traffic.pairs]
        if pairs:
            return pairs
        n = self.world.n
        return [tuple(int(v) for v in self.traffic.choice(n, size=2, replace=False))
                for _ in range(self.cfg.traffic.flows)]

    def _drop(self, pkt: Packet, reason: str):
        self.in_flight.pop(pkt.id, None)
        self.counters.dropped += 1
        logger.debug("t=%.3f drop packet %d (%s)", self.env.now, pkt.id, reason)

    def enqueue(self, i: int, pkt: Packet):
        if not self.world.alive[i]:
            self._drop(pkt, f"node {i} is dead")
            return
        self.world.queues[i].append(pkt)
        wake = self._wake[i]
        if wake is not None and not wake.triggered:
            wake.succeed()

    def _arrive(self, sender: int, forwarder: int, pkt: Packet):
        world = self.world
        self.interval.lifetimes.append(
            link_lifetime(world, sender, forwarder, pkt.dest, self.cfg.routing.lifetime_horizon_s))
        if forwarder == pkt.dest:
            pkt.delivered_at = self.env.now
            self.in_flight.pop(pkt.id, None)
            self.counters.delivered += 1
            self.counters.delay_sum += pkt.delay
            self.interval.delivered_bits += self.cfg.radio.data_bits
        else:
            self.enqueue(forwarder, pkt)

    # ── processes ────────────────────────────────────────────────────

    def _mobility(self):
        tick = self.cfg.sim.mobility_tick_s
        while True:
            yield self.env.timeout(tick)
            step_mobility(self.world, tick)
            self.emit(EventKind.MOBILITY_TICK)

    def _beacons(self):
        while True:
            beacon_round(self.world, self.estimator, self.channel, self.ledger, self.cfg.radio)
            self.emit(EventKind.BEACON_ROUND, alive=int(self.world.alive.sum()))
            self.router.on_beacon()
            waiting, self._beacon = self._beacon, self.env.event()
            waiting.succeed()
            yield self.env.timeout(self.cfg.routing.beacon_interval_s)

    def _flow(self, src: int, dest: int):
        rate = self.cfg.traffic.rate_pps
        while True:
            yield self.env.timeout(self.traffic.exponential(1.0 / rate))
            pkt = Packet(next(self._packet_ids), src, dest, self.env.now)
            self.counters.generated += 1
            self.in_flight[pkt.id] = pkt
            self.enqueue(src, pkt)

    def _retry_later(self, i: int, pkt: Packet):
        pkt.retries += 1
        if pkt.retries > self.cfg.routing.max_retries:
            self._drop(pkt, "no candidates")
            return
        yield self._beacon
        self.enqueue(i, pkt)

    def _serve(self, i: int):
        world = self.world
        queue = world.queues[i]
        while True:
            if not world.alive[i]:
                while queue:
                    self._drop(queue.popleft(), f"node {i} died")
                return
            if not queue:
                self._wake[i] = self.env.event()
                yield self._wake[i]
                continue
            pkt = queue.popleft()
            yield self.env.timeout(self.proc_delay[i])
            if not world.alive[i]:
                self._drop(pkt, f"node {i} died")
                continue
            try:
                hop = yield from self.router.forward(i, pkt)
            except NoCandidates as exc:
                logger.debug("t=%.3f %s", self.env.now, exc)
                self.env.process(self._retry_later(i, pkt))
                continue
            except Dropped as exc:
                self._drop(pkt, str(exc))
                continue
            if hop.outcome in (Outcome.FORWARDED, Outcome.DELIVERED):
                self._arrive(i, hop.forwarder, pkt)

    def _sampler(self):
        interval = self.cfg.sim.sample_interval_s
        while True:
            yield self.env.timeout(interval)
            sample_metrics(self, self.env.now)
            self.emit(EventKind.METRIC_SAMPLE)

    def run(self) -> RunResult:
        cfg = self.cfg
        energy_initial = float(self.world.energy.sum())
        logger.info("run %s: %d nodes, seed %d, %.0f s, flows %s", self.protocol, self.world.n,
                    cfg.experiment.seed, cfg.sim.duration_s, self.flows)
        self.env.process(self._mobility())
        self.env.process(self._beacons())
        self.env.process(self._sampler())
        for src, dest in self.flows:
            self.env.process(self._flow(src, dest))
        for i in range(self.world.n):
            self.env.process(self._serve(i))
        try:
            self.env.run(until=cfg.sim.duration_s)
            if not self.log.rows or self.log.rows[-1]["time"] < round(cfg.sim.duration_s, 9):
                sample_metrics(self, cfg.sim.duration_s)
        finally:
            self.recorder.close()
        return RunResult(
            log=self.log,
            protocol=self.protocol,
            node_count=self.world.n,
            seed=cfg.experiment.seed,
            counters=self.counters,
            in_flight=len(self.in_flight),
            energy_initial=energy_initial,
            energy_residual=float(self.world.energy.sum()),
            ledger=dict(self.ledger.by_kind),
            events={k.value: v for k, v in self.recorder.counts.items()},
            adjustments=self.adjustments,
            band=cfg.policy.band(),
        )


def run(config: ExperimentConfig, world: World | None = None) -> RunResult:
    """Execute one seeded run of ``config.routing.protocol``."""
    return Simulation(config, world).run()
