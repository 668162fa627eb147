"""Tests for cbrt.routing: hop oracles, estimator, energy, CBRT wiring and whole runs."""

import json
import math

import networkx as nx
import numpy as np
import pandas as pd
import pytest

from cbrt.errors import Dropped, NoCandidates
from cbrt.ranking.table import MetricTable, Orientation
from cbrt.routing import (
    Action,
    Candidate,
    CandidateRelaySet,
    LinkEstimator,
    Outcome,
    Packet,
    Simulation,
    airtime,
    beacon_round,
    energy_account,
    opportunistic_forward,
    run,
)
from cbrt.routing.cbrt import closing_speed, eligible
from cbrt.routing.exor import etx_to_destination, forwarder_list
from cbrt.routing.forwarding import pick_forwarder

BIG_BATTERY = 1e6
TX_JOULES = 0.8 * 1024 / 15000.0


def _sim(make_config, nodes, **sections):
    """Simulation on a hand-built world; the config's node count follows the world."""
    sections.setdefault("world", {})["node_count"] = nodes.n
    return Simulation(make_config(**sections), nodes)


def _hops(sim, s, dest, cands, count):
    """simpy process: ``count`` independent hops from s, returning their results."""
    results = []
    for k in range(count):
        pkt = Packet(k, s, dest, sim.env.now)
        results.append((yield from opportunistic_forward(sim, s, pkt, cands)))
    return results


def _run_hops(sim, s, dest, cands, count):
    return sim.env.run(until=sim.env.process(_hops(sim, s, dest, cands, count)))


def _line(xs, y=500.0):
    return [[x, y] for x in xs]


# ── single-hop oracles ───────────────────────────────────────────────────────


class TestOpportunisticForward:
    @pytest.mark.statistical
    @pytest.mark.parametrize("p", [0.3, 0.6, 0.9])
    def test_single_link_attempts(self, make_world, make_config, p):
        """One relay at p → mean attempts ≈ 1/p within 5%."""
        d = 500.0 * math.sqrt(1.0 - p)
        world = make_world(node_count=2, positions=_line([100.0, 100.0 + d]), initial_energy=BIG_BATTERY)
        sim = _sim(make_config, world, routing={"max_retries": 60})
        cands = CandidateRelaySet((Candidate(1, 1.0, p),), 0.0)
        results = _run_hops(sim, 0, 1, cands, 6000)
        attempts = np.mean([r.attempts for r in results])
        assert attempts == pytest.approx(1.0 / p, rel=0.05)
        assert sim.counters.data_tx / sim.counters.hops == pytest.approx(attempts)
        assert all(r.outcome is Outcome.DELIVERED for r in results)

    @pytest.mark.statistical
    def test_two_candidates(self, make_world, make_config):
        """Two relays at r/√2 (p = 0.5 each) → 1/(1 - 0.25) ≈ 1.333 attempts, first relay wins 2/3."""
        off = 500.0 / math.sqrt(2.0)
        world = make_world(node_count=4, initial_energy=BIG_BATTERY,
                           positions=[[100, 500], [100 + off, 500], [100, 500 - off], [950, 950]])
        sim = _sim(make_config, world, routing={"max_retries": 30})
        cands = CandidateRelaySet((Candidate(1, 2.0, 0.5), Candidate(2, 1.0, 0.5)), 0.0)
        results = _run_hops(sim, 0, 3, cands, 4000)
        assert np.mean([r.attempts for r in results]) == pytest.approx(4.0 / 3.0, abs=0.04)
        assert np.mean([r.forwarder == 1 for r in results]) == pytest.approx(2.0 / 3.0, abs=0.03)
        assert all(r.outcome is Outcome.FORWARDED for r in results)

    def test_perfect_link_single_attempt(self, make_world, make_config):
        world = make_world(node_count=2, positions=[[300, 300], [300, 300]])
        sim = _sim(make_config, world)
        (hop,) = _run_hops(sim, 0, 1, CandidateRelaySet((Candidate(1, 1.0, 1.0),), 0.0), 1)
        assert (hop.outcome, hop.forwarder, hop.attempts) == (Outcome.DELIVERED, 1, 1)

    def test_empty_set(self, make_world, make_config):
        world = make_world(node_count=2)
        sim = _sim(make_config, world)
        with pytest.raises(NoCandidates):
            _run_hops(sim, 0, 1, CandidateRelaySet((), 0.0), 1)

    def test_unreachable_relay_dropped(self, make_world, make_config):
        world = make_world(node_count=3, initial_range=100.0, positions=_line([0, 400, 800]))
        sim = _sim(make_config, world, world={"initial_range": 100.0}, routing={"max_retries": 4})
        with pytest.raises(Dropped):
            _run_hops(sim, 0, 2, CandidateRelaySet((Candidate(1, 1.0, 0.0),), 0.0), 1)
        assert sim.counters.data_tx == 4
        assert sim.counters.hops == 0

    def test_transmission_energy(self, make_world, make_config):
        world = make_world(node_count=2, positions=[[300, 300], [300, 300]])
        sim = _sim(make_config, world)
        _run_hops(sim, 0, 1, CandidateRelaySet((Candidate(1, 1.0, 1.0),), 0.0), 1)
        assert sim.ledger.by_kind["data.tx"] == pytest.approx(TX_JOULES)


class TestPickForwarder:
    def test_first_receiver(self):
        assert pick_forwarder(np.array([False, True, True])) == 1

    def test_priority_decides_over_identity(self):
        """A lower-listed destination that hears loses to the head of the list."""
        assert pick_forwarder(np.array([True, True])) == 0

    def test_nobody(self):
        assert pick_forwarder(np.array([False, False])) is None


class TestCandidateRelaySet:
    def test_must_be_ordered(self):
        with pytest.raises(ValueError):
            CandidateRelaySet((Candidate(1, 0.5, 1.0), Candidate(2, 0.9, 1.0)), 0.0)

    def test_without(self):
        cands = CandidateRelaySet((Candidate(1, 3.0, 1.0), Candidate(2, 2.0, 1.0), Candidate(3, 1.0, 1.0)), 0.0)
        assert cands.without({2}).ids == [1, 3]

    def test_destination_first(self):
        cands = CandidateRelaySet((Candidate(1, 3.0, 1.0), Candidate(9, 1.0, 0.4), Candidate(2, 0.5, 1.0)), 0.0, 3)
        moved = cands.destination_first(9)
        assert moved.ids == [9, 1, 2]
        assert [c.utility for c in moved.members] == [3.0, 3.0, 0.5]
        assert moved.members[0].p == 0.4
        assert moved.rnd == 3

    def test_destination_first_noop(self):
        cands = CandidateRelaySet((Candidate(1, 3.0, 1.0), Candidate(2, 0.5, 1.0)), 0.0)
        assert cands.destination_first(9) is cands
        assert cands.destination_first(1) is cands


# ── link estimation and energy ───────────────────────────────────────────────


class TestLinkEstimator:
    @pytest.mark.statistical
    def test_converges_to_delivery_prob(self, make_world):
        """p = 0.6 link, 400-round window → estimate within ±0.1."""
        d = 500.0 * math.sqrt(0.4)
        world = make_world(node_count=2, positions=_line([100.0, 100.0 + d]))
        est = LinkEstimator(2, window=400, alpha=1.0)
        gen = np.random.default_rng(5)
        for _ in range(400):
            beacon_round(world, est, gen)
        assert est.p_hat(0, 1) == pytest.approx(0.6, abs=0.1)
        assert est.p_hat(1, 0) == pytest.approx(0.6, abs=0.1)

    def test_first_round_is_raw_ratio(self):
        est = LinkEstimator(2, window=10, alpha=0.2)
        est.observe(np.array([[False, True], [False, False]]), np.array([True, True]))
        assert est.p_hat(0, 1) == 1.0
        assert est.p_hat(1, 0) == 0.0

    def test_ewma_after_first_round(self):
        est = LinkEstimator(2, window=10, alpha=0.5)
        sent = np.array([True, True])
        est.observe(np.array([[False, True], [False, False]]), sent)
        est.observe(np.array([[False, False], [False, False]]), sent)
        # window ratio 1/2, blended with the previous 1.0
        assert est.p_hat(0, 1) == pytest.approx(0.75)

    def test_etx_floor(self):
        est = LinkEstimator(2)
        assert est.etx(0, 1) == pytest.approx(100.0)

    def test_graph_weights(self):
        est = LinkEstimator(3)
        est.estimate[:] = [[0, 0.5, 0.005], [0.25, 0, 1.0], [0, 0, 0]]
        g = est.graph()
        assert g[0][1]["weight"] == pytest.approx(2.0)
        assert not g.has_edge(0, 2)
        assert g[1][2]["weight"] == pytest.approx(1.0)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            LinkEstimator(2, window=0)


class TestEnergy:
    def test_airtime(self):
        assert airtime(1024, 15000.0) == pytest.approx(0.068267, abs=1e-6)

    def test_full_power_packet(self, make_world, make_config):
        """Range above half the initial range → 0.8 W × airtime ≈ 0.0546 J."""
        world = make_world(node_count=2)
        radio = make_config().radio
        spent = energy_account(world, 0, Action.TX, airtime(1024, 15000.0), radio)
        assert spent == pytest.approx(0.0546, abs=1e-4)

    def test_low_power_when_short(self, make_world, make_config):
        world = make_world(node_count=2)
        world.set_range(0, 200.0)
        radio = make_config().radio
        assert energy_account(world, 0, Action.TX, 1.0, radio) == pytest.approx(0.1)
        assert energy_account(world, 1, Action.RX, 1.0, radio) == pytest.approx(0.05)
        assert energy_account(world, 1, Action.IDLE, 1.0, radio) == 0.0

    def test_negative_duration(self, make_world, make_config):
        with pytest.raises(ValueError):
            energy_account(make_world(node_count=2), 0, Action.TX, -1.0, make_config().radio)


# ── ExOR forwarder lists ─────────────────────────────────────────────────────


class TestExorPriorities:
    def test_shortest_paths(self):
        g = nx.DiGraph()
        g.add_weighted_edges_from([(0, 1, 2.0), (1, 2, 1.0), (0, 2, 5.0)])
        assert etx_to_destination(g, 2) == {2: 0.0, 1: 1.0, 0: 3.0}

    def test_ordering_and_pruning(self):
        etx = {1: 2.0, 2: 1.0}
        p = {1: 0.5, 2: 0.5}
        assert forwarder_list([1, 2, 3], etx, p.get, 0.1) == [(2, 1.0, 0.5), (1, 2.0, 0.5)]
        assert forwarder_list([1, 2, 3], etx, p.get, 0.3) == [(2, 1.0, 0.5)]

    def test_no_survivors(self, make_world, make_config):
        world = make_world(node_count=3, positions=_line([400, 100, 950]))
        sim = _sim(make_config, world, routing={"protocol": "exor"})
        with pytest.raises(NoCandidates):
            sim.router.candidates(0, 2)


# ── CBRT candidate ranking ───────────────────────────────────────────────────


class TestCbrtCandidates:
    def _five_responders(self, make_world, make_config, **policy):
        world = make_world(node_count=7, positions=_line([100, 150, 200, 250, 300, 350, 900]))
        return _sim(make_config, world, policy=policy or {"n1": 3, "n2": 6})

    def test_priority_follows_fuzzy_ranking(self, make_world, make_config, monkeypatch, five_relays):
        """Replies carrying the five-candidate example table → 3, 1, 4, 2, 5."""
        sim = self._five_responders(make_world, make_config)
        monkeypatch.setattr("cbrt.routing.cbrt.candidate_metrics", lambda *_: five_relays)
        cands = sim.router.build_candidates(0, 6)
        assert cands.ids == [3, 1, 4, 2, 5]
        assert cands.rnd == 5

    def test_destination_in_reach_leads(self, make_world, make_config, monkeypatch):
        """Destination inside the survival set heads the list even when the ranking puts it last."""
        world = make_world(node_count=7, positions=_line([100, 150, 200, 250, 300, 350, 400]))
        sim = _sim(make_config, world, policy={"n1": 3, "n2": 6})
        monkeypatch.setattr("cbrt.routing.cbrt.prioritize",
                            lambda table, *_, **__: [(i, float(table.m - i)) for i in range(table.m)])
        cands = sim.router.build_candidates(0, 6)
        assert cands.ids == [6, 1, 2, 3, 4, 5]
        assert cands.rnd == 6

    def test_in_band_sender_keeps_range(self, make_world, make_config):
        sim = self._five_responders(make_world, make_config)
        sim.router.build_candidates(0, 6)
        assert sim.counters.range_adjusts == 0
        assert sim.world.range[0] == 500.0

    def test_sparse_sender_widens_range(self, make_world, make_config):
        """Nobody inside 100 m → the sender grows its range (capped at 400 m) and hears the three relays ahead."""
        world = make_world(node_count=5, initial_range=100.0, r_max=400.0, positions=_line([0, 150, 200, 250, 900]))
        sim = _sim(make_config, world, world={"initial_range": 100.0}, policy={"n1": 3, "n2": 6})
        cands = sim.router.build_candidates(0, 4)
        assert 250.0 < sim.world.range[0] <= 400.0
        assert sorted(cands.ids) == [1, 2, 3]
        assert cands.rnd == 0
        assert [a[-1] for a in sim.adjustments] == ["route"]

    def test_crowded_sender_shrinks_range(self, make_world, make_config, monkeypatch):
        """Five replies against a [1, 2] band (one relay targeted) → range halfway between the nearest two relays."""
        sim = self._five_responders(make_world, make_config, n1=1, n2=2)
        monkeypatch.setattr(sim.router.otc, "decide", lambda *_: True)
        cands = sim.router.build_candidates(0, 6)
        assert sim.router.otc.target_count == 1
        assert sim.world.range[0] == pytest.approx(75.0)
        assert cands.ids == [1]
        assert sim.counters.range_adjusts == 1

    def test_shrink_keeps_destination_in_reach(self, make_world, make_config, monkeypatch):
        world = make_world(node_count=7, positions=_line([100, 150, 200, 250, 300, 350, 400]))
        sim = _sim(make_config, world, policy={"n1": 1, "n2": 2})
        monkeypatch.setattr(sim.router.otc, "decide", lambda *_: True)
        cands = sim.router.build_candidates(0, 6)
        assert sim.world.range[0] == pytest.approx(300.0)
        assert cands.ids[0] == 6

    def test_unchanged_range_not_counted(self, make_world, make_config):
        sim = self._five_responders(make_world, make_config)
        sim.router._set_range(0, 500.0, 9, "route")
        assert sim.counters.range_adjusts == 0
        assert sim.adjustments == []

    def test_maintenance_skips_route_holders(self, make_world, make_config, monkeypatch):
        sim = self._five_responders(make_world, make_config)
        sim.router.build_candidates(0, 6)
        monkeypatch.setattr(sim.router.otc, "decide", lambda *_: True)
        sim.router.maintain()
        tuned = {a[1] for a in sim.adjustments if a[-1] == "maintenance"}
        assert tuned
        assert 0 not in tuned
        assert sim.world.range[0] == 500.0

    def test_replies_cost_energy(self, make_world, make_config):
        sim = self._five_responders(make_world, make_config)
        sim.router.build_candidates(0, 6)
        assert sim.ledger.by_kind["control.tx"] > 0.0
        assert sim.ledger.by_kind["control.rx"] > 0.0

    def test_cache_reused_within_window(self, make_world, make_config):
        sim = self._five_responders(make_world, make_config)
        first = sim.router.candidates(0, 6)
        assert sim.router.candidates(0, 6) is first

    def test_no_survival_set(self, make_world, make_config):
        world = make_world(node_count=3, initial_range=300.0, r_max=300.0, positions=_line([100, 900, 50]))
        sim = _sim(make_config, world, world={"initial_range": 300.0, "r_max": 300.0})
        with pytest.raises(NoCandidates):
            sim.router.build_candidates(0, 1)

    def test_thresholds_filter(self):
        table = MetricTable.of([[0.1, 2.0], [3.0, 9.0], [4.0, 1.0]], [Orientation.BENEFIT, Orientation.COST],
                               column_names=["energy", "link_etx"])
        keep = eligible(table, [1, 2, 3], dest=2, bounds={"energy": 0.25, "link_etx": 5.0})
        np.testing.assert_array_equal(keep, [False, True, True])

    def test_closing_speed(self, make_world):
        world = make_world(node_count=2, positions=[[100, 100], [400, 500]])
        world.speed[0] = 5.0
        world.heading[0] = math.atan2(400, 300)
        assert closing_speed(world, 0, 1) == pytest.approx(5.0)
        assert closing_speed(world, 1, 1) == 0.0


# ── whole runs ───────────────────────────────────────────────────────────────


def _small(make_config, protocol="cbrt", **sim):
    return make_config(world={"node_count": 20}, routing={"protocol": protocol},
                       sim={"duration_s": 60.0, "warmup_s": 10.0, **sim})


class TestSimulation:
    def test_conservation(self, make_config):
        result = run(_small(make_config))
        assert result.generated > 0
        assert result.conserved

    def test_deterministic(self, make_config):
        a = run(_small(make_config)).log.to_frame()
        b = run(_small(make_config)).log.to_frame()
        pd.testing.assert_frame_equal(a, b)

    def test_samples_end_at_duration(self, make_config):
        frame = run(_small(make_config)).log.to_frame()
        assert frame["time"].iloc[-1] == 60.0
        assert frame["time"].is_monotonic_increasing

    def test_exor_never_adjusts(self, make_config):
        result = run(_small(make_config, "exor"))
        assert "RangeAdjust" not in result.events
        assert result.counters.range_adjusts == 0
        assert result.log.to_frame()["range_m"].nunique() == 1

    def test_energy_accounted(self, make_config):
        result = run(_small(make_config))
        assert result.energy_initial - result.energy_residual == pytest.approx(result.energy_charged, rel=1e-9)

    def test_trace_written(self, make_config, tmp_path):
        trace = tmp_path / "trace.jsonl"
        result = run(_small(make_config, duration_s=20.0, warmup_s=5.0, trace_path=str(trace)))
        kinds = [json.loads(line)["kind"] for line in trace.read_text().splitlines()]
        assert kinds[0] == "BeaconRound"
        assert len(kinds) == sum(result.events.values())

    def test_dead_world_drops(self, make_world, make_config):
        world = make_world(node_count=3, positions=_line([100, 300, 500]), initial_energy=0.01)
        cfg = make_config(world={"node_count": 3}, traffic={"pairs": [[0, 2]]},
                          sim={"duration_s": 30.0, "warmup_s": 5.0})
        result = run(cfg, world)
        assert result.conserved
        assert not world.alive.any()

    @pytest.mark.statistical
    def test_single_link_etx_metric(self, make_world, make_config):
        """ExOR over one p = 0.6 link → reported ETX ≈ 1/0.6 within 5%."""
        d = 500.0 * math.sqrt(0.4)
        world = make_world(node_count=2, positions=_line([100.0, 100.0 + d]), initial_energy=BIG_BATTERY)
        cfg = make_config(world={"node_count": 2}, routing={"protocol": "exor", "max_retries": 30},
                          traffic={"pairs": [[0, 1]], "rate_pps": 3.0},
                          sim={"duration_s": 1200.0, "warmup_s": 30.0})
        result = run(cfg, world)
        assert result.summary(30.0)["etx"] == pytest.approx(1.0 / 0.6, rel=0.05)

    @pytest.mark.statistical
    def test_chain_transmissions(self, make_world, make_config):
        """Four-node chain: 1/0.64 + 1/0.8064 + 1/0.4224 ≈ 5.170 transmissions per delivery."""
        world = make_world(node_count=4, positions=_line([0, 300, 520, 900]), initial_energy=BIG_BATTERY)
        cfg = make_config(world={"node_count": 4}, routing={"protocol": "exor", "max_retries": 30},
                          traffic={"pairs": [[0, 3]], "rate_pps": 2.0},
                          sim={"duration_s": 1200.0, "warmup_s": 30.0})
        result = run(cfg, world)
        assert result.dropped == 0
        assert result.counters.data_tx / result.delivered == pytest.approx(5.170, rel=0.05)
        assert result.counters.hops / result.delivered == pytest.approx(3.0, rel=0.01)

