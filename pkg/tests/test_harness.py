"""Tests for cbrt.topology.harness: identical traces, per-epoch rows and summaries."""

import numpy as np
import pandas as pd
import pytest

from cbrt.mobility.world import WorldConfig
from cbrt.topology import KConnectionController
from cbrt.topology.harness import (
    KCONN,
    OTC,
    TOPO_COLUMNS,
    TopologyHarness,
    degrees,
    sink_points,
    sink_rnd,
    summarize,
)


def _harness(seed=3, duration=10.0):
    cfg = WorldConfig(node_count=30, initial_range=100.0, speed_mean=2.0, seed=seed)
    kconn = KConnectionController(k=5, r_min=cfg.r_min, r_max=cfg.range_max)
    return TopologyHarness(cfg, 7, 9, kconn, duration=duration, epoch=1.0)


# ── geometry helpers ─────────────────────────────────────────────────────────


class TestGeometry:
    LINE = [[100, 500], [150, 500], [50, 500]]

    def test_degrees(self, make_world):
        world = make_world(node_count=3, initial_range=100.0, positions=self.LINE)
        np.testing.assert_array_equal(degrees(world), [2, 2, 2])

    def test_sink_rnd_points_inwards(self, make_world):
        """Sinks lie far beyond the centre, so only nodes nearer the centre count."""
        world = make_world(node_count=3, initial_range=100.0, positions=self.LINE)
        np.testing.assert_array_equal(sink_rnd(world), [1, 0, 2])

    def test_sink_distance(self, make_world):
        world = make_world(node_count=3, initial_range=100.0, positions=self.LINE)
        sinks = sink_points(world)
        assert np.all(sinks[:, 0] > 1e6)
        np.testing.assert_allclose(sinks[:, 1], 500.0)

    def test_dead_nodes_ignored(self, make_world):
        world = make_world(node_count=3, initial_range=100.0, positions=self.LINE)
        world.alive[0] = False
        assert sink_rnd(world)[2] == 1
        assert degrees(world)[1] == 1


# ── harness runs ─────────────────────────────────────────────────────────────


class TestTopologyHarness:
    def test_columns_and_rows(self):
        frame = _harness().run()
        assert list(frame.columns) == TOPO_COLUMNS
        assert (frame["controller"] == OTC).sum() == 10
        assert (frame["controller"] == KCONN).sum() == 10

    def test_epoch_times(self):
        frame = _harness().run_otc()
        np.testing.assert_allclose(frame["time"], np.arange(1.0, 11.0))

    def test_deterministic(self):
        pd.testing.assert_frame_equal(_harness().run(), _harness().run())

    def test_seed_changes_trace(self):
        a, b = _harness(seed=3).run_kconnection(), _harness(seed=4).run_kconnection()
        assert not np.allclose(a["mean_degree"], b["mean_degree"])

    def test_predicted_ratio_only_for_otc(self):
        harness = _harness()
        frame = harness.run()
        otc = frame[frame["controller"] == OTC]
        assert otc["predicted_ratio"].iloc[0] == pytest.approx(harness.otc.predicted_ratio())
        assert frame[frame["controller"] == KCONN]["predicted_ratio"].isna().all()

    def test_ratios_are_fractions(self):
        frame = _harness().run()
        assert frame["adjust_ratio"].between(0.0, 1.0).all()

    def test_otc_range_inside_bounds(self):
        harness = _harness()
        assert harness.world_cfg.r_min <= harness.otc_range <= harness.world_cfg.range_max

    def test_invalid_duration(self):
        cfg = WorldConfig(node_count=5)
        with pytest.raises(ValueError):
            TopologyHarness(cfg, 7, 9, KConnectionController(), duration=0.0)

    @pytest.mark.statistical
    def test_otc_holds_band(self):
        """100 nodes starting at 100 m → mean RND in [7, 9] on ≥ 90% of epochs after a 30 s warmup."""
        cfg = WorldConfig(node_count=100, initial_range=100.0, speed_mean=0.2, seed=1)
        kconn = KConnectionController(k=5, r_min=cfg.r_min, r_max=cfg.range_max)
        frame = TopologyHarness(cfg, 7, 9, kconn, duration=120.0, epoch=1.0).run_otc()
        (otc,) = summarize(frame, 7, 9, warmup=30.0)
        assert otc.rnd_in_band >= 0.9
        assert 7.0 <= otc.mean_rnd <= 9.0


class TestSummarize:
    def test_warmup_and_band(self):
        frame = pd.DataFrame({
            "time": [1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0],
            "controller": [OTC] * 4 + [KCONN] * 4,
            "adjust_ratio": [0.9, 0.1, 0.1, 0.1, 0.9, 0.5, 0.5, 0.5],
            "mean_degree": [1.0, 5.0, 5.0, 5.0, 1.0, 4.0, 5.0, 6.0],
            "mean_rnd": [0.0, 8.0, 8.0, 12.0, 0.0, 2.0, 2.0, 2.0],
        })
        kconn, otc = summarize(frame, 7, 9, warmup=1.0)
        assert (kconn.controller, otc.controller) == (KCONN, OTC)
        assert otc.adjust_ratio == pytest.approx(0.1)
        assert otc.rnd_in_band == pytest.approx(2 / 3)
        assert kconn.mean_degree == pytest.approx(5.0)
        assert kconn.rnd_in_band == 0.0

    def test_everything_in_warmup(self):
        frame = pd.DataFrame({"time": [1.0], "controller": [OTC], "adjust_ratio": [1.0],
                              "mean_degree": [1.0], "mean_rnd": [1.0]})
        assert summarize(frame, 7, 9, warmup=5.0) == []
