"""Tests for cbrt.mobility.world: placement, mobility, survival sets and link model."""

import math

import numpy as np
import pandas as pd
import pytest

from cbrt.mobility.world import (
    LINK_MODELS,
    SNAPSHOT_COLUMNS,
    Mobility,
    WorldConfig,
    delivery_matrix,
    init_world,
    link_delivery_prob,
    rng_streams,
    rwp_speed_bounds,
    step_mobility,
    survival_set,
    survival_set_toward,
    write_snapshot,
)


# ── init_world ───────────────────────────────────────────────────────────────


class TestInitWorld:
    def test_same_seed_identical(self):
        cfg = WorldConfig(node_count=30, seed=11)
        a, b = init_world(cfg), init_world(cfg)
        np.testing.assert_array_equal(a.pos, b.pos)
        np.testing.assert_array_equal(a.speed, b.speed)
        np.testing.assert_array_equal(a.heading, b.heading)

    def test_different_seed_differs(self):
        a = init_world(WorldConfig(node_count=30, seed=1))
        b = init_world(WorldConfig(node_count=30, seed=2))
        assert not np.array_equal(a.pos, b.pos)

    def test_two_nodes(self):
        world = init_world(WorldConfig(node_count=2))
        assert world.n == 2
        assert world.alive.all()

    def test_initial_state(self):
        world = init_world(WorldConfig(node_count=10, initial_range=250.0, initial_energy=5.0))
        assert np.all(world.range == 250.0)
        assert np.all(world.energy == 5.0)
        assert all(len(q) == 0 for q in world.queues)

    @pytest.mark.statistical
    def test_uniform_density(self):
        """10⁵ nodes → each quadrant holds a quarter within 5%."""
        world = init_world(WorldConfig(node_count=100_000, side=1000.0, seed=3))
        left, low = world.pos[:, 0] < 500.0, world.pos[:, 1] < 500.0
        for quadrant in (left & low, left & ~low, ~left & low, ~left & ~low):
            assert abs(quadrant.sum() / 25_000.0 - 1.0) < 0.05

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            WorldConfig(node_count=1)
        with pytest.raises(ValueError):
            WorldConfig(link_model="cubic")

    def test_streams_independent(self):
        streams = rng_streams(5)
        assert set(streams) == {"mobility", "channel", "traffic", "control"}
        draws = {name: g.random() for name, g in streams.items()}
        assert len(set(draws.values())) == 4


# ── step_mobility ────────────────────────────────────────────────────────────


class TestStepMobility:
    def test_zero_dt_no_change(self, make_world):
        world = make_world(speed_mean=1.0, mobility=Mobility.RANDOM_WAYPOINT)
        before = world.pos.copy()
        step_mobility(world, 0.0)
        np.testing.assert_array_equal(world.pos, before)
        assert world.time == 0.0

    def test_constant_velocity_displacement(self, make_world):
        world = make_world(node_count=2, speed_mean=1.0, positions=[[500, 500], [400, 400]])
        world.speed[:] = [2.0, 0.5]
        world.heading[:] = [0.0, math.pi / 2]
        step_mobility(world, 3.0)
        np.testing.assert_allclose(world.pos, [[506.0, 500.0], [400.0, 401.5]], atol=1e-9)

    def test_reflection_keeps_inside(self, make_world):
        world = make_world(node_count=2, side=100.0, initial_range=50.0, positions=[[99, 50], [1, 50]])
        world.speed[:] = [4.0, 4.0]
        world.heading[:] = [0.0, math.pi]
        step_mobility(world, 1.0)
        np.testing.assert_allclose(world.pos, [[97.0, 50.0], [3.0, 50.0]], atol=1e-9)
        np.testing.assert_allclose(world.velocity[:, 0], [-4.0, 4.0], atol=1e-9)

    def test_random_waypoint_bounded(self):
        world = init_world(WorldConfig(node_count=40, speed_mean=20.0, seed=4))
        for _ in range(200):
            step_mobility(world, 1.0)
            assert np.all((world.pos >= 0.0) & (world.pos <= 1000.0))

    def test_waypoint_speed_bounds(self):
        lo, hi = rwp_speed_bounds(0.2)
        assert 0.0 < lo < 0.2 < hi
        assert (hi - lo) / math.log(hi / lo) == pytest.approx(0.2)

    @pytest.mark.statistical
    def test_random_waypoint_mean_speed_holds(self):
        """200 nodes over 10^5 s of legs → network mean speed within 5% of 0.2 m/s at the start and the end."""
        world = init_world(WorldConfig(node_count=200, speed_mean=0.2, seed=7))
        steps = 10_000
        means = np.empty(steps)
        for k in range(steps):
            step_mobility(world, 10.0)
            means[k] = world.speed.mean()
        window = steps // 10
        assert means[:window].mean() == pytest.approx(0.2, rel=0.05)
        assert means[-window:].mean() == pytest.approx(0.2, rel=0.05)
        assert means.mean() == pytest.approx(0.2, rel=0.05)

    def test_waypoint_pause(self, make_world):
        world = make_world(node_count=1, speed_mean=1.0, mobility=Mobility.RANDOM_WAYPOINT, pause_s=3.0,
                           positions=[[0, 0]])
        world.speed[0] = 1.0
        world.waypoint[0] = [2.0, 0.0]
        for _ in range(2):
            step_mobility(world, 1.0)
        np.testing.assert_allclose(world.pos[0], [2.0, 0.0])
        assert world.speed[0] == 0.0
        for _ in range(3):
            step_mobility(world, 1.0)
        np.testing.assert_allclose(world.pos[0], [2.0, 0.0])
        lo, hi = rwp_speed_bounds(1.0)
        assert lo <= world.speed[0] <= hi
        step_mobility(world, 1.0)
        assert np.hypot(*(world.pos[0] - [2.0, 0.0])) == pytest.approx(world.speed[0])

    def test_distances_refreshed(self, make_world):
        world = make_world(node_count=2, positions=[[0, 0], [100, 0]])
        assert world.distance(0, 1) == pytest.approx(100.0)
        world.speed[:] = [0.0, 10.0]
        world.heading[:] = [0.0, 0.0]
        step_mobility(world, 1.0)
        assert world.distance(0, 1) == pytest.approx(110.0)


# ── survival sets ────────────────────────────────────────────────────────────


class TestSurvivalSet:
    LAYOUT = [[0, 0], [50, 10], [90, 0], [-20, 0], [130, 0], [200, 0]]

    def test_hand_geometry(self, make_world):
        """s at origin with 100 m range towards node 5 at x=200."""
        world = make_world(node_count=6, initial_range=100.0, positions=self.LAYOUT)
        assert survival_set(world, 0, 5) == {1, 2}

    def test_destination_in_range_included(self, make_world):
        world = make_world(node_count=6, initial_range=100.0, positions=self.LAYOUT)
        assert 2 in survival_set(world, 1, 2)

    def test_zero_radius(self, make_world):
        world = make_world(node_count=6, initial_range=100.0, positions=self.LAYOUT)
        assert survival_set(world, 0, 5, radius=0.0) == set()

    def test_dead_nodes_excluded(self, make_world):
        world = make_world(node_count=6, initial_range=100.0, positions=self.LAYOUT)
        world.alive[1] = False
        assert survival_set(world, 0, 5) == {2}

    def test_toward_point(self, make_world):
        world = make_world(node_count=6, initial_range=100.0, positions=self.LAYOUT)
        assert survival_set_toward(world, 0, (-1000.0, 0.0)) == {3}

    def test_same_node_rejected(self, make_world):
        world = make_world(node_count=6, initial_range=100.0, positions=self.LAYOUT)
        with pytest.raises(ValueError):
            survival_set(world, 2, 2)


# ── link model ───────────────────────────────────────────────────────────────


class TestLinkDeliveryProb:
    def test_quadratic_examples(self):
        model = LINK_MODELS["quadratic"]
        assert float(model.p_of_distance(0.0)) == 1.0
        assert float(model.p_of_distance(0.5)) == pytest.approx(0.75)
        assert float(model.p_of_distance(1.01)) == 0.0

    def test_disk(self):
        model = LINK_MODELS["disk"]
        np.testing.assert_array_equal(model.p_of_distance([0.2, 1.0, 1.5]), [1.0, 1.0, 0.0])

    def test_world_pairs(self, make_world):
        world = make_world(node_count=3, initial_range=100.0, positions=[[0, 0], [50, 0], [150, 0]])
        assert link_delivery_prob(world, 0, 1) == pytest.approx(0.75)
        assert link_delivery_prob(world, 0, 2) == 0.0

    def test_dead_node(self, make_world):
        world = make_world(node_count=2, initial_range=100.0, positions=[[0, 0], [50, 0]])
        world.alive[1] = False
        assert link_delivery_prob(world, 0, 1) == 0.0

    def test_matrix_matches_pairs(self, make_world):
        world = make_world(node_count=8, initial_range=400.0)
        p = delivery_matrix(world)
        assert np.all(np.diag(p) == 0.0)
        for a in range(8):
            for b in range(8):
                if a != b:
                    assert p[a, b] == pytest.approx(link_delivery_prob(world, a, b))


# ── energy and snapshots ─────────────────────────────────────────────────────


class TestWorldState:
    def test_charge_kills_at_zero(self, make_world):
        world = make_world(node_count=2, initial_energy=1.0)
        assert world.charge(0, 0.4) == pytest.approx(0.4)
        assert world.alive[0]
        assert world.charge(0, 5.0) == pytest.approx(0.6)
        assert not world.alive[0]
        assert world.energy[0] == 0.0

    def test_set_range_clamps(self, make_world):
        world = make_world(node_count=2, side=1000.0)
        assert world.set_range(0, 1.0) == world.cfg.r_min
        assert world.set_range(0, 1e9) == 1000.0

    def test_snapshot_round_trip(self, make_world, tmp_path):
        world = make_world(node_count=5)
        path = write_snapshot(world, tmp_path / "snapshot.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == SNAPSHOT_COLUMNS
        np.testing.assert_allclose(frame[["x", "y"]].to_numpy(), world.pos, atol=1e-6)
