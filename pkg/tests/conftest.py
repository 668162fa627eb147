"""Shared fixtures for CBRT tests."""
import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure src is importable
ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from cbrt.config import ExperimentConfig  # noqa: E402
from cbrt.mobility.world import Mobility, WorldConfig, init_world  # noqa: E402
from cbrt.ranking.table import MetricTable  # noqa: E402

DATA_DIR = ROOT / "data"
CONFIGS_DIR = ROOT / "configs"


@pytest.fixture
def rng():
    """Seeded random generator for reproducibility."""
    return np.random.RandomState(42)


@pytest.fixture
def five_relays():
    """Five candidates by three benefit metrics."""
    return MetricTable.from_csv(DATA_DIR / "five_relays.csv")


@pytest.fixture
def three_relays():
    """Three candidates whose first metric barely varies."""
    return MetricTable.from_csv(DATA_DIR / "three_relays.csv")


@pytest.fixture
def make_world():
    """Factory fixture: seeded world, optionally with fixed positions."""
    def _make(node_count=20, side=1000.0, initial_range=500.0, seed=1, speed_mean=0.0,
              mobility=Mobility.CONSTANT_VELOCITY, positions=None, **kwargs):
        cfg = WorldConfig(side=side, node_count=node_count, speed_mean=speed_mean,
                          initial_range=initial_range, seed=seed, mobility=mobility, **kwargs)
        world = init_world(cfg)
        if positions is not None:
            world.pos[:] = np.asarray(positions, dtype=float)
            world.speed[:] = 0.0
            world.moved()
        return world
    return _make


@pytest.fixture
def make_config():
    """Factory fixture: ExperimentConfig with section overrides, e.g. sim={"duration_s": 20}."""
    def _make(**sections):
        return ExperimentConfig().replace(**sections) if sections else ExperimentConfig()
    return _make
