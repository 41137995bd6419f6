from __future__ import annotations

import numpy as np
import pytest

from pushframe.capture_sim.model import Image
from pushframe.recon.model import ReconConfig
from pushframe.scenes import natural_scene
from pushframe.sensing_plan.planner import SensingPlanner


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def planner() -> SensingPlanner:
    return SensingPlanner()


@pytest.fixture
def small_scene() -> Image:
    """16 x 16 piecewise-smooth scene, large enough for SSIM."""
    return natural_scene(16, 16, seed=3)


@pytest.fixture
def quick_recon() -> ReconConfig:
    """Short schedule for tests that only need a plausible solve."""
    return ReconConfig(mu_schedule=(0.1, 0.01), max_iters_per_stage=60, block_width=4)
