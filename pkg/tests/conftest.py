"""Shared fixtures for dccal tests."""

import numpy as np
import pytest

from dccal.model.camera import CameraIntrinsics
from dccal.simulation.simulator import (
    InitNoise,
    JointRange,
    SimulationConfig,
    default_truth_model,
    synthesize_dataset,
)


def small_config(**overrides) -> SimulationConfig:
    """4 x 4 joint grid, same ranges as the full protocol."""
    values = dict(
        joint_grid=[
            JointRange(min_rad=-0.6, max_rad=0.6, count=4),
            JointRange(min_rad=-0.3, max_rad=0.3, count=4),
        ]
    )
    values.update(overrides)
    return SimulationConfig(**values)


@pytest.fixture
def camera():
    """Default 640x480 pinhole camera."""
    return CameraIntrinsics.create_default()


@pytest.fixture
def truth_model():
    """Ground-truth 2-link gimbal."""
    return default_truth_model()


@pytest.fixture
def rng():
    """Seeded generator for random test configurations."""
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def noiseless_bundle():
    """16 noiseless sets built from ground-truth target points."""
    config = small_config(
        pixel_noise_sigma=0.0,
        init_noise=InitNoise(sigma_translation_m=0.005, sigma_rotation_rad=0.02),
    )
    return synthesize_dataset(config, use_true_points=True)


@pytest.fixture(scope="session")
def noisy_bundle():
    """16 sets with 0.4 px pixel noise and PnP-derived target points."""
    config = small_config(
        init_noise=InitNoise(sigma_translation_m=0.005, sigma_rotation_rad=0.02),
        rng_seed=3,
    )
    return synthesize_dataset(config)
