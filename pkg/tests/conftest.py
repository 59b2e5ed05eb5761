"""Shared fixtures: tiny configs and deterministic sample data."""

import numpy as np
import pytest

from trajlang.dataset import DatasetConfig, generate_dataset
from trajlang.model import ModelConfig


@pytest.fixture(scope="session")
def tiny_config() -> ModelConfig:
    """Small-but-real model: full block structure, cheap shapes."""
    return ModelConfig(depth=32, heads=4, encoder_blocks=1, decoder_blocks=2,
                       block_hidden=48, output_hidden=48, n_waypoints=12,
                       max_objects=3, d_sem=16)


@pytest.fixture(scope="session")
def small_dataset():
    config = DatasetConfig(n_waypoints=12, max_objects=3)
    return generate_dataset(24, seed=90, config=config)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
