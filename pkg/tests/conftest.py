"""Shared fixtures and helpers for the semroute test suite."""
import numpy as np
import pytest

from semroute.trainer import TrainConfig


def small_config(**overrides) -> TrainConfig:
    """A tiny configuration that keeps unit tests fast."""
    base = dict(
        d=8, n_experts=4, k=2, hidden=6, option_count=3, n_concepts=4,
        train_size=24, eval_size=12, total_steps=6, warmup_steps=2,
        eval_every=3, batch=8, seed=7,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def config():
    return small_config()
