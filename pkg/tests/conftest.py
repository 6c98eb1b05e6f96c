from dataclasses import replace

import numpy as np
import pytest

from starnoma import SystemConfig, build_channels, generate_users, rng_streams


def small_config(users_per_side=2, elements_y=3, elements_z=3, seed=1, **overrides):
    cfg = SystemConfig(
        users_per_side=users_per_side,
        elements_y=elements_y,
        elements_z=elements_z,
        rng_seed=seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


def make_scenario(cfg):
    streams = rng_streams(cfg.rng_seed)
    users = generate_users(cfg, streams.placement)
    channels = build_channels(cfg, users, streams.fading)
    return users, channels


@pytest.fixture
def cfg2():
    return small_config(users_per_side=2, seed=11)


@pytest.fixture
def scenario2(cfg2):
    users, channels = make_scenario(cfg2)
    return cfg2, users, channels


def assert_nondecreasing(values, slack=1e-9):
    arr = np.asarray(values, dtype=float)
    drops = np.diff(arr)
    assert np.all(drops >= -slack), f"sequence decreases: min step {drops.min():.3e} in {arr}"
