import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from starnoma import (SolverOptions, SystemConfig, config_from_dict, dbm_to_watts,
                      distance, generate_users, load_config, rng_streams, watts_to_dbm)

from conftest import small_config


def test_dbm_to_watts_reference_points():
    assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-12)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-12)
    # -150 dBm/Hz over 1 MHz equals -90 dBm total.
    assert dbm_to_watts(-90.0) == pytest.approx(1e-12, rel=1e-12)
    assert dbm_to_watts(-150.0) * 1e6 == pytest.approx(1e-12, rel=1e-12)


@given(st.floats(min_value=-140.0, max_value=80.0))
def test_dbm_round_trip(value_dbm):
    assert watts_to_dbm(dbm_to_watts(value_dbm)) == pytest.approx(value_dbm, rel=1e-12, abs=1e-12)


def test_watts_to_dbm_rejects_nonpositive():
    with pytest.raises(ValueError):
        watts_to_dbm(0.0)
    with pytest.raises(ValueError):
        watts_to_dbm(-1.0)


def test_distance_examples():
    assert distance((0, 0, 0), (0, 0, 20)) == pytest.approx(20.0)
    assert distance((3, 4, 0), (0, 0, 0)) == pytest.approx(5.0)
    assert distance((-100, 0, 25), (0, 0, 20)) == pytest.approx(math.sqrt(100**2 + 5**2))


def test_generate_users_deterministic_under_seed():
    cfg = small_config(users_per_side=1, seed=42)
    a = generate_users(cfg, rng_streams(42).placement)
    b = generate_users(cfg, rng_streams(42).placement)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.transmitted, b.transmitted)


def test_generate_users_sides_split_by_surface_plane():
    cfg = small_config(users_per_side=4, seed=3)
    users = generate_users(cfg, rng_streams(3).placement)
    assert int(np.sum(users.positions[:, 0] > 0)) == 4
    assert int(np.sum(users.positions[:, 0] < 0)) == 4
    assert np.all(users.positions[users.transmitted, 0] > 0)
    assert np.all(users.positions[~users.transmitted, 0] < 0)
    assert np.all(users.positions[:, 2] == 0.0)
    users.validate()


def test_generate_users_region_bounds():
    cfg = small_config(users_per_side=3, seed=9)  # 1000 m x 1000 m region
    users = generate_users(cfg, rng_streams(9).placement)
    assert np.all(np.abs(users.positions[:, 0]) <= 500.0)
    assert np.all(np.abs(users.positions[:, 1]) <= 500.0)


def test_generate_users_rejects_bad_region():
    cfg = replace(small_config(), region_half_extent_m=0.0)
    with pytest.raises(ValueError):
        generate_users(cfg, rng_streams(1).placement)


def test_named_streams_are_independent():
    s = rng_streams(5)
    a = s.placement.random(4)
    b = s.fading.random(4)
    assert not np.allclose(a, b)
    # Re-deriving a stream replays it from the start.
    assert np.allclose(rng_streams(5).fading.random(4), b)


def test_default_config_matches_table_values():
    cfg = SystemConfig()
    assert cfg.tx_power_w == pytest.approx(dbm_to_watts(30.0))
    assert cfg.noise_power_w == pytest.approx(dbm_to_watts(-150.0) * 1e6)
    assert cfg.wavelength_m == pytest.approx(3e8 / 750e6)
    assert cfg.d_y_m == pytest.approx(cfg.wavelength_m / 10.0)
    assert cfg.num_elements == 100
    assert tuple(cfg.ris_pos) == (0.0, 0.0, 20.0)
    cfg.validate()


def test_config_validation_errors():
    with pytest.raises(ValueError):
        replace(SystemConfig(), tx_power_w=-1.0).validate()
    with pytest.raises(ValueError):
        replace(SystemConfig(), users_per_side=0).validate()
    with pytest.raises(ValueError):
        # Direct link must be at least as lossy as the BS-surface link.
        replace(SystemConfig(), pathloss_exp_direct=1.5).validate()
    with pytest.raises(ValueError):
        SolverOptions(inner_tol=0.0).validate()


def test_config_from_dict_converts_units():
    cfg = config_from_dict({
        "users_per_side": 3,
        "tx_power_dbm": 30.0,
        "noise_psd_dbm_per_hz": -150.0,
        "bandwidth_hz": 1e6,
        "element_spacing_wavelengths": 0.1,
        "rng_seed": 12,
        "solver": {"inner_tol": 1e-5},
    })
    assert cfg.tx_power_w == pytest.approx(1.0)
    assert cfg.noise_power_w == pytest.approx(1e-12)
    assert cfg.d_y_m == pytest.approx(0.04)
    assert cfg.solver.inner_tol == 1e-5


def test_config_from_dict_rejects_unknown_and_conflicting_keys():
    with pytest.raises(ValueError):
        config_from_dict({"no_such_key": 1})
    with pytest.raises(ValueError):
        config_from_dict({"solver": {"no_such_option": 1}})
    with pytest.raises(ValueError):
        config_from_dict({"tx_power_dbm": 30.0, "tx_power_w": 1.0})


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"users_per_side": 2, "tx_power_dbm": 20.0, "rng_seed": 5}))
    cfg = load_config(path)
    assert cfg.users_per_side == 2
    assert cfg.tx_power_w == pytest.approx(0.1)
    assert cfg.rng_seed == 5
