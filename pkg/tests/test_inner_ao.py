import math
from dataclasses import replace

import numpy as np
import pytest

from starnoma import (SolverOptions, amplitude_surrogate_bound, gain_coefficients,
                      inner_solve, optimal_phase, optimize_amplitudes,
                      optimize_powers, optimize_time, power_surrogate_bound)
from starnoma.channel import ChannelRealization
from starnoma.inner_ao import GainCoefficients, equalize_pair_power
from starnoma.star_noma import all_cascades

import oracles
from conftest import assert_nondecreasing, make_scenario, small_config


def _random_link(rng, m=4):
    hd = complex(rng.normal(), rng.normal())
    hru = rng.normal(size=m) + 1j * rng.normal(size=m)
    hbs = rng.normal(size=m) + 1j * rng.normal(size=m)
    return hd, hru, hbs


def _pair_channels(hd_a, hru_a, hd_b, hru_b, hbs):
    return ChannelRealization(
        h_direct=np.array([hd_a, hd_b], dtype=complex),
        h_bs_ris=np.asarray(hbs, dtype=complex),
        h_ris_user=np.stack([hru_a, hru_b]).astype(complex),
    )


def _aligned_pair(rng, m=4, scale=1.0):
    hd_a, hru_a, hbs = _random_link(rng, m)
    hd_b, hru_b, _ = _random_link(rng, m)
    channels = _pair_channels(scale * hd_a, scale * hru_a, scale * hd_b, scale * hru_b, hbs)
    theta = np.stack([
        optimal_phase(channels.h_direct[k], channels.h_ris_user[k], channels.h_bs_ris)
        for k in range(2)
    ])
    return channels, theta


# ---------------------------------------------------------------------------
# Gain decomposition.
# ---------------------------------------------------------------------------


def test_gain_coefficients_no_cascade():
    hd = 2.0 - 1.0j
    coeffs = gain_coefficients(hd, np.zeros(3, complex), np.ones(3, complex), np.zeros(3))
    assert coeffs.b == 0.0 and coeffs.c == 0.0
    assert coeffs.a == pytest.approx(abs(hd) ** 2)


def test_gain_coefficients_no_direct():
    rng = np.random.default_rng(1)
    _, hru, hbs = _random_link(rng)
    theta = optimal_phase(0.0, hru, hbs)
    coeffs = gain_coefficients(0.0, hru, hbs, theta)
    assert coeffs.a == 0.0 and coeffs.b == 0.0
    assert coeffs.c == pytest.approx(oracles.aligned_cascade_magnitude(hru, hbs) ** 2, rel=1e-12)


def test_gain_coefficients_identity_on_aligned_phases():
    rng = np.random.default_rng(2)
    from starnoma import combined_gain

    for _ in range(20):
        hd, hru, hbs = _random_link(rng, m=5)
        theta = optimal_phase(hd, hru, hbs)
        coeffs = gain_coefficients(hd, hru, hbs, theta)
        for beta in (0.37, *np.linspace(0.0, 1.0, 11)):
            expected = abs(combined_gain(hd, hru, hbs, beta, theta)) ** 2
            assert coeffs.gain2(beta) == pytest.approx(expected, rel=1e-10)
        # Cross term squared equals 4 * direct * cascade when both paths exist.
        assert coeffs.b**2 == pytest.approx(4.0 * coeffs.a * coeffs.c, rel=1e-12)


# ---------------------------------------------------------------------------
# Tangent bounds.
# ---------------------------------------------------------------------------


def test_amplitude_bound_tight_at_expansion():
    coeffs = GainCoefficients(a=1.0, b=2.0, c=1.0)
    l2, noise = 3.0, 0.5
    for eps in (0.1, 0.5, 1.0):
        bound = amplitude_surrogate_bound(eps, coeffs, l2, noise)
        assert bound(eps) == pytest.approx(math.log2(l2 * coeffs.gain2(eps) + noise), rel=1e-12)


def test_amplitude_bound_constant_without_interference():
    coeffs = GainCoefficients(a=1.0, b=2.0, c=1.0)
    bound = amplitude_surrogate_bound(0.3, coeffs, 0.0, 0.25)
    assert bound.slope == 0.0
    assert bound(0.9) == pytest.approx(math.log2(0.25))


def test_amplitude_bound_dominates_function():
    rng = np.random.default_rng(3)
    for _ in range(20):
        coeffs = GainCoefficients(*rng.uniform(0.1, 5.0, size=3))
        l2 = rng.uniform(0.0, 4.0)
        noise = rng.uniform(0.01, 1.0)
        eps = rng.uniform(1e-6, 1.0)
        bound = amplitude_surrogate_bound(eps, coeffs, l2, noise)
        betas = rng.uniform(0.0, 1.0, size=100)
        true = np.log2(l2 * (coeffs.a + coeffs.b * np.sqrt(betas) + coeffs.c * betas) + noise)
        slack = np.array([bound(b) for b in betas]) - true
        assert np.all(slack >= -1e-12)


def test_amplitude_bound_rejects_singular_expansion():
    with pytest.raises(ValueError):
        amplitude_surrogate_bound(0.0, GainCoefficients(1.0, 1.0, 1.0), 1.0, 0.1)
    # Without the sqrt term the origin is a fine expansion point.
    amplitude_surrogate_bound(0.0, GainCoefficients(1.0, 0.0, 1.0), 1.0, 0.1)


def test_power_bound_tight_constant_and_dominating():
    l3, noise = 2.5, 0.3
    bound = power_surrogate_bound(0.4, l3, noise)
    assert bound(0.4) == pytest.approx(math.log2(l3 * 0.4 + noise), rel=1e-12)
    flat = power_surrogate_bound(0.4, 0.0, noise)
    assert flat.slope == 0.0 and flat(0.9) == pytest.approx(math.log2(noise))
    rng = np.random.default_rng(4)
    rhos = rng.uniform(0.0, 1.0, size=100)
    slack = np.array([bound(r) for r in rhos]) - np.log2(l3 * rhos + noise)
    assert np.all(slack >= -1e-12)


# ---------------------------------------------------------------------------
# Amplitude block vs grid oracle.
# ---------------------------------------------------------------------------


def test_optimize_amplitudes_degenerate_pair_returns_midpoint():
    channels = _pair_channels(1.0 + 0j, np.zeros(3), 0.5 + 0j, np.zeros(3), np.ones(3))
    theta = np.zeros((2, 3))
    beta = optimize_amplitudes(channels, theta, ((0, 1),), np.array([1, 0]),
                               np.array([0.5, 0.5]), np.array([0.2, 0.8]),
                               1.0, 0.1, SolverOptions())
    np.testing.assert_allclose(beta, [0.5, 0.5])


def test_optimize_amplitudes_matches_grid_oracle():
    rng = np.random.default_rng(7)
    opts = SolverOptions()
    for _ in range(10):
        channels, theta = _aligned_pair(rng, m=4)
        casc = all_cascades(channels, theta)
        rho = np.array([0.3, 0.7])
        pi = np.array([1, 0])
        power, noise = 1.0, 0.5

        beta = optimize_amplitudes(channels, theta, ((0, 1),), pi, rho,
                                   np.array([0.5, 0.5]), power, noise, opts)
        achieved = oracles.pair_min(
            oracles.gain2_from_split(channels.h_direct[0], casc[0], beta[0]),
            oracles.gain2_from_split(channels.h_direct[1], casc[1], beta[1]),
            rho[0], rho[1], pi[0], pi[1], power, noise,
        )
        _, best = oracles.grid_best_beta(
            channels.h_direct[0], casc[0], channels.h_direct[1], casc[1],
            rho[0], rho[1], pi[0], pi[1], power, noise, step=1e-3,
        )
        assert achieved >= best - 1e-3 * max(best, 1e-12)
        assert beta[0] + beta[1] == pytest.approx(1.0)


def test_optimize_amplitudes_fixed_point():
    rng = np.random.default_rng(11)
    opts = SolverOptions()
    channels, theta = _aligned_pair(rng)
    casc = all_cascades(channels, theta)
    rho = np.array([0.4, 0.6])
    pi = np.array([1, 0])
    beta1 = optimize_amplitudes(channels, theta, ((0, 1),), pi, rho,
                                np.array([0.5, 0.5]), 1.0, 0.2, opts)
    beta2 = optimize_amplitudes(channels, theta, ((0, 1),), pi, rho, beta1, 1.0, 0.2, opts)

    def value(beta):
        return oracles.pair_min(
            oracles.gain2_from_split(channels.h_direct[0], casc[0], beta[0]),
            oracles.gain2_from_split(channels.h_direct[1], casc[1], beta[1]),
            rho[0], rho[1], pi[0], pi[1], 1.0, 0.2,
        )

    assert value(beta2) >= value(beta1) - 1e-12
    assert abs(value(beta2) - value(beta1)) <= opts.sca_tol * max(1.0, value(beta1)) + 1e-9


def test_optimize_amplitudes_exact_mode_handles_unaligned_phases():
    rng = np.random.default_rng(13)
    channels, _ = _aligned_pair(rng)
    theta = rng.uniform(0, 2 * np.pi, size=(2, 4))
    casc = all_cascades(channels, theta)
    rho = np.array([0.5, 0.5])
    pi = np.array([1, 0])
    beta = optimize_amplitudes(channels, theta, ((0, 1),), pi, rho,
                               np.array([0.5, 0.5]), 1.0, 0.2, SolverOptions(), exact=True)
    achieved = oracles.pair_min(
        oracles.gain2_from_split(channels.h_direct[0], casc[0], beta[0]),
        oracles.gain2_from_split(channels.h_direct[1], casc[1], beta[1]),
        rho[0], rho[1], pi[0], pi[1], 1.0, 0.2,
    )
    _, best = oracles.grid_best_beta(
        channels.h_direct[0], casc[0], channels.h_direct[1], casc[1],
        rho[0], rho[1], pi[0], pi[1], 1.0, 0.2, step=1e-3,
    )
    assert achieved >= best - 1e-3 * max(best, 1e-12)


# ---------------------------------------------------------------------------
# Power block vs bisection / grid oracles.
# ---------------------------------------------------------------------------


def _g2_channels_pair(snr_strong, snr_weak, power, noise):
    """Gains chosen so |h|^2 P / n equals the requested SNR scales."""
    return np.array([snr_strong * noise / power, snr_weak * noise / power])


def test_optimize_powers_equalizes_100_vs_10():
    power, noise = 1.0, 1.0
    g2 = _g2_channels_pair(100.0, 10.0, power, noise)
    pi = np.array([1, 0])
    rho = optimize_powers(g2, ((0, 1),), pi, np.array([0.5, 0.5]), power, noise, SolverOptions())
    oracle_rho = oracles.bisect_equal_rate(100.0, 10.0)
    assert rho[0] == pytest.approx(oracle_rho, abs=1e-4)
    assert rho[0] == pytest.approx(0.059, abs=1e-3)
    assert rho[1] == pytest.approx(0.941, abs=1e-3)
    rates = (
        oracles.unit_rate(g2[0], rho[0], rho[1], pi[1], power, noise),
        oracles.unit_rate(g2[1], rho[1], rho[0], pi[0], power, noise),
    )
    assert rates[0] == pytest.approx(rates[1], rel=1e-4)


def test_optimize_powers_identical_gains_favor_weak_user():
    power, noise = 1.0, 1.0
    g2 = _g2_channels_pair(50.0, 50.0, power, noise)
    pi = np.array([1, 0])
    rho = optimize_powers(g2, ((0, 1),), pi, np.array([0.5, 0.5]), power, noise, SolverOptions())
    # The interference-free user needs less power.
    assert rho[0] < 0.5 < rho[1]
    _, best = oracles.grid_best_rho(g2[0], g2[1], pi[0], pi[1], power, noise, step=1e-3)
    achieved = oracles.pair_min(g2[0], g2[1], rho[0], rho[1], pi[0], pi[1], power, noise)
    assert achieved >= best - 1e-3 * max(best, 1e-12)


def test_optimize_powers_zero_gain_boundary():
    power, noise = 1.0, 1.0
    g2 = np.array([4.0, 0.0])
    rho = optimize_powers(g2, ((0, 1),), np.array([1, 0]), np.array([0.5, 0.5]),
                          power, noise, SolverOptions())
    np.testing.assert_allclose(rho, [1.0, 0.0])
    g2 = np.array([0.0, 4.0])
    rho = optimize_powers(g2, ((0, 1),), np.array([1, 0]), np.array([0.5, 0.5]),
                          power, noise, SolverOptions())
    np.testing.assert_allclose(rho, [0.0, 1.0])


def test_optimize_powers_matches_grid_on_random_instances():
    rng = np.random.default_rng(19)
    opts = SolverOptions()
    for _ in range(10):
        snr = rng.uniform(0.5, 300.0, size=2)
        g2 = _g2_channels_pair(max(snr), min(snr), 1.0, 1.0)
        pi = np.array([1, 0])
        rho = optimize_powers(g2, ((0, 1),), pi, np.array([0.5, 0.5]), 1.0, 1.0, opts)
        achieved = oracles.pair_min(g2[0], g2[1], rho[0], rho[1], pi[0], pi[1], 1.0, 1.0)
        _, best = oracles.grid_best_rho(g2[0], g2[1], pi[0], pi[1], 1.0, 1.0, step=1e-3)
        assert achieved >= best - 1e-3 * max(best, 1e-12)


def test_equalize_pair_power_closed_form_vs_bisection():
    rng = np.random.default_rng(23)
    for _ in range(50):
        x, y = sorted(rng.uniform(0.01, 1000.0, size=2), reverse=True)
        assert equalize_pair_power(x, y) == pytest.approx(oracles.bisect_equal_rate(x, y), abs=1e-9)


# ---------------------------------------------------------------------------
# Slot shares.
# ---------------------------------------------------------------------------


def test_optimize_time_examples():
    tau, s = optimize_time([1.0, 1.0])
    np.testing.assert_allclose(tau, [0.5, 0.5])
    assert s == pytest.approx(0.5)

    tau, s = optimize_time([1.0, 3.0])
    np.testing.assert_allclose(tau, [0.75, 0.25])
    assert s == pytest.approx(0.75)

    tau, s = optimize_time([2.5])
    np.testing.assert_allclose(tau, [1.0])
    assert s == pytest.approx(2.5)

    tau, s = optimize_time([1.0, 0.0, 2.0])
    np.testing.assert_allclose(tau, [1 / 3] * 3)
    assert s == 0.0

    with pytest.raises(ValueError):
        optimize_time([-1.0, 1.0])


def test_optimize_time_matches_lp_oracle():
    rng = np.random.default_rng(29)
    for _ in range(20):
        r = rng.uniform(0.05, 5.0, size=int(rng.integers(1, 6)))
        tau, s = optimize_time(r)
        _, s_lp = oracles.lp_time_shares(r)
        assert s == pytest.approx(s_lp, abs=1e-9)
        assert float(np.sum(tau)) == pytest.approx(1.0, abs=1e-12)
        # All constraints are tight at the optimum.
        np.testing.assert_allclose(tau * r, s, atol=1e-12)


# ---------------------------------------------------------------------------
# Full inner solver.
# ---------------------------------------------------------------------------


def _pairs_for(cfg):
    k = cfg.users_per_side
    return tuple((t, k + t) for t in range(k))


def test_inner_solve_trace_monotone_on_random_scenarios():
    rng = np.random.default_rng(31)
    for i in range(20):
        k = int(rng.integers(1, 4))
        cfg = small_config(users_per_side=k, elements_y=3, elements_z=3, seed=1000 + i)
        users, channels = make_scenario(cfg)
        sol = inner_solve(cfg, channels, _pairs_for(cfg))
        assert_nondecreasing(sol.inner_trace)
        assert_nondecreasing([v for _, v in sol.block_trace])
        assert sol.converged
        assert sol.min_rate == pytest.approx(float(np.min(sol.rates)))


def test_inner_solve_single_pair_matches_joint_grid():
    for i in range(5):
        cfg = small_config(users_per_side=1, elements_y=4, elements_z=4, seed=2000 + i)
        users, channels = make_scenario(cfg)
        sol = inner_solve(cfg, channels, ((0, 1),))
        theta = np.stack([
            optimal_phase(channels.h_direct[k], channels.h_ris_user[k], channels.h_bs_ris)
            for k in range(2)
        ])
        casc = all_cascades(channels, theta)
        best = oracles.joint_grid_best(
            channels.h_direct[0], casc[0], channels.h_direct[1], casc[1],
            cfg.tx_power_w, cfg.noise_power_w,
        )
        assert sol.min_rate >= best * (1.0 - 0.01)
        np.testing.assert_allclose(sol.allocation.tau, [1.0])


def test_inner_solve_no_cascade_reduces_to_power_time_problem():
    from starnoma import zero_cascade

    cfg = small_config(users_per_side=2, seed=41)
    users, channels = make_scenario(cfg)
    bare = zero_cascade(channels)
    sol = inner_solve(cfg, bare, _pairs_for(cfg))
    # The split cannot matter; the degenerate rule leaves the midpoint.
    np.testing.assert_allclose(sol.allocation.star.beta, 0.5)
    skipped = inner_solve(cfg, bare, _pairs_for(cfg),
                          fixed_beta=np.full(4, 0.5),
                          fixed_theta=np.zeros((4, cfg.num_elements)))
    # Both paths solve the same power + slot problem, to scalar-search precision.
    assert sol.min_rate == pytest.approx(skipped.min_rate, rel=1e-5)


def test_inner_solve_respects_fixed_variables():
    cfg = small_config(users_per_side=2, seed=43)
    users, channels = make_scenario(cfg)
    tau_fixed = np.array([0.5, 0.5])
    rho_fixed = np.full(4, 0.5)
    sol = inner_solve(cfg, channels, _pairs_for(cfg), fixed_tau=tau_fixed, fixed_rho=rho_fixed)
    np.testing.assert_array_equal(sol.allocation.tau, tau_fixed)
    np.testing.assert_array_equal(sol.allocation.rho, rho_fixed)
    assert_nondecreasing(sol.inner_trace)


def test_inner_solve_iteration_cap_reported():
    cfg = small_config(users_per_side=2, seed=47)
    cfg = replace(cfg, solver=SolverOptions(max_inner_iters=1, inner_tol=1e-300))
    users, channels = make_scenario(cfg)
    sol = inner_solve(cfg, channels, _pairs_for(cfg))
    assert sol.iterations == 1
    assert not sol.converged
