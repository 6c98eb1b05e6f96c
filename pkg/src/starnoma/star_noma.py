"""Physical-layer evaluation of the surface-assisted hybrid NOMA downlink.

Combined channel gains, phase alignment, decoding order, SINR and rates for
a given allocation. `evaluate` is the single source of truth every optimizer
step is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Pair-sum and simplex constraints are enforced to this absolute tolerance.
FEASIBILITY_TOL = 1e-9


@dataclass
class StarProfile:
    """Per-user surface coefficients: amplitude-squared split and phase shifts."""

    beta: np.ndarray   # (2K,) in [0, 1]; paired users sum to 1
    theta: np.ndarray  # (2K, M) in [0, 2*pi)

    def copy(self) -> "StarProfile":
        return StarProfile(beta=self.beta.copy(), theta=self.theta.copy())


@dataclass
class AllocationState:
    """Full decision state for one pairing: surface profile, powers, slots, orders."""

    star: StarProfile
    rho: np.ndarray  # (2K,) power coefficients; paired users sum to 1
    tau: np.ndarray  # (n_pairs,) slot shares summing to 1
    pi: np.ndarray   # (2K,) decoding order flags; exactly one 1 per pair

    def copy(self) -> "AllocationState":
        return AllocationState(
            star=self.star.copy(), rho=self.rho.copy(), tau=self.tau.copy(), pi=self.pi.copy()
        )


@dataclass
class RateReport:
    """Per-user SINRs and rates plus the min-rate objective."""

    sinr: np.ndarray  # linear
    rate: np.ndarray  # bits/s/Hz, slot-share weighted
    min_rate: float


def cascade_gain(h_ris_user: np.ndarray, h_bs_ris: np.ndarray, theta: np.ndarray) -> complex:
    """Surface path sum_m conj(h_ris_user[m]) * e^{j theta_m} * h_bs_ris[m] at unit amplitude."""
    if h_ris_user.shape != h_bs_ris.shape or h_ris_user.shape != np.shape(theta):
        raise ValueError("cascade inputs must share the element dimension")
    return complex(np.sum(np.conj(h_ris_user) * np.exp(1j * np.asarray(theta)) * h_bs_ris))


def combined_gain(h_direct: complex, h_ris_user: np.ndarray, h_bs_ris: np.ndarray,
                  beta: float, theta: np.ndarray) -> complex:
    """Equivalent combined channel: direct link plus amplitude-split surface path."""
    if not 0.0 <= beta <= 1.0 + 1e-12:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return complex(h_direct + np.sqrt(beta) * cascade_gain(h_ris_user, h_bs_ris, theta))


def optimal_phase(h_direct: complex, h_ris_user: np.ndarray, h_bs_ris: np.ndarray) -> np.ndarray:
    """Element phases aligning every surface path term with the direct link.

    After alignment the cascade argument equals arg(h_direct), so
    |h| = |h_direct| + sqrt(beta) * sum_m |h_ris_user[m]| * |h_bs_ris[m]|.
    A vanished direct link aligns the cascade to zero argument instead.
    """
    ref = float(np.angle(h_direct)) if h_direct != 0 else 0.0
    theta = ref - np.angle(np.conj(h_ris_user)) - np.angle(h_bs_ris)
    return np.mod(theta, TWO_PI)


def decoding_order(gain_tx: float, gain_rx: float) -> tuple[int, int]:
    """Order flags (pi_tx, pi_rx): the stronger combined gain decodes last.

    Ties go to the transmitted user, a deterministic rule for the
    measure-zero equal-gain event.
    """
    if gain_tx < 0.0 or gain_rx < 0.0:
        raise ValueError("channel gain magnitudes must be nonnegative")
    if gain_tx >= gain_rx:
        return 1, 0
    return 0, 1


def sinr(g2: float, rho_k: float, rho_paired: float, pi_paired: int,
         power: float, noise: float) -> float:
    """Linear SINR: own-signal power over partner interference (if undecoded) plus noise."""
    if noise <= 0.0:
        raise ValueError(f"noise power must be positive, got {noise}")
    return g2 * rho_k * power / (pi_paired * g2 * rho_paired * power + noise)


def rate(tau: float, sinr_value: float) -> float:
    """Slot-share weighted spectral efficiency in bits/s/Hz."""
    if not 0.0 <= tau <= 1.0 + 1e-12:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return tau * np.log2(1.0 + sinr_value)


def all_cascades(channels, theta: np.ndarray) -> np.ndarray:
    """Vectorized cascade_gain for every user; theta has shape (2K, M)."""
    return np.sum(np.conj(channels.h_ris_user) * np.exp(1j * theta) * channels.h_bs_ris[None, :], axis=1)


def validate_allocation(pairs, alloc: AllocationState, num_users: int) -> None:
    """Check pairing and allocation invariants, naming the violated constraint."""
    seen = np.zeros(num_users, dtype=int)
    for a, b in pairs:
        seen[a] += 1
        seen[b] += 1
    if np.any(seen != 1):
        raise ValueError(f"pairing must cover every user exactly once, coverage {seen.tolist()}")
    if len(alloc.tau) != len(pairs):
        raise ValueError(f"tau must have one share per pair, got {len(alloc.tau)} for {len(pairs)} pairs")

    if np.any(alloc.star.beta < -FEASIBILITY_TOL) or np.any(alloc.star.beta > 1.0 + FEASIBILITY_TOL):
        raise ValueError("amplitude split out of range: beta must lie in [0, 1]")
    if np.any(alloc.rho < -FEASIBILITY_TOL) or np.any(alloc.rho > 1.0 + FEASIBILITY_TOL):
        raise ValueError("power coefficient out of range: rho must lie in [0, 1]")
    if np.any(alloc.tau < -FEASIBILITY_TOL):
        raise ValueError("slot share out of range: tau must be nonnegative")
    if abs(float(np.sum(alloc.tau)) - 1.0) > FEASIBILITY_TOL:
        raise ValueError(f"slot shares must sum to 1, got {float(np.sum(alloc.tau))!r}")

    for a, b in pairs:
        beta_sum = float(alloc.star.beta[a] + alloc.star.beta[b])
        if abs(beta_sum - 1.0) > FEASIBILITY_TOL:
            raise ValueError(f"energy split violated for pair ({a}, {b}): beta sum = {beta_sum!r}")
        rho_sum = float(alloc.rho[a] + alloc.rho[b])
        if abs(rho_sum - 1.0) > FEASIBILITY_TOL:
            raise ValueError(f"power split violated for pair ({a}, {b}): rho sum = {rho_sum!r}")
        if sorted((int(alloc.pi[a]), int(alloc.pi[b]))) != [0, 1]:
            raise ValueError(f"decoding order invalid for pair ({a}, {b}): exactly one user must decode last")


def evaluate(channels, pairs, alloc: AllocationState, power: float, noise: float) -> RateReport:
    """Recompute gains, SINRs and rates for an allocation; pure and exact.

    Raises ValueError naming the violated constraint when the allocation is
    infeasible.
    """
    validate_allocation(pairs, alloc, channels.num_users)

    casc = all_cascades(channels, alloc.star.theta)
    h = channels.h_direct + np.sqrt(np.clip(alloc.star.beta, 0.0, 1.0)) * casc
    g2 = np.abs(h) ** 2

    n = channels.num_users
    sinr_values = np.zeros(n)
    rate_values = np.zeros(n)
    for p, (a, b) in enumerate(pairs):
        for k, other in ((a, b), (b, a)):
            sinr_values[k] = sinr(g2[k], float(alloc.rho[k]), float(alloc.rho[other]),
                                  int(alloc.pi[other]), power, noise)
            rate_values[k] = rate(float(alloc.tau[p]), sinr_values[k])

    return RateReport(sinr=sinr_values, rate=rate_values, min_rate=float(np.min(rate_values)))
