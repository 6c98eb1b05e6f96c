"""Benchmark frameworks behind one solver interface.

The main scheme pairs users for NOMA and shares slots across pairs; the
benchmarks swap out one capability at a time: pure time division, a
reflect-only surface, no surface, and four single-block ablations.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import star_noma
from .channel import ChannelRealization, zero_cascade
from .inner_ao import Solution, inner_solve, optimize_time
from .matching import initial_matching, outer_solve
from .scenario import SystemConfig, UserSet, rng_streams


class Framework(str, Enum):
    HYBRID_NOMA_STAR = "hybrid_noma_star"
    TDMA_STAR = "tdma_star"
    HYBRID_NOMA_REFLECT_ONLY = "hybrid_noma_reflect_only"
    HYBRID_NOMA_NO_RIS = "hybrid_noma_no_ris"
    EQUAL_TIME = "equal_time"
    EQUAL_POWER = "equal_power"
    DISTANCE_PAIRING = "distance_pairing"
    RANDOM_PHASE = "random_phase"


FIG3_FRAMEWORKS = (
    Framework.HYBRID_NOMA_STAR,
    Framework.TDMA_STAR,
    Framework.HYBRID_NOMA_REFLECT_ONLY,
    Framework.HYBRID_NOMA_NO_RIS,
)

ABLATIONS = (
    Framework.EQUAL_TIME,
    Framework.EQUAL_POWER,
    Framework.DISTANCE_PAIRING,
    Framework.RANDOM_PHASE,
)


def _with_framework(solution: Solution, framework: Framework) -> Solution:
    solution.meta["framework"] = framework.value
    return solution


def solve_hybrid_noma_star(config: SystemConfig, channels: ChannelRealization,
                           users: UserSet | None = None) -> Solution:
    """The full two-layer scheme: swap pairing outside, alternating blocks inside."""
    sol = outer_solve(config, channels, users)
    return _with_framework(sol, Framework.HYBRID_NOMA_STAR)


def solve_tdma_star(config: SystemConfig, channels: ChannelRealization,
                    users: UserSet | None = None) -> Solution:
    """Every user alone in its own slot with the full surface split toward it.

    No pairing and no intra-slot interference; phases align per served user,
    the amplitude split degenerates to 1 for the active side, and the slot
    shares follow the closed-form max-min allocation over all 2K users.
    Slots transmit at full power unless the split-power option is set.
    """
    n = channels.num_users
    slot_power = config.tx_power_w / n if config.solver.tdma_split_power else config.tx_power_w
    noise = config.noise_power_w

    unit = np.zeros(n)
    for k in range(n):
        theta = star_noma.optimal_phase(channels.h_direct[k], channels.h_ris_user[k], channels.h_bs_ris)
        h = star_noma.combined_gain(channels.h_direct[k], channels.h_ris_user[k],
                                    channels.h_bs_ris, 1.0, theta)
        unit[k] = np.log2(1.0 + abs(h) ** 2 * slot_power / noise)

    tau, min_rate = optimize_time(unit)
    rates = tau * unit
    sol = Solution(
        pairs=(),
        allocation=None,
        rates=rates,
        min_rate=min_rate,
        inner_trace=[min_rate],
        block_trace=[("time", min_rate)],
        iterations=1,
        converged=True,
        meta={"tau_user": tau},
    )
    return _with_framework(sol, Framework.TDMA_STAR)


def solve_reflect_only(config: SystemConfig, channels: ChannelRealization,
                       users: UserSet) -> Solution:
    """Reflect-only surface: the transmitted side keeps just its direct link.

    The surface path of every transmitted user is removed and the amplitude
    split is pinned (0 toward the transmitted user, 1 toward the reflected
    one); pairing, order, power and slot blocks run unchanged.
    """
    modified = zero_cascade(channels, user_indices=users.tu_indices)
    beta = np.ones(channels.num_users)
    beta[users.tu_indices] = 0.0
    sol = outer_solve(config, modified, users, fixed_beta=beta)
    return _with_framework(sol, Framework.HYBRID_NOMA_REFLECT_ONLY)


def solve_no_ris(config: SystemConfig, channels: ChannelRealization,
                 users: UserSet | None = None) -> Solution:
    """No surface at all: the main solver on cascade-zeroed channels.

    Identical by construction to running the full scheme on the modified
    channels; the phase and amplitude blocks become no-ops there.
    """
    sol = outer_solve(config, zero_cascade(channels), users)
    return _with_framework(sol, Framework.HYBRID_NOMA_NO_RIS)


def solve_ablation(config: SystemConfig, channels: ChannelRealization, users: UserSet,
                   fix: str) -> Solution:
    """One optimization block disabled, everything else as in the full scheme.

    equal_time pins uniform slot shares; equal_power pins a 0.5 power split;
    distance_pairing pins the far-with-near pairing and skips the swap search;
    random_phase draws seeded uniform phases and searches the amplitude on the
    exact gains, since the decomposition cross term can go negative without
    alignment.
    """
    k = config.users_per_side
    if fix == Framework.EQUAL_TIME.value:
        sol = outer_solve(config, channels, users, fixed_tau=np.full(k, 1.0 / k))
        return _with_framework(sol, Framework.EQUAL_TIME)
    if fix == Framework.EQUAL_POWER.value:
        sol = outer_solve(config, channels, users, fixed_rho=np.full(channels.num_users, 0.5))
        return _with_framework(sol, Framework.EQUAL_POWER)
    if fix == Framework.DISTANCE_PAIRING.value:
        matching = initial_matching(config, users, policy="distance")
        sol = inner_solve(config, channels, matching.pair_list())
        sol.matching = matching.ru_of_tu
        sol.outer_trace = [sol.min_rate]
        return _with_framework(sol, Framework.DISTANCE_PAIRING)
    if fix == Framework.RANDOM_PHASE.value:
        rng = rng_streams(config.rng_seed).phase
        theta = rng.uniform(0.0, 2.0 * np.pi, size=(channels.num_users, channels.num_elements))
        sol = outer_solve(config, channels, users, fixed_theta=theta, exact_amplitude=True)
        return _with_framework(sol, Framework.RANDOM_PHASE)
    raise ValueError(f"unknown ablation flag {fix!r}")


def solve(config: SystemConfig, channels: ChannelRealization, users: UserSet,
          framework: Framework | str) -> Solution:
    """Uniform entry point used by the experiment runner."""
    framework = Framework(framework)
    if framework == Framework.HYBRID_NOMA_STAR:
        return solve_hybrid_noma_star(config, channels, users)
    if framework == Framework.TDMA_STAR:
        return solve_tdma_star(config, channels, users)
    if framework == Framework.HYBRID_NOMA_REFLECT_ONLY:
        return solve_reflect_only(config, channels, users)
    if framework == Framework.HYBRID_NOMA_NO_RIS:
        return solve_no_ris(config, channels, users)
    return solve_ablation(config, channels, users, framework.value)
