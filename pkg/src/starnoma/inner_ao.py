"""Alternating optimization for a fixed pairing.

One cycle updates decoding order, element phases, amplitude splits
(successive convex refinement), power splits (same), and slot shares
(closed form). Every block is guarded by the exact evaluator so the
objective never decreases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import star_noma
from .channel import ChannelRealization
from .scenario import SolverOptions, SystemConfig
from .star_noma import AllocationState, StarProfile

LN2 = math.log(2.0)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Expansion points for the amplitude tangent bound stay off the sqrt
# singularity at zero.
BETA_EXPANSION_MIN = 1e-6

# Gains below this are treated as a dead link when deciding degenerate splits.
_GAIN_FLOOR = 1e-300


@dataclass
class GainCoefficients:
    """Quadratic-in-sqrt(beta) decomposition of a phase-aligned combined gain.

    |h(beta)|^2 = a + b*sqrt(beta) + c*beta for every beta in [0, 1].
    """

    a: float
    b: float
    c: float

    def gain2(self, beta: float) -> float:
        return self.a + self.b * math.sqrt(beta) + self.c * beta


@dataclass
class AffineBound:
    """Tangent line value + slope * (x - anchor); a global upper bound of a concave function."""

    value: float
    slope: float
    anchor: float

    def __call__(self, x: float) -> float:
        return self.value + self.slope * (x - self.anchor)


@dataclass
class Solution:
    """Solver output: pairing, allocation, rates, objective, and traces."""

    pairs: tuple
    allocation: AllocationState | None
    rates: np.ndarray
    min_rate: float
    inner_trace: list
    block_trace: list
    iterations: int
    converged: bool
    matching: tuple | None = None
    outer_trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def gain_coefficients(h_direct, h_ris_user, h_bs_ris, theta) -> GainCoefficients:
    """Decompose a combined gain into amplitude-split coefficients.

    Assumes the phases already align the cascade with the direct link;
    then the cross term is 2|h_direct||cascade| and the identity holds
    exactly for all beta.
    """
    casc = abs(star_noma.cascade_gain(h_ris_user, h_bs_ris, theta))
    direct = abs(h_direct)
    return GainCoefficients(a=direct**2, b=2.0 * direct * casc, c=casc**2)


def amplitude_surrogate_bound(beta_eps: float, coeffs: GainCoefficients,
                              l2: float, noise: float) -> AffineBound:
    """Tangent upper bound of log2(l2 * |h(beta)|^2 + noise) at beta_eps.

    The bounded function is concave in beta, so the tangent dominates it on
    (0, 1] and is tight at the expansion point. beta_eps = 0 is rejected when
    the sqrt term is present because the derivative diverges there.
    """
    if beta_eps <= 0.0 and coeffs.b > 0.0:
        raise ValueError("amplitude expansion point 0 is singular; expand at a positive beta")
    g_eps = coeffs.gain2(beta_eps)
    value = math.log2(l2 * g_eps + noise)
    if l2 == 0.0:
        return AffineBound(value=value, slope=0.0, anchor=beta_eps)
    half_b = coeffs.b / (2.0 * math.sqrt(beta_eps)) if coeffs.b > 0.0 else 0.0
    slope = l2 * (half_b + coeffs.c) / (LN2 * (noise + l2 * g_eps))
    return AffineBound(value=value, slope=slope, anchor=beta_eps)


def power_surrogate_bound(rho_eps: float, l3: float, noise: float) -> AffineBound:
    """Tangent upper bound of log2(l3 * rho + noise) at the partner split rho_eps."""
    value = math.log2(l3 * rho_eps + noise)
    slope = l3 / (LN2 * (l3 * rho_eps + noise))
    return AffineBound(value=value, slope=slope, anchor=rho_eps)


def golden_section_max(f, lo: float, hi: float, tol: float, max_iter: int = 200):
    """Maximize a unimodal function on [lo, hi]; returns (argmax, value)."""
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def _grid_golden_max(f, lo: float, hi: float, tol: float, coarse: int = 65):
    """Coarse grid scan plus golden refinement; robust to mild multimodality."""
    xs = np.linspace(lo, hi, coarse)
    vals = [f(float(x)) for x in xs]
    i = int(np.argmax(vals))
    left = xs[max(i - 1, 0)]
    right = xs[min(i + 1, coarse - 1)]
    x_ref, v_ref = golden_section_max(f, float(left), float(right), tol)
    if v_ref >= vals[i]:
        return x_ref, v_ref
    return float(xs[i]), vals[i]


def equalize_pair_power(snr_strong: float, snr_weak: float) -> float:
    """Power split to the interference-free user that equalizes the pair rates.

    Arguments are the full-power SNR scales |h|^2 P / n of the user decoding
    last (strong) and first (weak). Solves
    x*rho = y*(1-rho) / (y*rho + 1) in closed form. Dead links fall back to
    the boundary that serves the surviving user.
    """
    x, y = snr_strong, snr_weak
    if x <= _GAIN_FLOOR and y <= _GAIN_FLOOR:
        return 0.5
    if y <= _GAIN_FLOOR:
        return 1.0
    if x <= _GAIN_FLOOR:
        return 0.0
    s = x + y
    rho = (-s + math.sqrt(s * s + 4.0 * x * y * y)) / (2.0 * x * y)
    return min(max(rho, 0.0), 1.0)


def _unit_rate(g2: float, rho_own: float, rho_other: float, pi_other: int,
               power: float, noise: float) -> float:
    return math.log2(1.0 + g2 * rho_own * power / (pi_other * g2 * rho_other * power + noise))


def _pair_unit_min(g2_a, g2_b, rho_a, rho_b, pi_a, pi_b, power, noise) -> float:
    return min(
        _unit_rate(g2_a, rho_a, rho_b, pi_b, power, noise),
        _unit_rate(g2_b, rho_b, rho_a, pi_a, power, noise),
    )


def _gain2(h_direct: complex, cascade: complex, beta: float) -> float:
    return abs(h_direct + math.sqrt(beta) * cascade) ** 2


def optimize_amplitudes(channels: ChannelRealization, theta: np.ndarray, pairs,
                        pi: np.ndarray, rho: np.ndarray, beta: np.ndarray,
                        power: float, noise: float, options: SolverOptions,
                        exact: bool = False) -> np.ndarray:
    """Per-pair amplitude splits; the exact pair min rate never decreases.

    Default mode iterates the tangent-bound surrogate (concave in beta,
    solved by golden section) until its improvement drops below sca_tol.
    `exact=True` searches the exact objective directly, which covers
    unaligned phases where the cross term of the gain decomposition can
    be negative.
    """
    casc = star_noma.all_cascades(channels, theta)
    hd = channels.h_direct
    beta_new = beta.astype(float).copy()

    for a, b in pairs:
        if abs(casc[a]) == 0.0 and abs(casc[b]) == 0.0:
            # Objective is flat in the split; deterministic midpoint.
            beta_new[a] = 0.5
            beta_new[b] = 0.5
            continue

        rho_a, rho_b = float(rho[a]), float(rho[b])
        pi_a, pi_b = int(pi[a]), int(pi[b])

        def exact_value(x, a=a, b=b, rho_a=rho_a, rho_b=rho_b, pi_a=pi_a, pi_b=pi_b):
            return _pair_unit_min(
                _gain2(hd[a], casc[a], x), _gain2(hd[b], casc[b], 1.0 - x),
                rho_a, rho_b, pi_a, pi_b, power, noise,
            )

        x_cur = float(beta_new[a])
        v_cur = exact_value(x_cur)

        if exact:
            x_best, v_best = _grid_golden_max(exact_value, 0.0, 1.0, options.scalar_tol)
            if v_best > v_cur:
                beta_new[a] = x_best
                beta_new[b] = 1.0 - x_best
            continue

        coeffs_a = gain_coefficients(hd[a], channels.h_ris_user[a], channels.h_bs_ris, theta[a])
        coeffs_b = gain_coefficients(hd[b], channels.h_ris_user[b], channels.h_bs_ris, theta[b])
        l1_a, l2_a = power * rho_a, pi_b * power * rho_b
        l1_b, l2_b = power * rho_b, pi_a * power * rho_a

        for _ in range(options.max_sca_iters):
            eps_a = min(max(x_cur, BETA_EXPANSION_MIN), 1.0)
            eps_b = min(max(1.0 - x_cur, BETA_EXPANSION_MIN), 1.0)
            bound_a = amplitude_surrogate_bound(eps_a, coeffs_a, l2_a, noise)
            bound_b = amplitude_surrogate_bound(eps_b, coeffs_b, l2_b, noise)

            def surrogate(x, bound_a=bound_a, bound_b=bound_b):
                f_a = math.log2((l1_a + l2_a) * coeffs_a.gain2(x) + noise) - bound_a(x)
                f_b = math.log2((l1_b + l2_b) * coeffs_b.gain2(1.0 - x) + noise) - bound_b(1.0 - x)
                return min(f_a, f_b)

            x_new, _ = golden_section_max(surrogate, 0.0, 1.0, options.scalar_tol)
            v_prev = v_cur
            v_new = exact_value(x_new)
            if v_new > v_cur:
                x_cur, v_cur = x_new, v_new
            # The surrogate is tight at the expansion point, so the exact
            # ascent it produced is the step improvement.
            if v_cur - v_prev < options.sca_tol * max(1.0, abs(v_prev)):
                break

        # The tangent steps shrink when interference dominates, so finish
        # with one search on the exact objective: one rate rises and the
        # other falls in the split, making their min unimodal.
        x_ref, v_ref = golden_section_max(exact_value, 0.0, 1.0, options.scalar_tol)
        if v_ref > v_cur:
            x_cur = x_ref

        beta_new[a] = x_cur
        beta_new[b] = 1.0 - x_cur

    return beta_new


def optimize_powers(g2: np.ndarray, pairs, pi: np.ndarray, rho: np.ndarray,
                    power: float, noise: float, options: SolverOptions) -> np.ndarray:
    """Per-pair power splits via the tangent-bound surrogate; exact-guarded.

    Reaches the rate-equalizing split whenever it is interior; dead links
    push all power to the surviving user.
    """
    rho_new = rho.astype(float).copy()

    for a, b in pairs:
        g2_a, g2_b = float(g2[a]), float(g2[b])
        if g2_a <= _GAIN_FLOOR and g2_b <= _GAIN_FLOOR:
            rho_new[a] = 0.5
            rho_new[b] = 0.5
            continue
        if g2_a <= _GAIN_FLOOR or g2_b <= _GAIN_FLOOR:
            # The dead user's rate is 0 for any split; serve the other fully.
            rho_new[a] = 1.0 if g2_b <= _GAIN_FLOOR else 0.0
            rho_new[b] = 1.0 - rho_new[a]
            continue

        pi_a, pi_b = int(pi[a]), int(pi[b])
        l3_a, l4_a = pi_b * power * g2_a, power * g2_a
        l3_b, l4_b = pi_a * power * g2_b, power * g2_b

        def exact_value(y, g2_a=g2_a, g2_b=g2_b, pi_a=pi_a, pi_b=pi_b):
            return _pair_unit_min(g2_a, g2_b, y, 1.0 - y, pi_a, pi_b, power, noise)

        y_cur = float(rho_new[a])
        v_cur = exact_value(y_cur)

        for _ in range(options.max_sca_iters):
            bound_a = power_surrogate_bound(1.0 - y_cur, l3_a, noise)
            bound_b = power_surrogate_bound(y_cur, l3_b, noise)

            def surrogate(y, bound_a=bound_a, bound_b=bound_b):
                f_a = math.log2(l4_a * y + l3_a * (1.0 - y) + noise) - bound_a(1.0 - y)
                f_b = math.log2(l4_b * (1.0 - y) + l3_b * y + noise) - bound_b(y)
                return min(f_a, f_b)

            y_new, _ = golden_section_max(surrogate, 0.0, 1.0, options.scalar_tol)
            v_prev = v_cur
            v_new = exact_value(y_new)
            if v_new > v_cur:
                y_cur, v_cur = y_new, v_new
            if v_cur - v_prev < options.sca_tol * max(1.0, abs(v_prev)):
                break

        # Same exact-objective finish as the amplitude block.
        y_ref, v_ref = golden_section_max(exact_value, 0.0, 1.0, options.scalar_tol)
        if v_ref > v_cur:
            y_cur = y_ref

        rho_new[a] = y_cur
        rho_new[b] = 1.0 - y_cur

    return rho_new


def optimize_time(unit_pair_rates) -> tuple[np.ndarray, float]:
    """Closed-form max-min slot shares given per-pair unit rates.

    With all rates positive the optimum makes every constraint tight:
    tau_p proportional to 1/r_p and objective 1/sum(1/r). Any zero rate
    forces a zero objective; shares fall back to uniform.
    """
    r = np.asarray(unit_pair_rates, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("unit rates must be nonnegative")
    n = r.size
    if np.any(r == 0.0):
        return np.full(n, 1.0 / n), 0.0
    inv = 1.0 / r
    total = float(np.sum(inv))
    return inv / total, 1.0 / total


def _pair_value_with_optimal_power(hd_a, casc_a, hd_b, casc_b, x, power, noise):
    """Best equalized unit rate of a pair at amplitude split x.

    Applies the gain-based decoding order at x and the closed-form
    equalizing power split, i.e. the joint (order, power) response to the
    amplitude choice.
    """
    g2_a = _gain2(hd_a, casc_a, x)
    g2_b = _gain2(hd_b, casc_b, 1.0 - x)
    pi_a, pi_b = star_noma.decoding_order(math.sqrt(g2_a), math.sqrt(g2_b))
    if pi_a == 1:
        snr_s, snr_w = g2_a * power / noise, g2_b * power / noise
    else:
        snr_s, snr_w = g2_b * power / noise, g2_a * power / noise
    rho_s = equalize_pair_power(snr_s, snr_w)
    rho_a = rho_s if pi_a == 1 else 1.0 - rho_s
    value = _pair_unit_min(g2_a, g2_b, rho_a, 1.0 - rho_a, pi_a, pi_b, power, noise)
    return value, rho_a, pi_a, pi_b


def _refine_pairs(channels, theta, pairs, pi, rho, beta, power, noise, options):
    """Joint per-pair (amplitude, power, order) line search.

    Alternating the amplitude and power blocks alone stops at the first
    split where the two rates are equal, for any such point is a fixed
    point of both one-variable updates. Searching the amplitude with the
    power split re-equalized per candidate walks along that equal-rate
    locus to its best point. Adopted only on strict improvement.
    """
    casc = star_noma.all_cascades(channels, theta)
    hd = channels.h_direct
    improved = False

    for a, b in pairs:
        v_cur = _pair_unit_min(
            _gain2(hd[a], casc[a], float(beta[a])), _gain2(hd[b], casc[b], float(beta[b])),
            float(rho[a]), float(rho[b]), int(pi[a]), int(pi[b]), power, noise,
        )

        def value(x, a=a, b=b):
            return _pair_value_with_optimal_power(hd[a], casc[a], hd[b], casc[b], x, power, noise)[0]

        x_best, v_best = _grid_golden_max(value, 0.0, 1.0, options.scalar_tol)
        if v_best > v_cur + 1e-15:
            _, rho_a, pi_a, pi_b = _pair_value_with_optimal_power(
                hd[a], casc[a], hd[b], casc[b], x_best, power, noise)
            beta[a], beta[b] = x_best, 1.0 - x_best
            rho[a], rho[b] = rho_a, 1.0 - rho_a
            pi[a], pi[b] = pi_a, pi_b
            improved = True

    return improved


def inner_solve(config: SystemConfig, channels: ChannelRealization, pairs,
                options: SolverOptions | None = None, *,
                fixed_beta: np.ndarray | None = None,
                fixed_rho: np.ndarray | None = None,
                fixed_tau: np.ndarray | None = None,
                fixed_theta: np.ndarray | None = None,
                exact_amplitude: bool = False) -> Solution:
    """Alternating optimization for a fixed pairing.

    Cycles decoding order, phases, amplitudes, powers, a joint per-pair
    refinement, and slot shares until the relative objective improvement
    falls below inner_tol or the iteration cap fires. The `fixed_*`
    arguments pin a variable and skip its block (used by the benchmark
    schemes); `exact_amplitude` switches the amplitude block to a direct
    search on the exact gains.

    Returns a Solution whose per-iteration trace is non-decreasing.
    """
    opts = options if options is not None else config.solver
    power = config.tx_power_w
    noise = config.noise_power_w
    pairs = tuple((int(a), int(b)) for a, b in pairs)
    n_pairs = len(pairs)
    n_users = channels.num_users

    beta = np.zeros(n_users)
    rho = np.zeros(n_users)
    for a, b in pairs:
        beta[a], beta[b] = opts.initial_beta, 1.0 - opts.initial_beta
        rho[a], rho[b] = opts.initial_rho, 1.0 - opts.initial_rho
    if fixed_beta is not None:
        beta = np.asarray(fixed_beta, dtype=float).copy()
    if fixed_rho is not None:
        rho = np.asarray(fixed_rho, dtype=float).copy()

    if fixed_tau is not None:
        tau = np.asarray(fixed_tau, dtype=float).copy()
    elif opts.initial_tau is not None:
        tau = np.full(n_pairs, float(opts.initial_tau))
    else:
        tau = np.full(n_pairs, 1.0 / n_pairs)

    if fixed_theta is not None:
        theta = np.asarray(fixed_theta, dtype=float).copy()
    else:
        theta = np.zeros((n_users, channels.num_elements))

    beta_free = fixed_beta is None
    rho_free = fixed_rho is None
    refine_on = beta_free and rho_free

    pi = np.zeros(n_users, dtype=int)
    casc = star_noma.all_cascades(channels, theta)
    g = np.abs(channels.h_direct + np.sqrt(beta) * casc)
    for a, b in pairs:
        pi[a], pi[b] = star_noma.decoding_order(g[a], g[b])

    def objective() -> float:
        alloc = AllocationState(star=StarProfile(beta=beta, theta=theta), rho=rho, tau=tau, pi=pi)
        return star_noma.evaluate(channels, pairs, alloc, power, noise).min_rate

    block_trace = [("init", objective())]
    inner_trace = [block_trace[0][1]]
    converged = False
    iterations = 0

    for _ in range(opts.max_inner_iters):
        iterations += 1
        s_prev = inner_trace[-1]

        # Decoding order from the current combined gains. A flip leaves the
        # incoming power split stale, so the flipped pair is re-equalized;
        # the gain-consistent order with its equalized split dominates any
        # split under the reversed order, keeping the block monotone.
        casc = star_noma.all_cascades(channels, theta)
        g = np.abs(channels.h_direct + np.sqrt(beta) * casc)
        for a, b in pairs:
            pi_a, pi_b = star_noma.decoding_order(g[a], g[b])
            if (pi_a, pi_b) != (int(pi[a]), int(pi[b])):
                pi[a], pi[b] = pi_a, pi_b
                if rho_free:
                    s, w = (a, b) if pi_a == 1 else (b, a)
                    rho_s = equalize_pair_power(g[s] ** 2 * power / noise, g[w] ** 2 * power / noise)
                    rho[s], rho[w] = rho_s, 1.0 - rho_s
        block_trace.append(("order", objective()))

        if fixed_theta is None:
            for k in range(n_users):
                theta[k] = star_noma.optimal_phase(
                    channels.h_direct[k], channels.h_ris_user[k], channels.h_bs_ris)
            block_trace.append(("phase", objective()))

        if beta_free:
            beta = optimize_amplitudes(channels, theta, pairs, pi, rho, beta,
                                       power, noise, opts, exact=exact_amplitude)
            block_trace.append(("amplitude", objective()))

        if rho_free:
            casc = star_noma.all_cascades(channels, theta)
            g2 = np.abs(channels.h_direct + np.sqrt(beta) * casc) ** 2
            rho = optimize_powers(g2, pairs, pi, rho, power, noise, opts)
            block_trace.append(("power", objective()))

        if refine_on:
            _refine_pairs(channels, theta, pairs, pi, rho, beta, power, noise, opts)
            block_trace.append(("refine", objective()))

        if fixed_tau is None:
            casc = star_noma.all_cascades(channels, theta)
            g2 = np.abs(channels.h_direct + np.sqrt(beta) * casc) ** 2
            unit = [
                _pair_unit_min(g2[a], g2[b], float(rho[a]), float(rho[b]),
                               int(pi[a]), int(pi[b]), power, noise)
                for a, b in pairs
            ]
            tau, _ = optimize_time(unit)
            block_trace.append(("time", objective()))

        s_new = block_trace[-1][1]
        inner_trace.append(s_new)
        if s_new - s_prev < opts.inner_tol * max(abs(s_prev), 1e-12):
            converged = True
            break

    alloc = AllocationState(star=StarProfile(beta=beta.copy(), theta=theta.copy()),
                            rho=rho.copy(), tau=tau.copy(), pi=pi.copy())
    report = star_noma.evaluate(channels, pairs, alloc, power, noise)
    return Solution(
        pairs=pairs,
        allocation=alloc,
        rates=report.rate,
        min_rate=report.min_rate,
        inner_trace=inner_trace,
        block_trace=block_trace,
        iterations=iterations,
        converged=converged,
    )


def validate_solution(solution: Solution) -> None:
    """Feasibility check applied to every emitted solution."""
    if solution.allocation is not None:
        num_users = solution.allocation.rho.shape[0]
        star_noma.validate_allocation(solution.pairs, solution.allocation, num_users)
    else:
        tau = np.asarray(solution.meta.get("tau_user", ()), dtype=float)
        if tau.size == 0:
            raise ValueError("solution carries neither an allocation nor per-user slot shares")
        if np.any(tau < -star_noma.FEASIBILITY_TOL):
            raise ValueError("slot share out of range: tau must be nonnegative")
        if abs(float(np.sum(tau)) - 1.0) > star_noma.FEASIBILITY_TOL:
            raise ValueError(f"slot shares must sum to 1, got {float(np.sum(tau))!r}")
    if np.any(np.asarray(solution.rates) < -1e-15):
        raise ValueError("rates must be nonnegative")
    if abs(solution.min_rate - float(np.min(solution.rates))) > 1e-9:
        raise ValueError("min_rate must equal the smallest per-user rate")
