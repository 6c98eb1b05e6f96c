"""Monte Carlo experiment runner, CSV persistence, and the oracle suite."""

from __future__ import annotations

import csv
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import star_noma
from .baselines import Framework, solve
from .channel import build_channels
from .inner_ao import (Solution, equalize_pair_power, inner_solve, optimize_time,
                       validate_solution)
from .matching import Matching, enumerate_matchings, outer_solve, utility
from .scenario import SystemConfig, generate_users, rng_streams

WORKERS_ENV = "STARNOMA_WORKERS"

SWEEP_VARIABLES = ("num_users", "num_elements", "bs_ris_2d_distance")

_CSV_COLUMNS = (
    "framework", "sweep_variable", "sweep_value", "num_users", "num_elements",
    "bs_ris_2d_distance", "trial", "seed", "min_rate", "per_user_rates",
    "iterations", "wall_time_s", "cell_mean", "cell_stderr", "error",
)


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


def make_scenario(config: SystemConfig, seed: int):
    """Deterministic (users, channels) pair for one trial seed."""
    streams = rng_streams(seed)
    users = generate_users(config, streams.placement)
    channels = build_channels(config, users, streams.fading)
    return users, channels


def apply_sweep(config: SystemConfig, variable: str, value) -> SystemConfig:
    """Base configuration with one sweep variable overridden."""
    if variable == "num_users":
        return replace(config, users_per_side=int(value))
    if variable == "num_elements":
        side = math.isqrt(int(value))
        if side * side != int(value):
            raise ValueError(f"element sweep values must be perfect squares, got {value}")
        return replace(config, elements_y=side, elements_z=side)
    if variable == "bs_ris_2d_distance":
        return replace(config, bs_ris_2d_distance_m=float(value), bs_position=None)
    raise ValueError(f"unknown sweep variable {variable!r}; expected one of {SWEEP_VARIABLES}")


@dataclass
class ExperimentSpec:
    """One sweep: frameworks x sweep values x independent trials.

    Trial t runs with seed base_seed + t, shared across frameworks and sweep
    values so comparisons are paired.
    """

    frameworks: tuple
    sweep_variable: str
    sweep_values: tuple
    trials: int
    base_config: SystemConfig
    base_seed: int | None = None  # None -> base_config.rng_seed

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("an experiment needs at least one trial")
        if not self.frameworks:
            raise ValueError("an experiment needs at least one framework")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.sweep_variable!r}")
        values = list(self.sweep_values)
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        self.base_config.validate()

    @property
    def seed0(self) -> int:
        return self.base_seed if self.base_seed is not None else self.base_config.rng_seed


@dataclass
class ResultRow:
    framework: str
    sweep_variable: str
    sweep_value: float
    num_users: int
    num_elements: int
    bs_ris_2d_distance: float
    trial: int
    seed: int
    min_rate: float
    rates: tuple
    iterations: int
    wall_time_s: float
    error: str = ""


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def min_rates(self, framework, sweep_value=None) -> np.ndarray:
        """Per-trial objectives of one framework (optionally one sweep cell)."""
        name = Framework(framework).value
        vals = [
            r.min_rate for r in self.rows
            if r.framework == name and not r.error
            and (sweep_value is None or r.sweep_value == sweep_value)
        ]
        return np.asarray(vals)

    def cell_stats(self):
        """(framework, sweep_value) -> (mean, standard error, count) over clean trials."""
        cells: dict = {}
        for r in self.rows:
            if r.error or not np.isfinite(r.min_rate):
                continue
            cells.setdefault((r.framework, r.sweep_value), []).append(r.min_rate)
        out = {}
        for key, vals in cells.items():
            arr = np.asarray(vals)
            stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
            out[key] = (float(arr.mean()), stderr, arr.size)
        return out

    def failures(self):
        return [r for r in self.rows if r.error]


def _run_trial(config: SystemConfig, sweep_variable: str, sweep_value, frameworks,
               trial: int, seed: int):
    """All framework rows for one (sweep value, trial) scenario."""
    trial_config = replace(config, rng_seed=seed)
    users, channels = make_scenario(trial_config, seed)
    rows = []
    for framework in frameworks:
        fw = Framework(framework)
        start = time.perf_counter()
        try:
            sol = solve(trial_config, channels, users, fw)
            validate_solution(sol)
            elapsed = time.perf_counter() - start
            rows.append(ResultRow(
                framework=fw.value, sweep_variable=sweep_variable,
                sweep_value=float(sweep_value), num_users=trial_config.users_per_side,
                num_elements=trial_config.num_elements,
                bs_ris_2d_distance=float(trial_config.bs_ris_2d_distance_m),
                trial=trial, seed=seed, min_rate=sol.min_rate,
                rates=tuple(float(v) for v in sol.rates),
                iterations=int(sol.meta.get("total_inner_iterations", sol.iterations)),
                wall_time_s=elapsed,
            ))
        except Exception as exc:  # keep the sweep alive, report at the end
            elapsed = time.perf_counter() - start
            rows.append(ResultRow(
                framework=fw.value, sweep_variable=sweep_variable,
                sweep_value=float(sweep_value), num_users=trial_config.users_per_side,
                num_elements=trial_config.num_elements,
                bs_ris_2d_distance=float(trial_config.bs_ris_2d_distance_m),
                trial=trial, seed=seed, min_rate=float("nan"), rates=(),
                iterations=0, wall_time_s=elapsed, error=f"{type(exc).__name__}: {exc}",
            ))
    return rows


def _task_args(spec: ExperimentSpec):
    for value in spec.sweep_values:
        config_v = apply_sweep(spec.base_config, spec.sweep_variable, value)
        for trial in range(spec.trials):
            yield (config_v, spec.sweep_variable, value, tuple(spec.frameworks),
                   trial, spec.seed0 + trial)


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> ResultTable:
    """Execute the sweep; deterministic for a fixed spec regardless of workers.

    Worker count comes from the argument, else the STARNOMA_WORKERS
    environment variable, else 1 (serial). Per-trial failures become rows
    with a NaN objective and an error note instead of aborting the sweep.
    """
    spec.validate()
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))

    tasks = list(_task_args(spec))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_trial_star, tasks))
    else:
        chunks = [_run_trial(*args) for args in tasks]

    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.framework, r.sweep_value, r.trial))
    return ResultTable(rows=rows)


def _run_trial_star(args):
    return _run_trial(*args)


def emit_csv(table: ResultTable, path) -> None:
    """Write the table as UTF-8 CSV: fixed column order, 9 significant digits.

    Cell mean and standard error of the min rate are appended to every row
    of the corresponding (framework, sweep value) cell.
    """
    stats = table.cell_stats()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for r in table.rows:
            mean, stderr, _ = stats.get((r.framework, r.sweep_value), (float("nan"), float("nan"), 0))
            writer.writerow([
                r.framework, r.sweep_variable, _fmt(r.sweep_value), r.num_users,
                r.num_elements, _fmt(r.bs_ris_2d_distance), r.trial, r.seed,
                _fmt(r.min_rate), ";".join(_fmt(v) for v in r.rates), r.iterations,
                _fmt(r.wall_time_s), _fmt(mean), _fmt(stderr), r.error,
            ])


def read_csv(path) -> ResultTable:
    """Parse a table written by emit_csv."""
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(_CSV_COLUMNS):
            raise ValueError(f"unexpected CSV columns in {path}: {reader.fieldnames}")
        for rec in reader:
            rates = tuple(float(v) for v in rec["per_user_rates"].split(";")) if rec["per_user_rates"] else ()
            rows.append(ResultRow(
                framework=rec["framework"], sweep_variable=rec["sweep_variable"],
                sweep_value=float(rec["sweep_value"]), num_users=int(rec["num_users"]),
                num_elements=int(rec["num_elements"]),
                bs_ris_2d_distance=float(rec["bs_ris_2d_distance"]),
                trial=int(rec["trial"]), seed=int(rec["seed"]),
                min_rate=float(rec["min_rate"]), rates=rates,
                iterations=int(rec["iterations"]), wall_time_s=float(rec["wall_time_s"]),
                error=rec["error"],
            ))
    return ResultTable(rows=rows)


def emit_trace(solution: Solution, path) -> None:
    """Write convergence traces as (layer, iteration, objective) CSV rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "iteration", "objective"])
        for i, value in enumerate(solution.inner_trace):
            writer.writerow(["inner", i, _fmt(value)])
        for i, value in enumerate(solution.outer_trace):
            writer.writerow(["outer", i, _fmt(value)])


# ---------------------------------------------------------------------------
# Brute-force oracle suite (numpy-only; CI consumes the pass/fail lines).
# ---------------------------------------------------------------------------


def _report(out, ok: bool, name: str, detail: str) -> bool:
    out.write(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}\n")
    return ok


def _pair_min_rate_grid(config, channels, pairs, beta_grid, rho_grid):
    """Exact pair min rate on a (beta, rho) grid for a single-pair scenario."""
    (a, b), = pairs
    power, noise = config.tx_power_w, config.noise_power_w
    theta = np.stack([
        star_noma.optimal_phase(channels.h_direct[k], channels.h_ris_user[k], channels.h_bs_ris)
        for k in range(channels.num_users)
    ])
    casc = star_noma.all_cascades(channels, theta)
    hd = channels.h_direct

    bb, rr = np.meshgrid(beta_grid, rho_grid, indexing="ij")
    g2_a = np.abs(hd[a] + np.sqrt(bb) * casc[a]) ** 2
    g2_b = np.abs(hd[b] + np.sqrt(1.0 - bb) * casc[b]) ** 2
    a_strong = g2_a >= g2_b  # gain-consistent decoding order per grid point
    sinr_a = np.where(
        a_strong,
        g2_a * rr * power / noise,
        g2_a * rr * power / (g2_a * (1.0 - rr) * power + noise),
    )
    sinr_b = np.where(
        a_strong,
        g2_b * (1.0 - rr) * power / (g2_b * rr * power + noise),
        g2_b * (1.0 - rr) * power / noise,
    )
    return np.minimum(np.log2(1.0 + sinr_a), np.log2(1.0 + sinr_b))


def oracle_check(out=None, quick: bool = True, seed: int = 2024) -> bool:
    """Run the independent-oracle comparisons and print one line per check."""
    out = out if out is not None else sys.stdout
    rng = np.random.default_rng(seed)
    ok_all = True
    n_inst = 5 if quick else 25

    # Slot shares: closed form vs random feasible shares plus tightness.
    worst = 0.0
    for _ in range(200):
        r = rng.uniform(0.05, 4.0, size=rng.integers(1, 6))
        tau, s = optimize_time(r)
        residual = float(np.max(np.abs(tau * r - s)))
        samples = rng.dirichlet(np.ones(r.size), size=500)
        best_random = float(np.max(np.min(samples * r, axis=1)))
        worst = max(worst, best_random - s, residual)
    ok = worst <= 1e-9
    ok_all &= _report(out, ok, "slot-share closed form",
                      f"max excess over 500 random feasible shares per run = {worst:.3e}")

    # Power split: equalizer vs dense grid.
    worst = 0.0
    for _ in range(200):
        x, y = rng.uniform(0.1, 500.0, size=2)
        x, y = max(x, y), min(x, y)
        rho = equalize_pair_power(x, y)
        val = min(np.log2(1 + x * rho), np.log2(1 + y * (1 - rho) / (y * rho + 1)))
        grid = np.linspace(0.0, 1.0, 2001)
        vals = np.minimum(np.log2(1 + x * grid), np.log2(1 + y * (1 - grid) / (y * grid + 1)))
        worst = max(worst, float(np.max(vals)) - val)
    ok = worst <= 1e-6
    ok_all &= _report(out, ok, "power equalizer vs grid", f"max grid excess = {worst:.3e}")

    # Phase alignment vs random phase draws, plus per-pair solver vs 2-D grid.
    config = replace(SystemConfig(), users_per_side=1, elements_y=3, elements_z=3)
    worst_phase = 0.0
    worst_joint = 0.0
    for i in range(n_inst):
        cfg = replace(config, rng_seed=seed + i)
        users, channels = make_scenario(cfg, cfg.rng_seed)
        for k in range(channels.num_users):
            theta = star_noma.optimal_phase(channels.h_direct[k], channels.h_ris_user[k],
                                            channels.h_bs_ris)
            best = abs(star_noma.combined_gain(channels.h_direct[k], channels.h_ris_user[k],
                                               channels.h_bs_ris, 0.7, theta))
            draws = rng.uniform(0, 2 * np.pi, size=(200, channels.num_elements))
            for d in draws:
                trial = abs(star_noma.combined_gain(channels.h_direct[k], channels.h_ris_user[k],
                                                    channels.h_bs_ris, 0.7, d))
                worst_phase = max(worst_phase, trial - best)
        sol = inner_solve(cfg, channels, ((0, 1),))
        grid = _pair_min_rate_grid(cfg, channels, ((0, 1),), np.linspace(0, 1, 201),
                                   np.linspace(0, 1, 201))
        worst_joint = max(worst_joint, float(np.max(grid)) - sol.min_rate)
    ok = worst_phase <= 1e-9
    ok_all &= _report(out, ok, "phase alignment vs random draws",
                      f"max random-phase excess = {worst_phase:.3e}")
    ok = worst_joint <= 1e-3
    ok_all &= _report(out, ok, "single-pair solver vs 2-D grid",
                      f"max grid excess = {worst_joint:.3e}")

    # Swap search vs exhaustive pairing enumeration at K = 2.
    config = replace(SystemConfig(), users_per_side=2, elements_y=3, elements_z=3)
    hits = 0
    exceeded = False
    for i in range(n_inst):
        cfg = replace(config, rng_seed=seed + 100 + i)
        users, channels = make_scenario(cfg, cfg.rng_seed)
        sol = outer_solve(cfg, channels, users)
        best = max(utility(cfg, channels, m) for m in enumerate_matchings(cfg.users_per_side))
        if sol.min_rate > best + 1e-9:
            exceeded = True
        if sol.min_rate >= best - 1e-9:
            hits += 1
    ok = not exceeded and hits >= int(0.8 * n_inst)
    ok_all &= _report(out, ok, "swap search vs pairing enumeration",
                      f"optimal on {hits}/{n_inst}, never above the enumeration bound: {not exceeded}")

    out.write(f"oracle suite: {'ALL PASS' if ok_all else 'FAILURES PRESENT'}\n")
    return bool(ok_all)
