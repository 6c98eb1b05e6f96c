"""Command-line front end: single solves, convergence traces, and sweeps."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .baselines import ABLATIONS, FIG3_FRAMEWORKS, Framework, solve
from .harness import (ExperimentSpec, ResultTable, emit_csv, emit_trace,
                      make_scenario, oracle_check, run_experiment)
from .inner_ao import validate_solution
from .scenario import SystemConfig, load_config


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


def _parse_frameworks(spec: str) -> tuple:
    if spec == "all":
        return FIG3_FRAMEWORKS
    return tuple(Framework(name.strip()) for name in spec.split(",") if name.strip())


def _parse_values(spec: str, cast) -> tuple:
    return tuple(cast(v) for v in spec.split(",") if v.strip())


def _load(args) -> SystemConfig:
    config = load_config(args.config) if args.config else SystemConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, rng_seed=args.seed)
    config.validate()
    return config


def _add_common(parser, with_out=True):
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", type=int, help="override the master seed")
    if with_out:
        parser.add_argument("--out", help="output CSV path")


def _cmd_solve(args) -> int:
    config = _load(args)
    users, channels = make_scenario(config, config.rng_seed)
    framework = Framework(args.framework)
    sol = solve(config, channels, users, framework)
    validate_solution(sol)

    print(f"framework: {framework.value}")
    print(f"users per side: {config.users_per_side}  elements: {config.num_elements}  seed: {config.rng_seed}")
    print(f"min rate (bits/s/Hz): {_fmt(sol.min_rate)}")
    print("per-user rates: " + " ".join(_fmt(v) for v in sol.rates))
    if sol.matching is not None:
        print(f"pairing (ru per tu): {list(sol.matching)}")
    print(f"inner iterations: {sol.iterations}  converged: {sol.converged}")
    if sol.outer_trace:
        print("outer utility trace: " + " ".join(_fmt(v) for v in sol.outer_trace))
    if args.out:
        emit_trace(sol, args.out)
        print(f"trace written to {args.out}")
    return 0


def _cmd_convergence(args) -> int:
    config = _load(args)
    users, channels = make_scenario(config, config.rng_seed)
    sol = solve(config, channels, users, Framework.HYBRID_NOMA_STAR)
    out = args.out or "convergence.csv"
    emit_trace(sol, out)
    print(f"inner iterations: {len(sol.inner_trace)}  accepted swaps: {max(len(sol.outer_trace) - 1, 0)}")
    print(f"final min rate: {_fmt(sol.min_rate)}")
    print(f"trace written to {out}")
    return 0


def _run_and_emit(spec: ExperimentSpec, args) -> int:
    table = run_experiment(spec, workers=args.workers)
    failures = table.failures()
    for row in failures:
        print(f"trial failure: {row.framework} value={row.sweep_value} trial={row.trial}: {row.error}",
              file=sys.stderr)
    out = args.out or "results.csv"
    emit_csv(table, out)
    print(f"{len(table)} rows written to {out} ({len(failures)} failed trials)")
    for (fw, value), (mean, stderr, n) in sorted(table.cell_stats().items()):
        print(f"  {fw} @ {value:g}: mean {_fmt(mean)} +- {_fmt(stderr)} (n={n})")
    return 0 if not failures else 1


def _cmd_sweep_users(args) -> int:
    config = _load(args)
    frameworks = _parse_frameworks(args.frameworks)
    if args.ablations:
        extra = ABLATIONS if args.ablations == "all" else _parse_frameworks(args.ablations)
        frameworks = tuple(frameworks) + tuple(f for f in extra if f not in frameworks)
    spec = ExperimentSpec(
        frameworks=frameworks, sweep_variable="num_users",
        sweep_values=_parse_values(args.values, int), trials=args.trials,
        base_config=config,
    )
    return _run_and_emit(spec, args)


def _cmd_sweep_distance(args) -> int:
    config = _load(args)
    frameworks = _parse_frameworks(args.frameworks)
    rows = []
    status = 0
    for m in _parse_values(args.elements, int):
        side = int(m ** 0.5)
        if side * side != m:
            raise ValueError(f"--elements entries must be perfect squares, got {m}")
        spec = ExperimentSpec(
            frameworks=frameworks, sweep_variable="bs_ris_2d_distance",
            sweep_values=_parse_values(args.values, float), trials=args.trials,
            base_config=replace(config, elements_y=side, elements_z=side),
        )
        table = run_experiment(spec, workers=args.workers)
        for row in table.failures():
            print(f"trial failure: {row.framework} value={row.sweep_value} trial={row.trial}: {row.error}",
                  file=sys.stderr)
            status = 1
        rows.extend(table.rows)
    merged = ResultTable(rows=rows)
    out = args.out or "distance_sweep.csv"
    emit_csv(merged, out)
    print(f"{len(merged)} rows written to {out}")
    for (fw, value), (mean, stderr, n) in sorted(merged.cell_stats().items()):
        print(f"  {fw} @ {value:g}: mean {_fmt(mean)} +- {_fmt(stderr)} (n={n})")
    return status


def _cmd_oracle_check(args) -> int:
    ok = oracle_check(quick=not args.full)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starnoma",
        description="Max-min rate optimizer and Monte Carlo harness for a "
                    "transmit-and-reflect surface assisted hybrid NOMA downlink.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one scenario and print the solution summary")
    _add_common(p)
    p.add_argument("--framework", default=Framework.HYBRID_NOMA_STAR.value,
                   choices=[f.value for f in Framework])
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("convergence", help="emit inner/outer convergence traces")
    _add_common(p)
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("sweep-users", help="min rate vs number of users per side")
    _add_common(p)
    p.add_argument("--values", default="2,3,4", help="comma-separated user counts per side")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--frameworks", default="all", help="'all' or comma-separated names")
    p.add_argument("--ablations", default="", help="'all' or comma-separated ablation names")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_sweep_users)

    p = sub.add_parser("sweep-distance", help="min rate vs BS-surface 2D distance, per element count")
    _add_common(p)
    p.add_argument("--values", default="50,200,400", help="comma-separated distances in meters")
    p.add_argument("--elements", default="16,64", help="comma-separated total element counts")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--frameworks", default=Framework.HYBRID_NOMA_STAR.value)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_sweep_distance)

    p = sub.add_parser("oracle-check", help="run the brute-force oracle suite")
    p.add_argument("--full", action="store_true", help="more instances per check")
    p.set_defaults(func=_cmd_oracle_check)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
