"""Command line entry point: ``masim run | sweep | report``.

Exit codes: 0 success, 2 configuration error, 3 every trial failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .driver import AlgorithmOptions, Scheme, run
from .experiments import (
    SweepSpec,
    TrialResult,
    aggregate,
    read_results,
    run_sweep,
    write_results,
    write_summary,
)
from .scenario import ScenarioConfig, build_scenario, watts_to_dbm
from .socp import Status

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3

_CONFIG_ERRORS = (OSError, ValueError, TypeError, KeyError, json.JSONDecodeError)


class ConfigError(Exception):
    pass


def _load(loader, path):
    try:
        return loader(path)
    except _CONFIG_ERRORS as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_run(args) -> int:
    cfg = _load(ScenarioConfig.load, args.config)
    try:
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        options = AlgorithmOptions(scheme=Scheme(args.scheme))
        scenario = build_scenario(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = run(scenario, options)
    ok = result.status is Status.OPTIMAL
    wall = result.trace.wall_time[-1] * 1e3 if result.trace.wall_time else 0.0
    row = TrialResult(
        sweep_param="",
        sweep_value="",
        scheme=options.scheme.value,
        trial=0,
        seed=cfg.seed,
        scenario_hash=scenario.digest(),
        status=result.status.value,
        power_dbm=float(watts_to_dbm(result.solution.total_power)) if ok else float("nan"),
        iters=result.trace.iterations,
        wall_ms=wall,
    )
    if args.out:
        write_results([row], args.out)
    power = f"{row.power_dbm:.3f} dBm" if ok else "-"
    print(f"{row.scheme} seed={row.seed} status={row.status} power={power} iters={row.iters}")
    return EXIT_OK if ok else EXIT_ALL_FAILED


def cmd_sweep(args) -> int:
    spec = _load(SweepSpec.load, args.spec)
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.no_timing:
        changes["record_timing"] = False
    try:
        spec = dataclasses.replace(spec, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    out = args.out or spec.output
    if not out:
        raise ConfigError("no output path: pass --out or set 'output' in the spec")
    rows = run_sweep(spec, workers=args.workers)
    write_results(rows, out)
    for s in aggregate(rows):
        mean = f"{s.mean_dbm:8.3f}" if s.optimal else "     n/a"
        print(f"{s.sweep_param}={s.sweep_value!s:>6} {s.scheme:>9}: {mean} dBm  ({s.optimal}/{s.trials} optimal)")
    return EXIT_OK if any(r.ok for r in rows) else EXIT_ALL_FAILED


def cmd_report(args) -> int:
    rows = _load(read_results, args.input)
    if not rows:
        raise ConfigError(f"{args.input}: no rows")
    summary = aggregate(rows)
    write_summary(summary, args.out)
    return EXIT_OK if any(r.ok for r in rows) else EXIT_ALL_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="masim", description="Movable-antenna interference network simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one scenario with one scheme")
    p.add_argument("--config", required=True, help="ScenarioConfig JSON")
    p.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="write the result row as CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Monte Carlo sweep from a SweepSpec JSON")
    p.add_argument("--spec", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-reproducible output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="aggregate a results CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("masim: error: seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"masim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
