"""Command-line entry point: ``chemopersist <subcommand> ...``.

JSON results go to standard output; progress goes to standard error.
Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from typing import Sequence

from .elliptic import DELTA0_CELL_LIMIT, discrete_delta0
from .harness import ConfigError, load_config, load_sweep, run_scenario, run_sweep
from .harness.sweep import rows_to_csv, sweep_columns
from .thresholds import ThresholdQuery, chi_star, chi_star_limit_bound

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(f"usage error: {message}")


def _emit(payload) -> None:
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def _progress_printer(t_final: float, quiet: bool):
    if quiet:
        return None
    last = [-1]

    def report(state) -> None:
        pct = int(100 * state.t / t_final)
        if pct // 10 != last[0]:
            last[0] = pct // 10
            print(f"  t = {state.t:.4g} / {t_final:g}  max(u+v) = {(state.u + state.v).max():.4g}",
                  file=sys.stderr)

    return report


def _run(args, verify: bool) -> int:
    config = load_config(args.config)
    if args.output_dir is not None:
        config = config.with_output_dir(args.output_dir)
    print(f"running {args.config}: {config.grid.shape} cells to t = {config.t_final:g}", file=sys.stderr)
    summary = run_scenario(config, write=True, progress=_progress_printer(config.t_final, args.quiet)).summary
    for c in summary.checks:
        print(f"  {c.name:22s} {c.status}", file=sys.stderr)
    print(f"stop: {summary.stop_reason} at t = {summary.final_time:g} "
          f"({summary.wall_clock:.1f} s)", file=sys.stderr)
    _emit(summary.to_dict())
    if verify and not summary.passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _threshold(args) -> int:
    query = ThresholdQuery(args.mu, args.chi1, args.chi2, B_min=args.B_min, B_max=args.B_max,
                           beta_min=args.beta_min, beta_max=args.beta_max,
                           resolution=args.resolution, iterations=args.iterations)
    result = chi_star(query).as_dict()
    if args.a_min is not None:
        result["margin"] = args.a_min - result["chi_star"]
    result["limit_bound"] = chi_star_limit_bound(args.mu, args.chi1, args.chi2)
    _emit(result)
    return EXIT_OK


def _sweep(args) -> int:
    sweep = load_sweep(args.config)
    n = len(sweep.points())
    print(f"sweeping {n} points", file=sys.stderr)

    def report(i, total, row) -> None:
        if not args.quiet:
            note = f"  error: {row['error']}" if row.get("error") else ""
            print(f"  [{i}/{total}] done{note}", file=sys.stderr)

    rows = run_sweep(sweep, progress=report)
    if sweep.output is None:
        sys.stdout.write(rows_to_csv(rows, sweep_columns(sweep)))
    else:
        print(f"wrote {sweep.output}", file=sys.stderr)
    return EXIT_OK


def _delta0(args) -> int:
    config = load_config(args.config)
    if config.grid.size > DELTA0_CELL_LIMIT:
        raise ConfigError(f"grid has {config.grid.size} cells; delta0 supports at most {DELTA0_CELL_LIMIT}")
    _emit({"delta0": discrete_delta0(config.grid, config.params), "cells": config.grid.size,
           "volume": config.grid.volume})
    return EXIT_OK


def _scenarios(args) -> int:
    root = resources.files("chemopersist") / "scenarios"
    for entry in sorted(p.name for p in root.iterdir() if p.name.endswith(".ini")):
        print(str(root / entry))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chemopersist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in (("simulate", "run a scenario and write its CSV and JSON outputs"),
                           ("verify", "run a scenario; exit 1 if any check fails")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("--quiet", action="store_true", help="suppress progress lines")
        p.add_argument("--output-dir", default=None, help="directory for relative output paths")

    p = sub.add_parser("threshold", help="compute chi* for (mu, chi1, chi2)")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--chi1", type=float, required=True)
    p.add_argument("--chi2", type=float, required=True)
    p.add_argument("--a-min", type=float, default=None, help="also report a_min - chi*")
    p.add_argument("--B-min", type=float, default=1e-9)
    p.add_argument("--B-max", type=float, default=None)
    p.add_argument("--beta-min", type=float, default=1e-7)
    p.add_argument("--beta-max", type=float, default=None)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--iterations", type=int, default=200)

    p = sub.add_parser("sweep", help="evaluate a parameter sweep")
    p.add_argument("config")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("delta0", help="print the discrete lower-bound constant for a config's grid")
    p.add_argument("config")

    sub.add_parser("scenarios", help="list the bundled scenario files")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        handler = {
            "simulate": lambda a: _run(a, verify=False),
            "verify": lambda a: _run(a, verify=True),
            "threshold": _threshold,
            "sweep": _sweep,
            "delta0": _delta0,
            "scenarios": _scenarios,
        }[args.command]
        return handler(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
