"""Batch front end: ``penrose-fife {run,rates,check,find-h} --config FILE``.

Exit codes: 0 success, 2 invalid configuration or problem data, 3 a time
step could not be taken (too large or solver failure), 4 an identity check
failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ScenarioConfig, build_problem, load_config, parse_ladder, run_options
from .diagnostics import check_identities, export_estimates_csv, monitor
from .domain import validate_problem
from .errors import PenroseFifeError, SolverError
from .rates import run_ladder
from .stepper import export_trajectory_csv, find_max_step, run

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_STEP = 3
EXIT_CHECK = 4

log = logging.getLogger("penrose_fife.cli")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _load(args):
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg.data = replace(cfg.data, seed=args.seed)
    if getattr(args, "ladder", None):
        parse_ladder(args.ladder)
        cfg.time = replace(cfg.time, ladder=args.ladder)
    spec = build_problem(cfg)
    report = validate_problem(spec)
    if not report.ok:
        for msg in report.violations:
            print(f"invalid: {msg}", file=sys.stderr)
        raise _Invalid()
    return cfg, spec


class _Invalid(Exception):
    pass


def _out_dir(args, cfg):
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report_max_step(spec, cfg, N_start):
    N, h = find_max_step(spec, N_start=N_start, **run_options(cfg))
    print(f"largest admissible h = {h!r} (N = {N})")
    return N, h


def cmd_run(args):
    cfg, spec = _load(args)
    traj = run(spec, cfg.time.N, **run_options(cfg))
    out = _out_dir(args, cfg)
    export_trajectory_csv(traj, out / "trajectory.csv", stride=cfg.output.stride)
    export_estimates_csv(monitor(traj), out / "estimates.csv")
    print(f"wrote {out / 'trajectory.csv'} and {out / 'estimates.csv'} (N = {traj.N}, h = {traj.h!r})")
    return EXIT_OK


def cmd_rates(args):
    cfg, spec = _load(args)
    exponents = cfg.ladder_exponents() or list(range(5, 11))
    ref = cfg.time.reference_N or None
    start = time.perf_counter()
    report = run_ladder(spec, exponents, reference_N=ref, workers=cfg.solver.workers,
                        **run_options(cfg))
    elapsed = time.perf_counter() - start
    out = _out_dir(args, cfg)
    report.to_csv(out / "rates.csv")
    for r in report.rows:
        print(f"h={r.h:.6e} tau={r.tau:.6e} E={r.E_total:.6e}")
    print(f"p={report.fit.p:.6f}, M={report.fit.M:.6e}")
    print(f"envelope spread (finer half) = {report.envelope_spread():.4f}; {elapsed:.1f} s")
    return EXIT_OK


def cmd_check(args):
    cfg, spec = _load(args)
    traj = run(spec, cfg.time.N, **run_options(cfg))
    results = check_identities(traj)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_find_h(args):
    cfg, spec = _load(args)
    _report_max_step(spec, cfg, 1)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "rates": cmd_rates, "check": cmd_check, "find-h": cmd_find_h}


def build_parser():
    parser = _Parser(prog="penrose-fife", description="Nonlocal phase-field time stepper.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="scenario file (defaults apply when omitted)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides [output] directory)")
        p.add_argument("--seed", type=int, help="seed for randomized presets")
        p.add_argument("--find-h", action="store_true",
                       help="on a failed step, search for the largest admissible h")
        if name == "rates":
            p.add_argument("--ladder", metavar="LO..HI", help='exponents of h = T/2^e, e.g. "5..10"')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Invalid:
        return EXIT_INVALID
    except SolverError as exc:
        print(f"step failure: {exc}", file=sys.stderr)
        if args.find_h:
            try:
                cfg, spec = _load(args)
                _report_max_step(spec, cfg, cfg.time.N)
            except SolverError as again:
                print(f"no admissible step: {again}", file=sys.stderr)
        return EXIT_STEP
    except (PenroseFifeError, OSError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
