#!/usr/bin/env python3
"""
Command-line entry point for the critical-window lab.

Usage:
    python cli.py wright --max-ell 75
    python cli.py fk --k 2,3,4 --lambda -2:2:0.5
    python cli.py fk0 --k 2 --ell0 75 --digits 20
    python cli.py profile --lambda -1.75:3.75:0.05 --out profile.csv
    python cli.py maximize
    python cli.py simulate --n 1000000 --lambda 0 --reps 200 --seed 42
    python cli.py cycle --n 1000 --scan --out cycle.csv
    python cli.py verify --suite all --quick
    python cli.py schema --out docs/schemas

Data goes to --out or standard output; diagnostics go to standard error.
Exit codes: 0 success, 1 computation failure, 2 usage error.
"""

import argparse
import json
import math
import sys
from typing import Callable, Optional, Sequence

import structlog
from pydantic import ValidationError

from config import get_settings
from errors import CritwinError
from models import (
    MaximizeOutput,
    PrecisionSpec,
    RunConfig,
    SimulateEstimate,
    SimulateOutput,
    SimulateParams,
)
import specfun
from observability import configure_logging, get_computation_summary
from schema_generator import save_schemas
from services.excursion_service import ExcursionService
from services.maximizer_service import PROFILE_HEADER, MaximizerService
from services.oracle_service import OracleService
from services.percolation_service import PercolationService, critical_p
from services.scaling_service import ScalingService, lambda_grid
from utils.output import write_csv, write_json, write_model, write_text
from utils.responses import all_passed

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Flags that are recorded in RunConfig outside of params
_CONFIG_KEYS = {"command", "handler", "threads", "out", "format", "seed", "log_level", "log_json"}


# ========================================================================
# ARGUMENT TYPES
# ========================================================================

def parse_range(text: str) -> list[float]:
    """'lo:hi:step' (inclusive) or a single value."""
    parts = text.split(":")
    try:
        values = [float(part) for part in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or lo:hi:step, got {text!r}")
    if not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f"range values must be finite, got {text!r}")
    if len(values) == 1:
        return values
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}")
    lo, hi, step = values
    if not step > 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"range needs lo <= hi and step > 0, got {text!r}")
    return lambda_grid(lo, hi, step)


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def parse_name_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


# ========================================================================
# HANDLERS
# ========================================================================

def run_config(args: argparse.Namespace) -> RunConfig:
    params = {k: v for k, v in vars(args).items() if k not in _CONFIG_KEYS}
    return RunConfig(
        subcommand=args.command,
        params=params,
        seed=getattr(args, "seed", None),
        threads=args.threads,
        out=args.out,
        format=args.format,
    )


def cmd_wright(args: argparse.Namespace) -> int:
    prec = PrecisionSpec.of(args.digits)
    service = ExcursionService(digits=args.digits, threads=args.threads)
    table = service.excursion_moments(args.max_ell, prec, recursion=args.recursion)
    config = run_config(args)
    if args.format == "json":
        write_json(args.out, table.model_dump(mode="json"), config)
        return EXIT_OK
    header = ["ell", "w_ell"]
    if args.diagnostics:
        header += ["M", "bound_ratio"]
    rows = []
    for ell in range(args.max_ell + 1):
        row = [ell, table.wright[ell]]
        if args.diagnostics:
            ratio = table.wright[ell] / specfun.wl_upper(ell) if ell else ""
            row += [table.moments[ell], ratio]
        rows.append(row)
    write_csv(args.out, header, rows, config, digits=args.digits, scientific=True)
    return EXIT_OK


def cmd_fk(args: argparse.Namespace) -> int:
    service = ScalingService(quad_tol=args.tol, threads=args.threads)
    header = ["lambda"] + [f"f_{k}" for k in args.k] + ["rel_error"]
    rows = []
    for lam in args.lam:
        row: list = [lam]
        worst = 0.0
        for k in args.k:
            value, rel = service.fk(k, lam, args.tol)
            row.append(value)
            worst = max(worst, rel)
        rows.append(row + [worst])
    write_csv(args.out, header, rows, run_config(args))
    return EXIT_OK


def cmd_fk0(args: argparse.Namespace) -> int:
    service = ScalingService(digits=args.digits, ell0=args.ell0, threads=args.threads)
    prec = PrecisionSpec.of(args.digits)
    config = run_config(args)
    results = {k: service.fk_zero(k, args.ell0, prec) for k in args.k}
    if args.format == "json":
        write_json(args.out, {"values": {str(k): v.model_dump(mode="json") for k, v in results.items()}}, config)
    elif args.format == "csv":
        rows = [(k, v.formatted(args.digits), v.error_bound, v.truncation_bound, v.rounding_bound) for k, v in results.items()]
        write_csv(args.out, ("k", "value", "error_bound", "truncation_bound", "rounding_bound"), rows, config)
    else:
        write_text(args.out, [f"{v.formatted(args.digits)},{float(v.error_bound):.3e}" for v in results.values()], config)
    return EXIT_OK


def cmd_profile(args: argparse.Namespace) -> int:
    settings = get_settings()
    grid = args.lam or lambda_grid(settings.profile_lo, settings.profile_hi, settings.grid_step)
    service = MaximizerService(ScalingService(quad_tol=args.tol, threads=args.threads))
    rows = service.grid_rows(grid)
    write_csv(args.out, PROFILE_HEADER, rows, run_config(args))
    return EXIT_OK


def cmd_maximize(args: argparse.Namespace) -> int:
    service = MaximizerService(ScalingService(threads=args.threads), grid_step=args.grid_step)
    report = service.find_maximizer(args.lo, args.hi, args.tol)
    write_model(args.out, MaximizeOutput.of(run_config(args), report))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    service = PercolationService(threads=args.threads)
    summaries = service.estimate(args.estimands, args.n, args.lam, args.reps, args.seed)
    config = run_config(args)
    if args.format == "csv":
        rows = [(s.name, s.mean, s.stderr, s.ci95[0], s.ci95[1]) for s in summaries]
        write_csv(args.out, ("estimand", "mean", "stderr", "ci95_lo", "ci95_hi"), rows, config)
        return EXIT_OK
    document = SimulateOutput(
        config=config,
        params=SimulateParams(n=args.n, lam=args.lam, p=critical_p(args.n, args.lam), reps=args.reps, seed=args.seed),
        estimates=[SimulateEstimate(name=s.name, mean=s.mean, stderr=s.stderr, ci95=s.ci95) for s in summaries],
    )
    write_model(args.out, document)
    return EXIT_OK


def cmd_cycle(args: argparse.Namespace) -> int:
    service = OracleService()
    config = run_config(args)
    if args.scan:
        scan = service.cycle_scan(args.n)
        if args.format == "json":
            write_json(args.out, scan.model_dump(mode="json"), config)
        else:
            row = (scan.n, scan.p_star, scan.logder_max, scan.window_scaled, scan.on_boundary)
            write_csv(args.out, ("n", "p_star", "logder_max", "window_scaled", "on_boundary"), [row], config)
        return EXIT_OK
    if not args.p:
        raise argparse.ArgumentTypeError("cycle needs --p or --scan")
    write_csv(args.out, ("p", "chi", "dchi_dp", "logder"), service.cycle_rows(args.n, args.p), config)
    return EXIT_OK


def render_table(responses: list[dict]) -> list[str]:
    lines = [f"{'status':<15} {'check':<26} message"]
    for r in responses:
        margins = json.dumps(r.get("data", {}), default=str, sort_keys=True)
        lines.append(f"{r['status']:<15} {r.get('check', ''):<26} {r['message']}  {margins}")
    failed = sum(1 for r in responses if not r["success"])
    lines.append(f"# {len(responses)} checks, {failed} failed")
    return lines


def cmd_verify(args: argparse.Namespace) -> int:
    service = OracleService(
        scaling=ScalingService(threads=args.threads),
        percolation=PercolationService(threads=args.threads),
    )
    tier = "full" if args.full else "quick"
    responses = service.verify_suite(args.suite, tier)
    logger.info("computation_summary", suite=args.suite, tier=tier, **get_computation_summary())
    config = run_config(args)
    if args.format == "json":
        write_json(args.out, {"suite": args.suite, "tier": tier, "checks": responses}, config)
    else:
        write_text(args.out, render_table(responses), config)
    return EXIT_OK if all_passed(responses) else EXIT_FAILURE


def cmd_schema(args: argparse.Namespace) -> int:
    save_schemas(args.out or "docs/schemas")
    return EXIT_OK


# ========================================================================
# PARSER
# ========================================================================

def _add_output(parser: argparse.ArgumentParser, default_format: str, formats: Sequence[str]) -> None:
    parser.add_argument("--out", default=None, help="Output file ('-' or omitted for stdout)")
    parser.add_argument("--format", default=default_format, choices=formats, help="Output format")


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="critwin",
        description="Erdos-Renyi critical window: scaling function, maximizer and Monte Carlo checks",
    )
    parser.add_argument("--threads", type=positive_int, default=settings.threads,
                        help="Worker count (default: CRITWIN_THREADS)")
    parser.add_argument("--log-level", default=settings.log_level,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)
    parser.add_argument("--log-json", action="store_true", default=settings.log_json,
                        help="Render diagnostics as JSON lines")
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    p = subparsers.add_parser("wright", help="Excursion moments and Wright constants")
    p.add_argument("--max-ell", type=int, default=settings.ell0)
    p.add_argument("--digits", type=int, default=settings.digits)
    p.add_argument("--recursion", choices=["takacs", "louchard"], default="takacs")
    p.add_argument("--diagnostics", action="store_true", help="Add the M and bound_ratio columns")
    _add_output(p, "csv", ["csv", "json"])
    p.set_defaults(handler=cmd_wright)

    p = subparsers.add_parser("fk", help="f_k(lambda) by quadrature")
    p.add_argument("--k", type=parse_int_list, default=[2])
    p.add_argument("--lambda", dest="lam", type=parse_range, required=True, help="value or lo:hi:step")
    p.add_argument("--tol", type=positive_float, default=settings.quad_tol)
    _add_output(p, "csv", ["csv"])
    p.set_defaults(handler=cmd_fk)

    p = subparsers.add_parser("fk0", help="f_k(0) with a rigorous error bound")
    p.add_argument("--k", type=parse_int_list, default=[2])
    p.add_argument("--ell0", type=positive_int, default=settings.ell0)
    p.add_argument("--digits", type=int, default=settings.digits)
    _add_output(p, "text", ["text", "csv", "json"])
    p.set_defaults(handler=cmd_fk0)

    p = subparsers.add_parser("profile", help="log f and its derivatives over a lambda grid")
    p.add_argument("--lambda", dest="lam", type=parse_range, default=None,
                   help=f"lo:hi:step (default {settings.profile_lo}:{settings.profile_hi}:{settings.grid_step})")
    p.add_argument("--tol", type=positive_float, default=settings.quad_tol)
    _add_output(p, "csv", ["csv"])
    p.set_defaults(handler=cmd_profile)

    p = subparsers.add_parser("maximize", help="Maximizer of d/dlambda log f")
    p.add_argument("--lo", type=float, default=-2.0)
    p.add_argument("--hi", type=float, default=4.0)
    p.add_argument("--tol", type=positive_float, default=1e-6)
    p.add_argument("--grid-step", type=positive_float, default=settings.grid_step)
    _add_output(p, "json", ["json"])
    p.set_defaults(handler=cmd_maximize)

    p = subparsers.add_parser("simulate", help="Monte Carlo estimators on G(n, p)")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--reps", type=positive_int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--estimands", type=parse_name_list, default=["x2", "dlogchi", "d1", "d2", "twolarge"])
    _add_output(p, "json", ["json", "csv"])
    p.set_defaults(handler=cmd_simulate)

    p = subparsers.add_parser("cycle", help="Bond percolation on the n-cycle")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=parse_range, default=None, help="value or lo:hi:step")
    p.add_argument("--scan", action="store_true", help="Locate the maximal log-derivative")
    _add_output(p, "csv", ["csv", "json"])
    p.set_defaults(handler=cmd_cycle)

    p = subparsers.add_parser("verify", help="Run verification suites")
    p.add_argument("--suite", choices=["oracles", "analytic", "montecarlo", "all"], default="all")
    tier = p.add_mutually_exclusive_group()
    tier.add_argument("--quick", action="store_true", default=True, help="Enumeration and analytic identities")
    tier.add_argument("--full", action="store_true", help="Adds the Monte Carlo suites")
    _add_output(p, "table", ["table", "json"])
    p.set_defaults(handler=cmd_verify)

    p = subparsers.add_parser("schema", help="Write JSON schemas of the JSON outputs")
    _add_output(p, "json", ["json"])
    p.set_defaults(handler=cmd_schema)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, dispatch the subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    configure_logging(args.log_level, args.log_json)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except argparse.ArgumentTypeError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CritwinError, ValidationError) as exc:
        logger.error("command_failed", command=args.command, error=str(exc), error_type=type(exc).__name__)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(run())
