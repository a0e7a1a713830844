from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from rateforge_core.brand import APP_NAME, DISCLAIMER, VERSION
from rateforge_core.calib import FAMILIES
from rateforge_core.config import list_presets, load_config, resolve_seed
from rateforge_core.csv_io import PATH_FIELDS, export_rows_to_csv, write_discount_curve
from rateforge_core.errors import ConfigError, RateForgeError
from rateforge_core.verification import SUITES, all_passed, reports_to_csv, reports_to_text

from .commands import INSTRUMENTS, METHODS, PRICE_FIELDS, cmd_calibrate, cmd_curve, cmd_price, cmd_simulate, cmd_verify
from .config_validator import validate_config_file

logger = logging.getLogger("rateforge_cli")

EXIT_FAILED_CHECKS = 1
EXIT_ERROR = 2


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer (got {text})")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rateforge", description=f"{APP_NAME} {VERSION}. {DISCLAIMER}")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG level on stderr.")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_command(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="Model config JSON, or preset:NAME.")
        cmd.add_argument("--seed", type=_seed, default=None, help="Overrides the config seed and $HKA_SEED.")
        cmd.add_argument("--out", default="-", help="Output path (default stdout).")
        cmd.add_argument("--n", type=int, default=None, help="Monte Carlo sample budget.")
        cmd.add_argument("--workers", type=int, default=1, help="Worker threads; results do not depend on it.")
        return cmd

    curve = model_command("curve", "Initial discount curve P(0, T) and zero yields.")
    curve.add_argument("--maturities", type=_floats, default=None, help="Comma-separated maturities.")

    simulate = model_command("simulate", "Simulated zero yields along driver paths (long-format CSV).")
    simulate.add_argument("--paths", type=int, default=None, help="Number of paths.")
    simulate.add_argument("--tenors", type=_floats, default=None, help="Comma-separated tenors.")
    simulate.add_argument("--horizon", type=float, default=None)
    simulate.add_argument("--grid-step", type=float, default=None)
    simulate.add_argument("--plot", default=None, help="Also render the paths to this PNG.")

    price = model_command("price", "Price a bond, swaption or bond option at time 0.")
    price.add_argument("--instrument", choices=INSTRUMENTS, default="bond")
    price.add_argument("--method", choices=METHODS, default="closed")
    price.add_argument("--T", dest="maturity", type=float, default=None, help="Bond maturity.")
    price.add_argument("--expiry", type=float, default=None, help="Bond option expiry.")
    price.add_argument("--strike", type=float, default=None)
    price.add_argument("--dates", type=_floats, default=None, help="Swaption tenor dates T_alpha,...,T_beta.")

    verify = model_command("verify", "Run verification suites; exits 1 when a check fails.")
    verify.add_argument("--suite", action="append", choices=SUITES, default=None, help="Repeatable; default all.")
    verify.add_argument("--checks", type=int, default=5, help="Random points per suite.")
    verify.add_argument("--format", choices=("csv", "text"), default="csv")

    calibrate = sub.add_parser("calibrate", help="Fit a kernel family to a discount curve CSV (T,discount).")
    calibrate.add_argument("--family", choices=FAMILIES, required=True)
    calibrate.add_argument("--curve", required=True, help="Target discount curve CSV.")
    calibrate.add_argument("--config", default=None, help="Starting config; defaults to the family preset.")
    calibrate.add_argument("--max-iters", type=int, default=2000)
    calibrate.add_argument("--tol", type=float, default=1e-3, help="Residual norm counted as converged.")
    calibrate.add_argument("--out", default="-", help="Fitted config JSON (default stdout).")

    sub.add_parser("presets", help="List packaged model configs.")

    validate = sub.add_parser("validate", help="Validate a config file; exits 1 on problems.")
    validate.add_argument("config")
    return parser


def _write_text(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _run(args: argparse.Namespace) -> int:
    if args.command == "presets":
        export_rows_to_csv(None, list_presets(), ["name", "kernel", "process", "description"])
        return 0
    if args.command == "validate":
        problems = validate_config_file(args.config)
        if problems:
            print(f"{args.config} is invalid:")
            for p in problems:
                print(f"- {p}")
            return EXIT_FAILED_CHECKS
        print(f"{args.config} is valid.")
        return 0
    if args.command == "calibrate":
        base = load_config(args.config) if args.config else None
        result = cmd_calibrate(args.family, args.curve, base=base, max_iters=args.max_iters, residual_tol=args.tol)
        _write_text(args.out, json.dumps(result.config, indent=2) + "\n")
        summary = ", ".join(f"{k}={v:.6g}" for k, v in result.params.items())
        print(f"{args.family}: {summary}; residual {result.residual_norm:.3e}; {result.message}", file=sys.stderr)
        return 0 if result.converged else EXIT_FAILED_CHECKS

    doc: dict[str, Any] = load_config(args.config)
    seed = resolve_seed(args.seed, doc)
    if args.command == "curve":
        curve = cmd_curve(doc, args.maturities, n=args.n, seed=seed, workers=args.workers)
        write_discount_curve(args.out, curve)
        return 0
    if args.command == "simulate":
        table = cmd_simulate(doc, args.paths, args.tenors, args.horizon, args.grid_step, seed=seed, workers=args.workers)
        export_rows_to_csv(args.out, table.to_dict(orient="records"), PATH_FIELDS)
        if args.plot:
            from .plotting import plot_yield_paths

            plot_yield_paths(table, args.plot, title=str(doc.get("name", "")))
        return 0
    if args.command == "price":
        result = cmd_price(
            doc,
            instrument=args.instrument,
            method=args.method,
            maturity=args.maturity,
            expiry=args.expiry,
            strike=args.strike,
            dates=args.dates,
            n=args.n,
            seed=seed,
            workers=args.workers,
        )
        export_rows_to_csv(args.out, [result.as_row()], PRICE_FIELDS)
        return 0
    suites = tuple(args.suite) if args.suite else SUITES
    reports = cmd_verify(doc, suites=suites, n=args.n, seed=seed, checks=args.checks, workers=args.workers)
    if args.format == "text":
        _write_text(args.out, reports_to_text(reports))
    else:
        reports_to_csv(None if args.out == "-" else args.out, reports)
    return 0 if all_passed(reports) else EXIT_FAILED_CHECKS


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _run(args)
    except ConfigError as exc:
        print("Invalid configuration:", file=sys.stderr)
        for p in exc.problems:
            print(f"- {p}", file=sys.stderr)
        return EXIT_ERROR
    except (RateForgeError, KeyError, FileNotFoundError) as exc:
        print(f"error: {str(exc).strip(chr(39))}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
