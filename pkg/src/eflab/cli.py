"""Command-line front end.

Exit status: 0 when every item or criterion passed, 1 when any failed,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import ConfigurationError
from .scenario import (
    SCHEMA_VERSION,
    ScenarioConfig,
    ScenarioError,
    parse_scenario,
    parse_scenario_dict,
    scenario_to_dict,
    with_overrides,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SUBCOMMANDS = ("integrate", "classify", "verify", "scan", "corpus")


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _jobs(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("--jobs must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eflab",
        description="Emden-Fowler growth classification, theorem checks and scans.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run a {name} scenario")
        p.add_argument("--scenario", help="TOML scenario file")
        p.add_argument("--preset", help="built-in equation and problem (thomas_fermi, cubic_oscillator, riccati)")
        p.add_argument("--input", help="two-column time,value CSV to classify")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), help="report format (default json)")
        p.add_argument("--rtol", type=_positive)
        p.add_argument("--atol", type=_positive)
        p.add_argument("--t-end", type=float, dest="t_end")
        p.add_argument("--seed", type=int, help="reserved; every computation is deterministic")
        p.add_argument("--jobs", type=_jobs, default=1, help="parallel workers for scans")
        p.add_argument("--timing", action="store_true", help="include wall time in the report")
    return parser


def load_config(args) -> ScenarioConfig:
    if args.scenario:
        cfg = parse_scenario(args.scenario)
        if cfg.kind != args.command:
            raise ScenarioError([f"kind: scenario is {cfg.kind!r} but subcommand is {args.command!r}"],
                                args.scenario)
        if args.preset and args.preset != cfg.preset:
            raise ScenarioError(["preset: --preset conflicts with the scenario file"], args.scenario)
        raw = scenario_to_dict(cfg)
    else:
        raw = {"schema_version": SCHEMA_VERSION, "kind": args.command}
        if args.preset:
            raw["preset"] = args.preset
    if args.input is not None:
        raw["input"] = {**raw.get("input", {}), "csv": args.input}
    cfg = parse_scenario_dict(raw, args.scenario or "command line")
    if args.rtol is not None or args.atol is not None or args.t_end is not None:
        cfg = with_overrides(cfg, args.rtol, args.atol, args.t_end)
    return cfg


def main(argv=None) -> int:
    from .report import emit_report, run_scenario

    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigurationError as exc:
        problems = getattr(exc, "problems", None) or [str(exc)]
        for p in problems:
            print(f"eflab: configuration error: {p}", file=sys.stderr)
        return EXIT_CONFIG

    fmt = args.format or cfg.output.format
    out = args.out or cfg.output.path
    report = run_scenario(cfg, jobs=args.jobs, timing=args.timing)
    try:
        text = emit_report(report, fmt, out)
    except ConfigurationError as exc:
        print(f"eflab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"eflab: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if out is None:
        sys.stdout.write(text)
    if cfg.kind == "corpus":
        for r in report.results:
            print(f"criterion {r['number']:2d} {'PASS' if r['passed'] else 'FAIL'}  {r['name']}",
                  file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
