"""Command line entry point: ``lab run``, ``lab list-scenarios``, ``lab verify``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SCENARIOS, ConfigError, config_from_dict, load_config
from .report import export_report, verify_report
from .scenarios import run_scenario

EXIT_FAILED_CHECKS = 1
EXIT_BAD_CONFIG = 2
EXIT_INCONSISTENT = 3


def _overrides(args) -> dict:
    over = {}
    if args.scenario is not None:
        over["scenario"] = args.scenario
    if args.lambda_max is not None:
        over["lambda_max"] = args.lambda_max
    if args.grid is not None:
        over["grid_size"] = args.grid
    if args.out is not None:
        over["output_dir"] = args.out
    if args.seed is not None:
        over["seed"] = args.seed
    if args.no_cache:
        over["cache"] = "off"
    if args.allow_above_ceiling:
        over["allow_above_ceiling"] = True
    return over


def _cmd_run(args) -> int:
    try:
        if args.config is not None:
            config = load_config(args.config, _overrides(args))
        else:
            config = config_from_dict(_overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    report = run_scenario(config)
    target = export_report(report, args.formats.split(","))
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} [{c.criterion}] {c.name}: {c.value:.6g} {c.op} {c.threshold:g}")
    for name, err in report.errors.items():
        print(f"ERROR {name}: {err}")
    print(f"report written to {target}")
    return 0 if report.passed else EXIT_FAILED_CHECKS


def _cmd_list(args) -> int:
    for name in SCENARIOS:
        print(name)
    return 0


def _cmd_verify(args) -> int:
    result = verify_report(args.report_dir)
    for c in result["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        flag = "" if c["consistent"] else "  (stored value does not match data)"
        print(f"{status} [{c['criterion']}] {c['name']}{flag}")
    for name, err in result["errors"].items():
        print(f"ERROR {name}: {err}")
    if not result["consistent"]:
        return EXIT_INCONSISTENT
    return 0 if result["passed"] else EXIT_FAILED_CHECKS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its report")
    run.add_argument("--config", help="YAML scenario file")
    run.add_argument("--scenario", choices=SCENARIOS)
    run.add_argument("--lambda-max", type=float)
    run.add_argument("--grid", type=int)
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--no-cache", action="store_true")
    run.add_argument("--allow-above-ceiling", action="store_true",
                     help="permit lambda_max above the configured ceiling")
    run.add_argument("--formats", default="csv,json,plotdata")
    run.set_defaults(func=_cmd_run)

    ls = sub.add_parser("list-scenarios", help="print the scenario names")
    ls.set_defaults(func=_cmd_list)

    ver = sub.add_parser("verify", help="re-check acceptance from a stored report")
    ver.add_argument("report_dir")
    ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
