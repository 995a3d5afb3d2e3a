"""Command line entry point: ``rnmod run | suite | selftest``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import GeneratorError, RNModError
from .experiment import FAIL, ScenarioConfig, run_demiclosedness, run_suite, write_report


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--report", type=Path, default=None,
                   help="report file (run) or report directory (suite)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--horizon", type=int, default=None, help="override the certificate horizon")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rnmod", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("scenario", type=Path)
    _common(run)
    suite = sub.add_parser("suite", help="run every scenario in a directory")
    suite.add_argument("directory", type=Path)
    _common(suite)
    st = sub.add_parser("selftest", help="run the built-in invariant corpus")
    _common(st)
    return parser


def cmd_run(args) -> int:
    try:
        cfg = ScenarioConfig.from_file(args.scenario).with_overrides(args.seed, args.horizon)
        rep = run_demiclosedness(cfg)
    except GeneratorError as exc:
        print(f"generator error: {exc}", file=sys.stderr)
        return 2
    except RNModError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.report is not None:
        write_report(rep, args.report, args.format)
        print(f"{rep.name}: {rep.verdict} (conclusion residual {max(rep.conclusion_residual):.3e})")
    else:
        sys.stdout.write(rep.to_json() if args.format == "json" else rep.to_csv())
    return 1 if rep.verdict == FAIL else 0


def cmd_suite(args) -> int:
    if not args.directory.is_dir():
        print(f"error: {args.directory} is not a directory", file=sys.stderr)
        return 2
    summary = run_suite(args.directory, args.report, args.seed, args.horizon, args.format)
    sys.stdout.write(summary.to_csv())
    return summary.exit_code


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "suite": cmd_suite, "selftest": cmd_selftest}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
