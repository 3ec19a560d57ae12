"""Command-line entry point: ``flowmend <command> ...``.

Exit codes: 0 success, 1 usage error, 2 input or parse error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .bench import ExperimentSpec, aggregate, format_table, run_experiment
from .corpus import build_corpus
from .dsl import ParseError, parse_file
from .engine import ALGORITHMS, CLOCKS, RepairError, RunConfig, dump_json, repair, write_run
from .localization import LocalizeError, localize
from .oracle import load_suite
from .simulator import InputMismatch, SimError, load_stimulus, simulate, write_traces

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3
SEED_ENV = "FLOWMEND_SEED"

log = logging.getLogger("flowmend")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_chart(path: str):
    try:
        return parse_file(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_suite(path: str):
    try:
        return load_suite(path)
    except (OSError, ValueError, KeyError, InputMismatch) as exc:
        raise InputError(f"bad test suite {path}: {exc}") from exc


def cmd_check(args) -> int:
    chart = _load_chart(args.model)
    print(f"{args.model}: ok ({len(chart.states)} states, "
          f"{len(chart.transitions)} transitions)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    chart = _load_chart(args.model)
    try:
        stim = load_stimulus(args.stim)
    except OSError as exc:
        raise InputError(f"cannot read {args.stim}: {exc.strerror or exc}") from exc
    try:
        result = simulate(chart, stim)
    except InputMismatch as exc:
        raise InputError(f"{args.stim}: {exc}") from exc
    write_traces(args.out, result.outputs)
    return EXIT_OK


def cmd_localize(args) -> int:
    chart = _load_chart(args.model)
    suite = _load_suite(args.tests)
    try:
        ranking = localize(chart, suite)
    except LocalizeError as exc:
        raise InputError(str(exc)) from exc
    Path(args.out).write_text(dump_json(ranking.to_json()), encoding="utf-8")
    return EXIT_OK


def cmd_repair(args) -> int:
    chart = _load_chart(args.model)
    suite = _load_suite(args.tests)
    seed = args.seed
    if os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise InputError(f"{SEED_ENV} must be an integer") from exc
    stop_when = None
    if args.stop_after is not None:
        limit = args.stop_after
        stop_when = lambda entry: entry.index + 1 >= limit  # noqa: E731
    try:
        cfg = RunConfig(budget=args.budget, local_tries=args.local_tries, eps=args.eps,
                        seed=seed, algo=args.algo, parallelism=args.parallelism,
                        clock=args.clock, stop_when=stop_when)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    try:
        ranking = localize(chart, suite)
        result = repair(chart, suite, ranking, cfg)
    except (LocalizeError, RepairError) as exc:
        raise InputError(str(exc)) from exc
    write_run(args.out, chart, result)
    print(f"{len(result.plausible)} plausible patch(es) from "
          f"{len(result.log.records)} candidates in {result.log.elapsed:.1f} s; "
          f"written to {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        spec = ExperimentSpec.load(args.spec)
        if args.parallelism is not None:
            spec.parallelism = args.parallelism
    except (OSError, ValueError, TypeError) as exc:
        raise InputError(f"bad experiment spec {args.spec}: {exc}") from exc
    try:
        report = run_experiment(spec, args.out)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from exc
    print(format_table(report.rows))
    crashed = sum(r.error is not None for r in report.runs)
    if crashed:
        print(f"{crashed} run(s) crashed; see run.json files", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = aggregate(args.dir)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    print(format_table(report.rows))
    return EXIT_OK


def cmd_cases(args) -> int:
    rows = [{"id": c.id, "faults": c.fault_count, "description": c.description,
             "buggy": str(c.buggy_file), "tests": str(c.tests_dir)} for c in build_corpus()]
    if args.json:
        print(json.dumps(rows, indent=1))
    else:
        for r in rows:
            print(f"{r['id']:<14}{r['faults']}  {r['description']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="flowmend", description="Search-based repair of timed statecharts.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="parse and validate a chart")
    p.add_argument("model")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="simulate a chart on a stimulus CSV")
    p.add_argument("model")
    p.add_argument("--stim", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("localize", help="rank components by suspiciousness")
    p.add_argument("model")
    p.add_argument("--tests", required=True)
    p.add_argument("--out", default="suspiciousness.json")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("repair", help="search for plausible patches")
    p.add_argument("model")
    p.add_argument("--tests", required=True)
    p.add_argument("--budget", type=float, default=120.0, help="seconds (default 120)")
    p.add_argument("--local-tries", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algo", choices=ALGORITHMS, default="flowrepair")
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--clock", choices=CLOCKS, default="virtual")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--stop-after", type=int, metavar="N",
                   help="stop once N distinct plausible patches are archived")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("experiment", help="run a multi-run experiment spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--parallelism", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="aggregate summary.csv files below a directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("cases", help="list the bundled benchmark cases")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_cases)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SimError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
