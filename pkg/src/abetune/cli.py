"""Command-line entry point: run experiments, re-emit reports, inspect feature models."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config_space import default_feature_model, enumerate_size, parse_feature_model
from .data import BUNDLED_DATASETS
from .errors import ConfigError, DataError
from .harness import ALL_METHODS, RECORD_FILE, ExperimentSpec, RunRecord, emit_reports, run_experiment
from .tuners import Goal

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _methods(text: str) -> list[str]:
    items = [m.strip() for m in text.replace(",", " ").split() if m.strip()]
    if items == ["all"]:
        return list(ALL_METHODS)
    bad = [m for m in items if m not in ALL_METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {', '.join(ALL_METHODS)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="abetune", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="cross-validate methods on datasets and write reports")
    run.add_argument(
        "--data", nargs="+", required=True, metavar="DATA",
        help=f"CSV paths or bundled names ({', '.join(BUNDLED_DATASETS)}), or 'all'",
    )
    run.add_argument("--methods", type=_methods, default=list(ALL_METHODS),
                     help="comma-separated subset of " + ",".join(ALL_METHODS))
    run.add_argument("--repeats", type=int, default=20)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--goal", choices=["mre", "sa"], default="mre")
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--jobs", type=int, default=1)

    rep = sub.add_parser("report", help="re-emit reports from a saved record")
    rep.add_argument("--record", required=True, type=Path)
    rep.add_argument("--out", required=True, type=Path)

    ins = sub.add_parser("inspect-config", help="print the size and structure of a feature model")
    ins.add_argument("--model", type=Path, help="feature-model text file (default: built-in model)")
    return p


def _cmd_run(args) -> int:
    if args.repeats < 1 or args.jobs < 1:
        raise UsageError("--repeats and --jobs must be >= 1")
    data = list(BUNDLED_DATASETS) if args.data == ["all"] else args.data
    try:
        spec = ExperimentSpec(tuple(data), tuple(args.methods), args.repeats, args.seed, Goal(args.goal), str(args.out))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    args.out.mkdir(parents=True, exist_ok=True)
    record = run_experiment(spec, jobs=args.jobs, record_path=args.out / RECORD_FILE)
    for name, message in record.errors.items():
        print(f"error: {name}: {message}", file=sys.stderr)
    if not record.units:
        return EXIT_DATA
    emit_reports(record, args.out)
    for dataset in record.datasets():
        print(f"{dataset}: {len(record.select(dataset))} fold results -> {args.out / dataset}")
    return EXIT_DATA if record.errors else EXIT_OK


def _cmd_report(args) -> int:
    if not args.record.is_file():
        raise DataError(f"{args.record}: no such record file")
    record = RunRecord.load(args.record)
    for path in emit_reports(record, args.out):
        print(path)
    return EXIT_OK


def _cmd_inspect(args) -> int:
    if args.model is None:
        model = default_feature_model()
    else:
        if not args.model.is_file():
            raise DataError(f"{args.model}: no such model file")
        model = parse_feature_model(args.model.read_text(encoding="utf-8"))
    print(f"raw variants: {enumerate_size(model)}")
    print(f"valid variants: {enumerate_size(model, respect_constraints=True)}")
    print(model.to_text(), end="")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"abetune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"run": _cmd_run, "report": _cmd_report, "inspect-config": _cmd_inspect}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"abetune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError, OSError) as exc:
        print(f"abetune: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).exception("internal error")
        print(f"abetune: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
