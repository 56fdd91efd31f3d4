"""Command line entry point: ``run``, ``report`` and ``list-experiments``.

Exit codes: 0 pass, 1 failed check, 2 configuration or precondition error,
3 numerical failure (singularity, degeneracy, overflow).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .errors import NumericError, PreconditionError
from .experiments import describe_experiments, run_experiment
from .records import MalformedRecordError, read_records, write_records
from .report import MODES, check_records
from .rng import THREADS_ENV

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _threads_arg(value: str):
    if value == "auto":
        return value
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("threads must be a positive integer or 'auto'") from None
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be a positive integer or 'auto'")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsqlab", description="Random-design least squares numerical lab")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    run.add_argument("--threads", type=_threads_arg, default=None,
                     help=f"worker threads or 'auto' (default: config, then ${THREADS_ENV}, then 1)")
    run.add_argument("--out", type=Path, default=None, help="output path (default: config output.path)")
    run.add_argument("--format", choices=("json-lines", "csv"), default=None)
    run.add_argument("--timing", action="store_true", help="record wall_time_ms (breaks byte-identical reruns)")
    run.add_argument("--quiet", action="store_true", help="do not echo record summaries")

    rep = sub.add_parser("report", help="check result files")
    rep.add_argument("--mode", required=True, choices=MODES)
    rep.add_argument("--invert", action="store_true", help="swap lower and upper bound roles")
    rep.add_argument("files", nargs="+", type=Path)

    sub.add_parser("list-experiments", help="show the experiment registry")
    return parser


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    records = run_experiment(cfg, seed=args.seed, threads=args.threads, timing=args.timing)
    out = args.out or cfg.output_path
    fmt = args.format or cfg.output_format
    if out is not None:
        write_records(records, out, fmt)
    if not args.quiet:
        for rec in records:
            print(rec.summary())
    return EXIT_OK


def cmd_report(args) -> int:
    records = []
    for path in args.files:
        try:
            records += read_records(path)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    results = check_records(records, args.mode, args.invert)
    for res in results:
        print(res.line())
    n_fail = sum(not r.passed for r in results)
    print(f"{args.mode}: {len(results) - n_fail}/{len(results)} checks passed")
    if not results:
        print("no record carried anything to check in this mode")
        return EXIT_FAIL
    return EXIT_FAIL if n_fail else EXIT_OK


def cmd_list(args) -> int:
    rows = describe_experiments()
    width = max(len(name) for name, _ in rows)
    for name, desc in rows:
        print(f"{name:<{width}}  {desc}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "report": cmd_report, "list-experiments": cmd_list}[args.command]
    try:
        return handler(args)
    except (ConfigError, MalformedRecordError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        cond = f" [condition: {exc.condition}]" if exc.condition else ""
        print(f"precondition failed: {exc}{cond}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ArithmeticError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
