"""Command line interface.

    pmx check FILE              compile, classify and report
    pmx run [options] FILE      compile and evaluate
    pmx dump --stage S FILE     print an intermediate program

Exit codes: 0 on success, 1 on diagnostics or runtime errors, 2 on usage or
I/O errors. Diagnostics go to stderr; program output goes to stdout.
"""

from __future__ import annotations

import argparse
import sys

from .interp import render_value
from .pipeline import DUMP_STAGES, classification_table, compile_source, \
    run_source
from .pretty import pretty
from .syntax import Diagnostics


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmx", description="Compiler and runtime for accelerated "
        "functional programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="compile and classify a program")
    check.add_argument("file")

    run = sub.add_parser("run", help="compile and evaluate a program")
    run.add_argument("file")
    run.add_argument("--mode", choices=("debug", "accel"), default="debug")
    run.add_argument("--workers", type=int, default=1,
                     help="simulated device workers (accel mode)")
    run.add_argument("--max-rank", type=int, default=3,
                     help="tensor rank bound enforced by the runtime checks")
    run.add_argument("--enable-runtime-checks", action="store_true",
                     help="run the assumption checks in accel mode too")
    run.add_argument("--check-determinism", action="store_true",
                     help="warn when a reduce result depends on the schedule")

    dump = sub.add_parser("dump", help="print an intermediate program")
    dump.add_argument("file")
    dump.add_argument("--stage", choices=DUMP_STAGES, required=True)
    return parser


def _read(path: str) -> str:
    try:
        with open(path, "r") as f:
            return f.read()
    except OSError as exc:
        print(f"pmx: {exc}", file=sys.stderr)
        raise SystemExit(2)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    source = _read(args.file)
    sys.setrecursionlimit(100_000)
    try:
        if args.command == "check":
            compiled = compile_source(source)
            rows = classification_table(compiled)
            print(f"{'binding':<16} {'backend':<10} {'functional':>10} "
                  f"{'loop':>6}")
            for name, verdict, p_fut, p_cu in rows:
                print(f"{name:<16} {verdict:<10} {p_fut:>10} {p_cu:>6}")
            print("ok")
            return 0
        if args.command == "dump":
            compiled = compile_source(source)
            print(pretty(compiled.dump(args.stage)))
            return 0
        assert args.command == "run"
        if args.workers < 1:
            print("pmx: --workers must be at least 1", file=sys.stderr)
            return 2
        result = run_source(
            source, mode=args.mode, workers=args.workers,
            max_rank=args.max_rank,
            runtime_checks=args.enable_runtime_checks or None
            if args.mode == "accel" else None,
            check_determinism=args.check_determinism,
            stdout=sys.stdout)
        if result.value != {}:
            print(render_value(result.value, result.heap))
        return 0
    except Diagnostics as diags:
        for d in diags.items:
            print(d.render(args.file), file=sys.stderr)
        return 1
    except BrokenPipeError:
        try:
            sys.stdout.close()
        except BrokenPipeError:
            pass
        return 0


if __name__ == "__main__":
    sys.exit(main())
