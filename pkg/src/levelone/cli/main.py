"""Command line entry point.

Exit codes: 0 success, 2 invalid input or Stokes pattern, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources

from ..core_algebra import default_precision
from .io import InputError, emit_json
from .pipeline import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, FORMATS, ROUTES, JobConfig, PipelineError, render_text, run_pipeline


def example_names() -> list:
    data = resources.files("levelone") / "data"
    return sorted(p.name[:-5] for p in data.iterdir() if p.name.endswith(".json"))


def example_text(name: str) -> str:
    if name not in example_names():
        raise InputError("example", f"unknown example {name!r}; try 'levelone examples list'")
    return (resources.files("levelone") / "data" / f"{name}.json").read_text()


def _job_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--direction", action="append", metavar="DEG",
                   help="Stokes direction in degrees, repeatable; 'all' (default) uses every direction")
    p.add_argument("--order", type=int, default=40, help="truncation order N (default 40)")
    p.add_argument("--precision", type=int, default=None, help="working precision in bits (default 256)")
    p.add_argument("--route", choices=ROUTES, default="both", help="Stokes route (default both)")
    p.add_argument("--format", choices=FORMATS, default="json", help="output format (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelone", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("analyze", help="analyze a system or equation given as JSON")
    p.add_argument("file", help="input JSON file, or '-' for stdin")
    _job_options(p)
    ex = sub.add_parser("examples", help="bundled examples")
    exsub = ex.add_subparsers(dest="action", required=True)
    exsub.add_parser("list", help="list bundled examples")
    run = exsub.add_parser("run", help="analyze a bundled example")
    run.add_argument("name")
    _job_options(run)
    st = sub.add_parser("selftest", help="run the acceptance criteria")
    st.add_argument("--precision", type=int, default=256)
    return parser


def _directions(args):
    if not args.direction or args.direction == ["all"]:
        return "all"
    if "all" in args.direction:
        raise InputError("direction", "'all' cannot be combined with explicit angles")
    return args.direction


def _run_job(args, source) -> int:
    cfg = JobConfig(source, directions=_directions(args), order=args.order,
                    precision=args.precision or default_precision(), route=args.route, format=args.format)
    report = run_pipeline(cfg)
    sys.stdout.write(emit_json(report) + "\n" if cfg.format == "json" else render_text(report))
    return EXIT_OK


def _selftest(args) -> int:
    from ..acceptance import run_all
    results = run_all(args.precision, echo=print)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            source = sys.stdin.read() if args.file == "-" else args.file
            return _run_job(args, source)
        if args.command == "examples":
            if args.action == "list":
                for name in example_names():
                    print(name)
                return EXIT_OK
            return _run_job(args, example_text(args.name))
        return _selftest(args)
    except PipelineError as err:
        print(f"levelone: error: {err}", file=sys.stderr)
        return err.exit_code
    except InputError as err:
        print(f"levelone: error: [options] {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
