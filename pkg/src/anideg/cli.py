"""``anideg-ch`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from anideg import __version__
from anideg.errors import ParseError


def build_parser():
    p = argparse.ArgumentParser(
        prog="anideg-ch",
        description="Anisotropic Cahn-Hilliard with degenerate mobility: runs, studies and checks.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation from a config file")
    r.add_argument("--config", required=True, help="path to the run configuration")
    r.add_argument("--output", help="output directory (overrides [output] directory)")

    c = sub.add_parser("continuation", help="repeat a run for a decreasing list of delta values")
    c.add_argument("--config", required=True, help="path to the run configuration")
    c.add_argument("--deltas", required=True, help="comma separated, strictly decreasing, e.g. 0.2,0.1,0.05")
    c.add_argument("--output", help="output directory (overrides [output] directory)")
    c.add_argument("--workers", type=int, help="parallel runs (default: ANIDEG_THREADS or 1)")

    v = sub.add_parser("verify", help="run property suites on built-in fixtures")
    v.add_argument(
        "--suite",
        required=True,
        choices=("anisotropy", "material", "grid", "estimates", "all"),
        help="which suite to run",
    )
    v.add_argument(
        "--inject-indefinite",
        action="store_true",
        help="add an indefinite quadratic anisotropy fixture (expected to fail)",
    )

    d = sub.add_parser("plot-data", help="write plain-text plot data for a finished run")
    d.add_argument("--run", required=True, help="run output directory")
    return p


def _verify(args):
    from anideg.verify import run_suite

    rows = run_suite(args.suite, args.inject_indefinite)
    width = max(len(r.name) for r in rows)
    print(f"{'suite':<10} {'check':<{width}} {'value':>12} {'tol':>10}  status")
    for r in rows:
        print(r.line(width))
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    errors = [r.error for r in failed if r.error]
    if errors:
        print(errors[0].splitlines()[0], file=sys.stderr)
    elif failed:
        print(f"CheckFailed: {failed[0].name}", file=sys.stderr)
    return 1 if failed else 0


def _workers(args):
    import os

    cap = os.environ.get("ANIDEG_THREADS")
    n = args.workers
    if cap is not None:
        cap = max(1, int(cap))
        n = cap if n is None else min(n, cap)
    return n


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    from anideg import app

    try:
        if args.command == "run":
            code = app.cmd_run(args.config, args.output)
            if code:
                print("CheckFailed: see checks.csv", file=sys.stderr)
            return code
        if args.command == "continuation":
            code = app.cmd_continuation(args.config, args.deltas, args.output, _workers(args))
            if code:
                print("CheckFailed: see checks.csv", file=sys.stderr)
            return code
        if args.command == "verify":
            return _verify(args)
        for path in app.emit_plot_data(args.run):
            print(path)
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes one stderr line
        msg = str(exc).splitlines()[0] if str(exc) else ""
        print(f"{type(exc).__name__}: {msg}", file=sys.stderr)
        # 2: bad input (config, paths); 1: the computation itself failed
        return 2 if isinstance(exc, (OSError, ValueError, ParseError)) else 1


if __name__ == "__main__":
    sys.exit(main())
