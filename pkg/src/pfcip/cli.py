"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant violation.
"""

import argparse
import os
import sys

from . import app, io
from .config import ConfigError, RunConfig
from .stepper import InvariantViolation, LinearSolveFailed, NewtonDiverged

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pfcip",
        description="C0 interior penalty solver for the phase field "
                    "crystal equation")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one simulation")
    run.add_argument("--config", required=True)

    study = sub.add_parser("study", help="mesh-refinement convergence study")
    study.add_argument("--config", required=True)
    study.add_argument("--levels", required=True,
                       help="comma-separated cell counts, e.g. 8,16,32,64")

    check = sub.add_parser("check", help="validate a config file")
    check.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.load(args.config)
    except (ConfigError, OSError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "check":
        print("config ok")
        return EXIT_OK

    try:
        if args.command == "run":
            summary = app.run_experiment(config)
            print(f"completed {summary['steps']} steps to "
                  f"t={summary['final_time']:.6g}; "
                  f"F={summary['final_energy']:.8g}, "
                  f"mass={summary['final_mass']:.10g}; "
                  f"artifacts in {summary['output_dir']}")
        else:
            try:
                levels = [int(s) for s in args.levels.split(",")]
            except ValueError:
                print(f"invalid --levels {args.levels!r}", file=sys.stderr)
                return EXIT_CONFIG
            table = app.run_convergence_study(config, levels)
            outdir = app.output_dir(config)
            os.makedirs(outdir, exist_ok=True)
            io.write_rate_table_csv(os.path.join(outdir, "rates.csv"),
                                    table.rows)
            with open(os.path.join(outdir, "rates.txt"), "w") as f:
                f.write(str(table) + "\n")
            print(table)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NewtonDiverged, LinearSolveFailed) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
