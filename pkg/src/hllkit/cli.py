"""Command-line front end for simulations, evaluations, and estimation.

Subcommands:

* ``simulate``    -- stream snapshots as multiplicity-vector CSV rows.
* ``eval-single`` -- relative-error statistics for one estimator.
* ``eval-joint``  -- joint ML vs inclusion-exclusion comparison table.
* ``estimate``    -- print every estimator's result for a saved sketch.

All commands exit 0 on success and 1 with a message on stderr on error.
"""

from __future__ import annotations

import argparse
import csv
import sys

import hllkit
from hllkit.core_sketch import HllSketch, SketchConfig, extract_counts
from hllkit.estimation import (
    improved_raw_estimate,
    ml_estimate,
    original_estimate,
)
from hllkit.simulation_harness import (
    DEFAULT_MAX_CARDINALITY,
    DEFAULT_RATIO,
    DEFAULT_SEED,
    ESTIMATOR_NAMES,
    SnapshotSchedule,
    eval_joint,
    eval_single,
    simulate_stream,
    write_error_stats_csv,
    write_joint_csv,
)


def _add_common_options(parser: argparse.ArgumentParser, default_runs: int) -> None:
    parser.add_argument("--p", type=int, default=12, help="index bits (default 12)")
    parser.add_argument("--q", type=int, default=20, help="rank bits (default 20)")
    parser.add_argument(
        "--runs", type=int, default=default_runs, help=f"default {default_runs}"
    )
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out", default=None, help="CSV output path (default stdout)")


def _add_schedule_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--max-n",
        type=int,
        default=DEFAULT_MAX_CARDINALITY,
        help="largest cardinality on the snapshot grid",
    )
    parser.add_argument(
        "--ratio",
        type=float,
        default=DEFAULT_RATIO,
        help="geometric grid spacing (default 10^0.05)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hllkit", description="cardinality sketch simulation harness"
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {hllkit.__version__}"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser(
        "simulate", help="write multiplicity-vector snapshots of random streams"
    )
    _add_common_options(simulate, default_runs=1)
    _add_schedule_options(simulate)
    simulate.add_argument(
        "--via-compress",
        action="store_true",
        help="record at p=22, q=42 and compress each snapshot down",
    )

    eval_single_cmd = subparsers.add_parser(
        "eval-single", help="relative-error statistics for one estimator"
    )
    _add_common_options(eval_single_cmd, default_runs=1000)
    _add_schedule_options(eval_single_cmd)
    eval_single_cmd.add_argument(
        "--estimator", choices=ESTIMATOR_NAMES, default="improved-raw"
    )
    eval_single_cmd.add_argument(
        "--tables",
        action="store_true",
        help="use precomputed interpolation tables with improved-raw",
    )
    eval_single_cmd.add_argument("--via-compress", action="store_true")

    eval_joint_cmd = subparsers.add_parser(
        "eval-joint", help="compare joint ML against inclusion-exclusion"
    )
    eval_joint_cmd.add_argument(
        "configs",
        nargs="+",
        metavar="A,B,X",
        help="true cardinalities of A-only, B-only, and shared elements",
    )
    _add_common_options(eval_joint_cmd, default_runs=200)

    estimate = subparsers.add_parser(
        "estimate", help="print every estimator's result for a saved sketch"
    )
    estimate.add_argument("sketch", help="path to a serialized sketch file")

    return parser


def _parse_triple(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"expected A,B,X with three integers, got {text!r}")
    a, b, x = (int(part) for part in parts)
    if min(a, b, x) < 0:
        raise ValueError(f"cardinalities must be non-negative, got {text!r}")
    return a, b, x


def _run_simulate(args) -> int:
    config = SketchConfig(args.p, args.q)
    schedule = SnapshotSchedule(args.max_n, args.ratio)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        out.write(f"# seed={args.seed} generator=pcg64 version={hllkit.__version__}\n")
        writer = csv.writer(out)
        writer.writerow(
            ["run", "n"] + [f"c_{k}" for k in range(config.q + 2)]
        )
        for run in range(args.runs):
            stream = simulate_stream(
                [args.seed, run], config, schedule, via_compress=args.via_compress
            )
            for n, counts in stream:
                writer.writerow([run, n] + [int(c) for c in counts.counts])
    finally:
        if args.out:
            out.close()
    return 0


def _run_eval_single(args) -> int:
    estimator = args.estimator
    if args.tables:
        if estimator != "improved-raw":
            raise ValueError("--tables applies only to the improved-raw estimator")
        estimator = "improved-raw-tables"
    schedule = SnapshotSchedule(args.max_n, args.ratio)
    result = eval_single(
        estimator,
        args.p,
        args.q,
        args.runs,
        schedule,
        args.seed,
        via_compress=args.via_compress,
    )
    if args.out:
        write_error_stats_csv(args.out, result.rows, args.seed)
    else:
        write_error_stats_csv(sys.stdout, result.rows, args.seed)
    return 0


def _run_eval_joint(args) -> int:
    configs = [_parse_triple(text) for text in args.configs]
    rows = eval_joint(configs, args.p, args.q, args.runs, args.seed)
    if args.out:
        write_joint_csv(args.out, rows, args.seed)
    else:
        write_joint_csv(sys.stdout, rows, args.seed)
    return 0


def _run_estimate(args) -> int:
    sketch = HllSketch.load(args.sketch)
    counts = extract_counts(sketch)
    estimators = [
        ("original", lambda: original_estimate(counts, sketch.config)),
        ("improved-raw", lambda: improved_raw_estimate(counts)),
        ("ml", lambda: ml_estimate(counts)),
    ]
    for name, run in estimators:
        try:
            print(f"{name}: {run()}")
        except ValueError as error:
            print(f"{name}: error: {error}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _run_simulate,
        "eval-single": _run_eval_single,
        "eval-joint": _run_eval_joint,
        "estimate": _run_estimate,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
