"""Command-line entry points for the figure builders."""

import argparse
import sys
from pathlib import Path

import matplotlib.pyplot as plt

from sketchplots.csv_schema import SchemaError
from sketchplots.figures import FigureSpec, plot_error_fan, plot_joint_summary


def _add_figure_arguments(parser):
    parser.add_argument("input_csv", type=Path, help="harness CSV report to read")
    parser.add_argument("output_image", type=Path, help="figure file to write (.svg/.pdf/.png)")
    parser.add_argument("--title", default=None)
    parser.add_argument(
        "--ylim",
        nargs=2,
        type=float,
        default=None,
        metavar=("LOW", "HIGH"),
        help="fixed y-axis limits",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sketchplots",
        description="Render figures from hllkit simulation-harness CSV reports.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    fan = subparsers.add_parser(
        "error-fan", help="relative-error fan chart from an error-statistics CSV"
    )
    _add_figure_arguments(fan)
    fan.add_argument(
        "--band",
        action="append",
        dest="bands",
        metavar="LOW:HIGH",
        help="percentile band as a column pair, e.g. q05:q95 (repeatable)",
    )

    joint = subparsers.add_parser(
        "joint-summary", help="rmse comparison bars from a joint-comparison CSV"
    )
    _add_figure_arguments(joint)
    return parser


def _parse_band(text):
    low, sep, high = text.partition(":")
    if not sep or not low or not high:
        raise SchemaError(f"band must be LOW:HIGH, got {text!r}")
    return low, high


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec_kwargs = dict(
            input_csv=args.input_csv,
            output_image=args.output_image,
            title=args.title,
            y_limits=tuple(args.ylim) if args.ylim else None,
        )
        if args.command == "error-fan":
            if args.bands:
                spec_kwargs["bands"] = tuple(_parse_band(text) for text in args.bands)
            figure = plot_error_fan(FigureSpec(**spec_kwargs))
        else:
            figure = plot_joint_summary(FigureSpec(**spec_kwargs))
        plt.close(figure)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
