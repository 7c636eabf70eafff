"""Figure builders over the harness CSV schemas.

Both builders draw exactly the values read from the CSV. There is no
aggregation, rescaling, or recomputation anywhere in this module; a
sentinel planted in an input column appears verbatim in the rendered
artists' data arrays.
"""

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from sketchplots.csv_schema import (
    ERROR_STATS_COLUMNS,
    SchemaError,
    read_error_stats_csv,
    read_joint_csv,
)

# fixed style so repeated renders of the same CSV are byte-identical
_STYLE = {
    "figure.figsize": (8.0, 4.5),
    "figure.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linewidth": 0.5,
    "axes.axisbelow": True,
    "svg.hashsalt": "sketchplots",
    "path.simplify": False,
}

_MEAN_COLOR = "#1f6fb4"
_MEDIAN_COLOR = "#c44e52"
_BAND_COLOR = "#1f6fb4"
_BAND_ALPHAS = (0.12, 0.28)
_IE_COLOR = "#9a9a9a"
_ML_COLOR = "#1f6fb4"

_QUANTITY_LABELS = {"a": "A only", "b": "B only", "x": "intersection", "union": "union"}


@dataclass(frozen=True)
class FigureSpec:
    """What to read, where to render, and how to dress the axes."""

    input_csv: Path
    output_image: Path
    title: str | None = None
    y_limits: tuple[float, float] | None = None
    bands: tuple[tuple[str, str], ...] = (("q01", "q99"), ("q05", "q95"))

    def __post_init__(self):
        for low, high in self.bands:
            for column in (low, high):
                if column not in ERROR_STATS_COLUMNS:
                    raise SchemaError(f"unknown band column {column!r}")


def _save(fig, spec):
    path = Path(spec.output_image)
    suffix = path.suffix.lower()
    if suffix == ".svg":
        fig.savefig(path, metadata={"Date": None})
    elif suffix == ".pdf":
        fig.savefig(path, metadata={"CreationDate": None})
    else:
        fig.savefig(path)


def plot_error_fan(spec: FigureSpec):
    """Relative-error fan chart over cardinality; returns the figure.

    One line each for mean and median, one shaded band per configured
    percentile pair, log-scaled cardinality axis.
    """
    rows, metadata = read_error_stats_csv(spec.input_csv)
    x = [row["true_cardinality"] for row in rows]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for (low, high), alpha in zip(spec.bands, _BAND_ALPHAS * len(spec.bands)):
            ax.fill_between(
                x,
                [row[low] for row in rows],
                [row[high] for row in rows],
                color=_BAND_COLOR,
                alpha=alpha,
                linewidth=0.0,
                label=f"{low}–{high}",
            )
        ax.plot(x, [row["mean"] for row in rows], color=_MEAN_COLOR, label="mean")
        ax.plot(
            x,
            [row["median"] for row in rows],
            color=_MEDIAN_COLOR,
            linestyle="--",
            label="median",
        )
        if min(x) > 0:
            ax.set_xscale("log")
        ax.set_xlabel("true cardinality")
        ax.set_ylabel("relative error")
        if spec.y_limits is not None:
            ax.set_ylim(*spec.y_limits)
        if spec.title:
            ax.set_title(spec.title)
        runs = rows[0]["runs"]
        seed = metadata.get("seed", "?")
        ax.legend(loc="upper right", title=f"{runs} runs, seed {seed}")
        fig.tight_layout()
        _save(fig, spec)
    return fig


def plot_joint_summary(spec: FigureSpec):
    """Grouped rmse bars per overlap config; returns the figure.

    Each config row becomes one group with an inclusion-exclusion and a
    joint-ML bar per estimated quantity, annotated with the improvement
    ratio from the CSV.
    """
    rows, metadata = read_joint_csv(spec.input_csv)
    quantities = ("a", "b", "x", "union")
    pair_width = 0.8
    bar_width = pair_width / 2.0
    group_stride = len(quantities) + 1.0
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ticks, tick_labels = [], []
        for row_index, row in enumerate(rows):
            base = row_index * group_stride
            for k, quantity in enumerate(quantities):
                center = base + k
                ie_rmse = row[f"ie_{quantity}_rmse"]
                ml_rmse = row[f"ml_{quantity}_rmse"]
                ax.bar(
                    center - bar_width / 2.0,
                    ie_rmse,
                    bar_width,
                    color=_IE_COLOR,
                    label="inclusion–exclusion" if row_index == k == 0 else None,
                )
                ax.bar(
                    center + bar_width / 2.0,
                    ml_rmse,
                    bar_width,
                    color=_ML_COLOR,
                    label="joint ML" if row_index == k == 0 else None,
                )
                ax.annotate(
                    f"{row[f'improvement_{quantity}']:.3f}",
                    (center, max(ie_rmse, ml_rmse)),
                    textcoords="offset points",
                    xytext=(0.0, 2.0),
                    ha="center",
                    fontsize=7.0,
                    rotation=90.0,
                )
            ticks.append(base + (len(quantities) - 1) / 2.0)
            tick_labels.append(f"{row['card_a']:g}\n{row['card_b']:g}\n{row['card_x']:g}")
        ax.set_xticks(ticks, tick_labels, fontsize=8.0)
        ax.set_xlabel("config (A only / B only / intersection)")
        ax.set_ylabel("rmse of relative error")
        if all(
            row[f"{method}_{quantity}_rmse"] > 0
            for row in rows
            for method in ("ie", "ml")
            for quantity in quantities
        ):
            ax.set_yscale("log")
        if spec.y_limits is not None:
            ax.set_ylim(*spec.y_limits)
        if spec.title:
            ax.set_title(spec.title)
        runs = rows[0]["runs"]
        seed = metadata.get("seed", "?")
        ax.legend(loc="upper right", title=f"{runs} pairs/config, seed {seed}")
        secondary = ax.secondary_xaxis("top")
        secondary.set_xticks(
            [row_index * group_stride + k for row_index in range(len(rows)) for k in range(4)],
            [_QUANTITY_LABELS[quantity] for _ in rows for quantity in quantities],
            fontsize=6.0,
            rotation=45.0,
        )
        fig.tight_layout()
        _save(fig, spec)
    return fig
