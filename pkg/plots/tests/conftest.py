from pathlib import Path

import matplotlib.pyplot as plt
import pytest

from sketchplots.csv_schema import ERROR_STATS_COLUMNS, JOINT_COLUMNS

RESULTS_DIR = Path(__file__).resolve().parents[2] / "results"


@pytest.fixture(autouse=True)
def close_figures():
    yield
    plt.close("all")


def error_stats_csv(path, rows, seed=0):
    """Write a synthetic error-statistics report; rows are dicts."""
    lines = [f"# seed={seed} generator=pcg64 version=0.1.0"]
    lines.append(",".join(ERROR_STATS_COLUMNS))
    for row in rows:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in ERROR_STATS_COLUMNS))
    path.write_text("\n".join(lines) + "\n")
    return path


def error_stats_row(n, **overrides):
    row = {
        "true_cardinality": n,
        "runs": 100,
        "mean": 0.001,
        "stdev": 0.016,
        "median": 0.0005,
        "q01": -0.04,
        "q05": -0.025,
        "q95": 0.026,
        "q99": 0.041,
    }
    row.update(overrides)
    return row


def joint_csv(path, rows, seed=0):
    lines = [f"# seed={seed} generator=pcg64 version=0.1.0"]
    lines.append(",".join(JOINT_COLUMNS))
    for row in rows:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in JOINT_COLUMNS))
    path.write_text("\n".join(lines) + "\n")
    return path


def joint_row(card_a=1000, card_b=1000, card_x=500, **overrides):
    row = {"card_a": card_a, "card_b": card_b, "card_x": card_x, "runs": 200}
    for quantity in ("a", "b", "x", "union"):
        row[f"ie_{quantity}_mean"] = 0.002
        row[f"ie_{quantity}_stdev"] = 0.03
        row[f"ie_{quantity}_rmse"] = 0.0300666
        row[f"ml_{quantity}_mean"] = 0.001
        row[f"ml_{quantity}_stdev"] = 0.02
        row[f"ml_{quantity}_rmse"] = 0.020025
        row[f"improvement_{quantity}"] = 1.5015
    row.update(overrides)
    return row
