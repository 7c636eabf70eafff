"""Render figures from hllkit simulation-harness CSV reports.

The package only reads the documented CSV schemas; it never imports the
sketch library and never recomputes statistics.
"""

from sketchplots.csv_schema import (
    ERROR_STATS_COLUMNS,
    JOINT_COLUMNS,
    SchemaError,
    read_error_stats_csv,
    read_joint_csv,
)
from sketchplots.figures import FigureSpec, plot_error_fan, plot_joint_summary

__all__ = [
    "ERROR_STATS_COLUMNS",
    "JOINT_COLUMNS",
    "SchemaError",
    "read_error_stats_csv",
    "read_joint_csv",
    "FigureSpec",
    "plot_error_fan",
    "plot_joint_summary",
]

__version__ = "0.1.0"
