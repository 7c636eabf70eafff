"""Readers for the two harness CSV report schemas.

Files start with zero or more ``#``-prefixed metadata lines (key=value
pairs), then an exact header row, then data rows. Integer columns are
listed per schema; every other column is a float parsed verbatim, so
values survive a write/read cycle bit-exactly.
"""

import csv
from pathlib import Path

ERROR_STATS_COLUMNS = (
    "true_cardinality",
    "runs",
    "mean",
    "stdev",
    "median",
    "q01",
    "q05",
    "q95",
    "q99",
)

JOINT_COLUMNS = ("card_a", "card_b", "card_x", "runs") + tuple(
    name
    for quantity in ("a", "b", "x", "union")
    for name in (
        f"ie_{quantity}_mean",
        f"ie_{quantity}_stdev",
        f"ie_{quantity}_rmse",
        f"ml_{quantity}_mean",
        f"ml_{quantity}_stdev",
        f"ml_{quantity}_rmse",
        f"improvement_{quantity}",
    )
)

_INT_COLUMNS = frozenset({"card_a", "card_b", "card_x", "runs", "true_cardinality"})


class SchemaError(ValueError):
    """The file does not match the expected harness CSV schema."""


def _read_table(path, columns):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    metadata = {}
    lines = text.splitlines()
    body_start = 0
    for line in lines:
        if not line.startswith("#"):
            break
        body_start += 1
        for part in line.lstrip("#").split():
            key, _, value = part.partition("=")
            if value:
                metadata[key] = value
    reader = csv.reader(lines[body_start:])
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise SchemaError(f"{path}: missing header row") from None
    if header != columns:
        missing = set(columns) - set(header)
        detail = f"missing columns {sorted(missing)}" if missing else f"got {header}"
        raise SchemaError(f"{path}: header mismatch, {detail}")
    rows = []
    for record in reader:
        if not record:
            continue
        if len(record) != len(columns):
            raise SchemaError(f"{path}: row has {len(record)} fields, expected {len(columns)}")
        try:
            rows.append({
                name: int(value) if name in _INT_COLUMNS else float(value)
                for name, value in zip(columns, record)
            })
        except ValueError as exc:
            raise SchemaError(f"{path}: unparsable value: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows, metadata


def read_error_stats_csv(path):
    """Rows and metadata of a single-estimator error statistics report."""
    return _read_table(path, ERROR_STATS_COLUMNS)


def read_joint_csv(path):
    """Rows and metadata of a joint-estimation comparison report."""
    return _read_table(path, JOINT_COLUMNS)
