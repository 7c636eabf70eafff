"""Reproducible estimator-error simulations and CSV reporting.

Streams of pseudo-random 64-bit values stand in for hashed items (the
uniform-hash assumption). Every result is a pure function of the
supplied seed and parameters: per-run generators are spawned as
``default_rng([seed, ...])`` with distinct tags, so runs are independent
and order does not matter. Insertion goes through a compiled tracked
loop by default; ``fast=False`` selects the pure-Python reference
implementation, which draws the identical stream and produces identical
snapshots.

CSV files carry one metadata comment line, then a header row, then data
rows with full round-trip float precision.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields as dataclass_fields
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

import hllkit
from hllkit.core_sketch import (
    HllSketch,
    MultiplicityVector,
    SketchConfig,
    TrackedSketch,
    compress,
    merge,
)
from hllkit.estimation import (
    MlOptions,
    improved_raw_estimate,
    ml_estimate,
    ml_estimate_details,
    original_estimate,
)
from hllkit.joint_estimation import estimate_joint, inclusion_exclusion_estimates
from hllkit.special_functions import SigmaTauTables

DEFAULT_RATIO = 10.0 ** 0.05
DEFAULT_MAX_CARDINALITY = 10_000_000
DEFAULT_SEED = 0
GENERATOR_NAME = "pcg64"

# recording configuration for the high-precision record-then-compress mode
RECORDING_CONFIG = SketchConfig(22, 42)

ESTIMATOR_NAMES = ("original", "improved-raw", "improved-raw-tables", "ml")

_POOL_TAG = 0
_PAIR_TAG = 1

# draw hash chunks of at most this many values at a time
_MAX_CHUNK = 4_000_000


@dataclass(frozen=True)
class SnapshotSchedule:
    """Cardinality grid: 1..10, then a geometric series from 10 upward.

    Successive values are multiplied by ``ratio`` and rounded to
    integers, dropping duplicates, up to ``max_cardinality``. With
    ``include_zero`` the empty-sketch snapshot is emitted first.
    """

    max_cardinality: int
    ratio: float = DEFAULT_RATIO
    include_zero: bool = False

    def __post_init__(self):
        if self.max_cardinality < 1:
            raise ValueError(f"max_cardinality must be >= 1, got {self.max_cardinality}")
        if not self.ratio > 1.0:
            raise ValueError(f"ratio must be > 1, got {self.ratio}")

    def points(self) -> list[int]:
        pts = [0] if self.include_zero else []
        pts.extend(range(1, min(10, self.max_cardinality) + 1))
        value = 10.0
        while True:
            value *= self.ratio
            rounded = round(value)
            if rounded > self.max_cardinality:
                break
            if rounded > pts[-1]:
                pts.append(rounded)
        return pts


def simulate_stream(
    seed,
    config: SketchConfig,
    schedule: SnapshotSchedule,
    *,
    fast: bool = True,
    via_compress: bool = False,
) -> Iterator[tuple[int, MultiplicityVector]]:
    """Feed a random stream into a sketch, yielding snapshots on the grid.

    Yields ``(n, multiplicity vector)`` at every schedule point;
    deterministic for a fixed seed, and identical between the compiled
    and pure-Python paths. With ``via_compress`` the stream is recorded
    at the high-precision configuration (p=22, q=42) and each snapshot
    is compressed down to ``config``, which by losslessness matches
    direct recording of the same stream.
    """
    recording = RECORDING_CONFIG if via_compress else config
    if via_compress and config.p > recording.p:
        raise ValueError(
            f"via_compress records at p={recording.p}; cannot serve p={config.p}"
        )
    rng = np.random.default_rng(seed)

    if fast:
        from hllkit._kernels import tracked_insert_many

        registers = np.zeros(recording.m, dtype=np.uint8)
        state = np.zeros(recording.q + 3, dtype=np.int64)
        state[1] = recording.m

        def advance(count: int) -> None:
            remaining = count
            while remaining > 0:
                size = min(remaining, _MAX_CHUNK)
                hashes = rng.integers(0, 1 << 64, size=size, dtype=np.uint64)
                tracked_insert_many(registers, state, hashes, recording.p, recording.q)
                remaining -= size

        def snapshot() -> MultiplicityVector:
            if via_compress:
                small = compress(HllSketch(recording, registers), config)
                counts = np.bincount(small.registers, minlength=config.q + 2)
                return MultiplicityVector(counts.astype(np.int64))
            return MultiplicityVector(state[1:].copy())

    else:
        tracked = TrackedSketch.empty(recording)

        def advance(count: int) -> None:
            remaining = count
            while remaining > 0:
                size = min(remaining, _MAX_CHUNK)
                hashes = rng.integers(0, 1 << 64, size=size, dtype=np.uint64)
                for h in hashes.tolist():
                    tracked.insert_hash(h)
                remaining -= size

        def snapshot() -> MultiplicityVector:
            if via_compress:
                small = compress(tracked.sketch, config)
                counts = np.bincount(small.registers, minlength=config.q + 2)
                return MultiplicityVector(counts.astype(np.int64))
            return tracked.multiplicity

    previous = 0
    for n in schedule.points():
        advance(n - previous)
        previous = n
        yield n, snapshot()


@dataclass(frozen=True)
class ErrorStatsRow:
    """Relative-error distribution summary at one grid cardinality."""

    true_cardinality: int
    runs: int
    mean: float
    stdev: float
    median: float
    q01: float
    q05: float
    q95: float
    q99: float

    def __post_init__(self):
        quantiles = (self.q01, self.q05, self.median, self.q95, self.q99)
        if any(a > b for a, b in zip(quantiles, quantiles[1:])):
            raise ValueError(f"quantiles out of order: {quantiles}")


ERROR_STATS_HEADER = tuple(f.name for f in dataclass_fields(ErrorStatsRow))


@dataclass
class EvalSingleResult:
    """Aggregated rows plus optional per-run samples and diagnostics.

    ``samples[j, r]`` is the relative error at grid point ``j`` in run
    ``r`` (populated only when requested). ``max_ml_iterations`` is the
    largest secant iteration count seen across every estimate in the
    evaluation, 0 for non-likelihood estimators.
    """

    rows: list[ErrorStatsRow]
    points: list[int]
    samples: np.ndarray | None = None
    max_ml_iterations: int = 0


def _resolve_estimator(
    estimator, config: SketchConfig, opts: MlOptions
) -> Callable[[MultiplicityVector], tuple[float, int]]:
    """Map an estimator name (or callable) to ``counts -> (value, iterations)``."""
    if callable(estimator):
        return lambda c: (estimator(c), 0)
    if estimator == "original":
        return lambda c: (original_estimate(c, config), 0)
    if estimator == "improved-raw":
        return lambda c: (improved_raw_estimate(c), 0)
    if estimator == "improved-raw-tables":
        tables = SigmaTauTables.for_register_count(config.m)
        return lambda c: (improved_raw_estimate(c, tables), 0)
    if estimator == "ml":

        def run_ml(c: MultiplicityVector) -> tuple[float, int]:
            details = ml_estimate_details(c, opts)
            return details.value, details.iterations

        return run_ml
    raise ValueError(f"unknown estimator {estimator!r}; known: {ESTIMATOR_NAMES}")


def eval_single_multi(
    estimators: Sequence,
    p: int,
    q: int,
    runs: int,
    schedule: SnapshotSchedule | None = None,
    seed: int = DEFAULT_SEED,
    *,
    via_compress: bool = False,
    keep_samples: bool = False,
    opts: MlOptions = MlOptions(),
    fast: bool = True,
) -> list[EvalSingleResult]:
    """Evaluate several estimators over one shared set of simulated streams.

    All estimators see the identical stream snapshots run for run, so
    their error distributions are directly comparable. Returns one
    result per estimator, in input order.
    """
    config = SketchConfig(p, q)
    if schedule is None:
        schedule = SnapshotSchedule(DEFAULT_MAX_CARDINALITY)
    points = schedule.points()
    resolved = [_resolve_estimator(e, config, opts) for e in estimators]
    errors = [np.empty((len(points), runs)) for _ in resolved]
    max_iterations = [0] * len(resolved)
    for run in range(runs):
        stream = simulate_stream(
            [seed, run], config, schedule, fast=fast, via_compress=via_compress
        )
        for j, (n, counts) in enumerate(stream):
            for i, estimate in enumerate(resolved):
                value, iterations = estimate(counts)
                errors[i][j, run] = (value - n) / max(n, 1)
                if iterations > max_iterations[i]:
                    max_iterations[i] = iterations
    results = []
    for i in range(len(resolved)):
        rows = []
        if runs > 0:
            for j, n in enumerate(points):
                row_errors = errors[i][j]
                q01, q05, median, q95, q99 = np.percentile(row_errors, [1, 5, 50, 95, 99])
                rows.append(
                    ErrorStatsRow(
                        true_cardinality=n,
                        runs=runs,
                        mean=float(row_errors.mean()),
                        stdev=float(row_errors.std(ddof=0)),
                        median=float(median),
                        q01=float(q01),
                        q05=float(q05),
                        q95=float(q95),
                        q99=float(q99),
                    )
                )
        results.append(
            EvalSingleResult(
                rows=rows,
                points=list(points),
                samples=errors[i] if keep_samples else None,
                max_ml_iterations=max_iterations[i],
            )
        )
    return results


def eval_single(
    estimator,
    p: int,
    q: int,
    runs: int,
    schedule: SnapshotSchedule | None = None,
    seed: int = DEFAULT_SEED,
    out=None,
    *,
    via_compress: bool = False,
    keep_samples: bool = False,
    opts: MlOptions = MlOptions(),
    fast: bool = True,
) -> EvalSingleResult:
    """Evaluate one estimator's relative-error distribution over the grid.

    Writes an :class:`ErrorStatsRow` CSV to ``out`` when given. With
    ``runs=0`` the CSV holds only metadata and header.
    """
    result = eval_single_multi(
        [estimator],
        p,
        q,
        runs,
        schedule,
        seed,
        via_compress=via_compress,
        keep_samples=keep_samples,
        opts=opts,
        fast=fast,
    )[0]
    if out is not None:
        write_error_stats_csv(out, result.rows, seed)
    return result


def build_pool(
    config: SketchConfig,
    entry_counts: Mapping[int, int],
    seed: int = DEFAULT_SEED,
    *,
    fast: bool = True,
) -> dict[int, list[np.ndarray]]:
    """Record independent register arrays: ``entry_counts[n]`` arrays per n."""
    pool: dict[int, list[np.ndarray]] = {}
    for n in sorted(entry_counts):
        entries = []
        for index in range(entry_counts[n]):
            rng = np.random.default_rng([seed, _POOL_TAG, n, index])
            if fast:
                from hllkit._kernels import tracked_insert_many

                registers = np.zeros(config.m, dtype=np.uint8)
                state = np.zeros(config.q + 3, dtype=np.int64)
                state[1] = config.m
                remaining = n
                while remaining > 0:
                    size = min(remaining, _MAX_CHUNK)
                    hashes = rng.integers(0, 1 << 64, size=size, dtype=np.uint64)
                    tracked_insert_many(registers, state, hashes, config.p, config.q)
                    remaining -= size
            else:
                tracked = TrackedSketch.empty(config)
                for h in rng.integers(0, 1 << 64, size=n, dtype=np.uint64).tolist():
                    tracked.insert_hash(h)
                registers = tracked.sketch.registers
            entries.append(registers)
        pool[n] = entries
    return pool


def make_sketch_with_cardinality(
    n: int, config: SketchConfig, seed, pool: Mapping[int, Sequence[np.ndarray]]
) -> HllSketch:
    """Draw a pool entry for cardinality ``n`` and shuffle its registers.

    Register indices are assigned uniformly by the hash, so a seeded
    permutation of recorded registers is distributed like a fresh
    recording; the multiplicity vector is preserved exactly.
    """
    entries = pool.get(n)
    if not entries:
        raise ValueError(f"pool has no register data for cardinality {n}")
    rng = np.random.default_rng(seed)
    entry = entries[int(rng.integers(len(entries)))]
    if len(entry) != config.m:
        raise ValueError(
            f"pool entry for {n} has {len(entry)} registers, config needs {config.m}"
        )
    permutation = rng.permutation(config.m)
    return HllSketch(config, entry[permutation])


def _consistent_rmse(mean: float, stdev: float, rmse: float) -> bool:
    return abs(rmse * rmse - (mean * mean + stdev * stdev)) <= 1e-9 * max(
        rmse * rmse, 1e-300
    )


@dataclass(frozen=True)
class JointConfigRow:
    """Error summary for one (A-only, B-only, intersection) configuration.

    For each estimated quantity (a, b, x, union) both methods report the
    mean, population standard deviation, and rmse of the relative error;
    ``improvement_*`` is the rmse ratio inclusion-exclusion / joint ML,
    so values above 1 mean the joint estimator wins.
    """

    card_a: int
    card_b: int
    card_x: int
    runs: int
    ie_a_mean: float
    ie_a_stdev: float
    ie_a_rmse: float
    ml_a_mean: float
    ml_a_stdev: float
    ml_a_rmse: float
    improvement_a: float
    ie_b_mean: float
    ie_b_stdev: float
    ie_b_rmse: float
    ml_b_mean: float
    ml_b_stdev: float
    ml_b_rmse: float
    improvement_b: float
    ie_x_mean: float
    ie_x_stdev: float
    ie_x_rmse: float
    ml_x_mean: float
    ml_x_stdev: float
    ml_x_rmse: float
    improvement_x: float
    ie_union_mean: float
    ie_union_stdev: float
    ie_union_rmse: float
    ml_union_mean: float
    ml_union_stdev: float
    ml_union_rmse: float
    improvement_union: float

    def __post_init__(self):
        for method in ("ie", "ml"):
            for quantity in ("a", "b", "x", "union"):
                mean = getattr(self, f"{method}_{quantity}_mean")
                stdev = getattr(self, f"{method}_{quantity}_stdev")
                rmse = getattr(self, f"{method}_{quantity}_rmse")
                if not _consistent_rmse(mean, stdev, rmse):
                    raise ValueError(
                        f"{method}_{quantity}: rmse^2 != mean^2 + stdev^2"
                    )


JOINT_HEADER = tuple(f.name for f in dataclass_fields(JointConfigRow))


def _error_stats(errors: np.ndarray) -> tuple[float, float, float]:
    mean = float(errors.mean())
    stdev = float(errors.std(ddof=0))
    rmse = math.sqrt(mean * mean + stdev * stdev)
    return mean, stdev, rmse


def _improvement(ie_rmse: float, ml_rmse: float) -> float:
    if ml_rmse > 0.0:
        return ie_rmse / ml_rmse
    return math.inf if ie_rmse > 0.0 else 1.0


def eval_joint(
    configs: Sequence[tuple[int, int, int]],
    p: int,
    q: int,
    runs: int,
    seed: int = DEFAULT_SEED,
    out=None,
    opts: MlOptions = MlOptions(),
    *,
    fast: bool = True,
) -> list[JointConfigRow]:
    """Compare joint ML against inclusion-exclusion over constructed pairs.

    Each config row gives the true cardinalities of the three disjoint
    components (A-only, B-only, shared). Per pair, three independent
    sketches are built from pooled recordings and merged into the two
    operand sketches. Every sketch uses its own pool entry, so pairs are
    fully independent. Relative errors use ``max(true, 1)`` denominators
    so zero-cardinality components stay finite.
    """
    config = SketchConfig(p, q)
    entry_counts: dict[int, int] = {}
    for card_a, card_b, card_x in configs:
        for n in (card_a, card_b, card_x):
            entry_counts[n] = entry_counts.get(n, 0) + runs
    pool = build_pool(config, entry_counts, seed, fast=fast)
    cursors: dict[int, int] = {}

    def next_sketch(n: int, tag: tuple[int, int, int]) -> HllSketch:
        index = cursors.get(n, 0)
        cursors[n] = index + 1
        single_entry = {n: [pool[n][index]]}
        return make_sketch_with_cardinality(
            n, config, [seed, _PAIR_TAG, *tag], single_entry
        )

    rows = []
    for row_index, (card_a, card_b, card_x) in enumerate(configs):
        true_values = {
            "a": max(card_a, 1),
            "b": max(card_b, 1),
            "x": max(card_x, 1),
            "union": max(card_a + card_b + card_x, 1),
        }
        errors = {
            (method, quantity): np.empty(runs)
            for method in ("ie", "ml")
            for quantity in ("a", "b", "x", "union")
        }
        for pair in range(runs):
            sketch_a = next_sketch(card_a, (row_index, pair, 0))
            sketch_b = next_sketch(card_b, (row_index, pair, 1))
            sketch_x = next_sketch(card_x, (row_index, pair, 2))
            s1 = merge(sketch_a, sketch_x)
            s2 = merge(sketch_b, sketch_x)
            ie_a, ie_b, ie_x, ie_union = inclusion_exclusion_estimates(
                s1, s2, lambda c: ml_estimate(c, opts)
            )
            triple = estimate_joint(s1, s2, opts)
            ml_union = triple.lambda_a + triple.lambda_b + triple.lambda_x
            estimates = {
                ("ie", "a"): ie_a,
                ("ie", "b"): ie_b,
                ("ie", "x"): ie_x,
                ("ie", "union"): ie_union,
                ("ml", "a"): triple.lambda_a,
                ("ml", "b"): triple.lambda_b,
                ("ml", "x"): triple.lambda_x,
                ("ml", "union"): ml_union,
            }
            truths = {
                "a": card_a,
                "b": card_b,
                "x": card_x,
                "union": card_a + card_b + card_x,
            }
            for (method, quantity), value in estimates.items():
                errors[(method, quantity)][pair] = (
                    value - truths[quantity]
                ) / true_values[quantity]
        stats = {key: _error_stats(err) for key, err in errors.items()}
        row_fields: dict[str, float] = {}
        for quantity in ("a", "b", "x", "union"):
            ie_mean, ie_stdev, ie_rmse = stats[("ie", quantity)]
            ml_mean, ml_stdev, ml_rmse = stats[("ml", quantity)]
            row_fields[f"ie_{quantity}_mean"] = ie_mean
            row_fields[f"ie_{quantity}_stdev"] = ie_stdev
            row_fields[f"ie_{quantity}_rmse"] = ie_rmse
            row_fields[f"ml_{quantity}_mean"] = ml_mean
            row_fields[f"ml_{quantity}_stdev"] = ml_stdev
            row_fields[f"ml_{quantity}_rmse"] = ml_rmse
            row_fields[f"improvement_{quantity}"] = _improvement(ie_rmse, ml_rmse)
        rows.append(
            JointConfigRow(
                card_a=card_a, card_b=card_b, card_x=card_x, runs=runs, **row_fields
            )
        )
    if out is not None:
        write_joint_csv(out, rows, seed)
    return rows


def audit_monotonicity(
    p: int,
    q: int,
    runs: int,
    schedule: SnapshotSchedule | None = None,
    seed: int = DEFAULT_SEED,
    opts: MlOptions = MlOptions(),
    *,
    fast: bool = True,
) -> tuple[float, float]:
    """Worst step-to-step estimate drop over simulated streams.

    Returns ``(worst_improved_raw_drop, worst_ml_relative_drop)``:
    the first is the largest absolute decrease of consecutive
    improved-raw estimates (0.0 when perfectly non-decreasing), the
    second the largest relative decrease of consecutive ML estimates.
    Monotone behavior means the first is 0 and the second stays within
    the solver's ``delta`` stop tolerance.
    """
    config = SketchConfig(p, q)
    if schedule is None:
        schedule = SnapshotSchedule(DEFAULT_MAX_CARDINALITY)
    worst_raw_drop = 0.0
    worst_ml_drop = 0.0
    for run in range(runs):
        previous_raw = 0.0
        previous_ml = 0.0
        for _, counts in simulate_stream([seed, run], config, schedule, fast=fast):
            raw = improved_raw_estimate(counts)
            ml = ml_estimate(counts, opts)
            worst_raw_drop = max(worst_raw_drop, previous_raw - raw)
            if previous_ml > 0.0:
                worst_ml_drop = max(worst_ml_drop, (previous_ml - ml) / previous_ml)
            previous_raw, previous_ml = raw, ml
    return worst_raw_drop, worst_ml_drop


def _metadata_line(seed) -> str:
    return f"# seed={seed} generator={GENERATOR_NAME} version={hllkit.__version__}\n"


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(out, header: tuple[str, ...], rows, seed) -> None:
    if hasattr(out, "write"):
        f = out
        close = False
    else:
        f = open(out, "w", newline="")
        close = True
    try:
        f.write(_metadata_line(seed))
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(_format_value(getattr(row, name)) for name in header)
    finally:
        if close:
            f.close()


def write_error_stats_csv(out, rows: Sequence[ErrorStatsRow], seed) -> None:
    _write_rows(out, ERROR_STATS_HEADER, rows, seed)


def write_joint_csv(out, rows: Sequence[JointConfigRow], seed) -> None:
    _write_rows(out, JOINT_HEADER, rows, seed)


def _parse_metadata(line: str) -> dict[str, str]:
    meta = {}
    for token in line.lstrip("#").split():
        if "=" in token:
            key, _, value = token.partition("=")
            meta[key] = value
    return meta


def read_error_stats_csv(path) -> tuple[list[ErrorStatsRow], dict[str, str]]:
    with open(path, newline="") as f:
        meta = _parse_metadata(f.readline())
        reader = csv.reader(f)
        header = tuple(next(reader))
        if header != ERROR_STATS_HEADER:
            raise ValueError(f"unexpected header {header}")
        rows = [
            ErrorStatsRow(
                true_cardinality=int(values[0]),
                runs=int(values[1]),
                **{
                    name: float(value)
                    for name, value in zip(ERROR_STATS_HEADER[2:], values[2:])
                },
            )
            for values in reader
        ]
    return rows, meta


def read_joint_csv(path) -> tuple[list[JointConfigRow], dict[str, str]]:
    with open(path, newline="") as f:
        meta = _parse_metadata(f.readline())
        reader = csv.reader(f)
        header = tuple(next(reader))
        if header != JOINT_HEADER:
            raise ValueError(f"unexpected header {header}")
        rows = []
        for values in reader:
            kwargs = {}
            for name, value in zip(JOINT_HEADER, values):
                if name in ("card_a", "card_b", "card_x", "runs"):
                    kwargs[name] = int(value)
                else:
                    kwargs[name] = float(value)
            rows.append(JointConfigRow(**kwargs))
    return rows, meta
