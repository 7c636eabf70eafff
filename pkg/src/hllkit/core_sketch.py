"""The HyperLogLog sketch data structure.

A sketch is an array of ``m = 2**p`` registers, each holding a value in
``[0, q + 1]``. Inserting a 64-bit hash uses the top ``p`` bits to select
a register and the position of the first one bit among the next ``q``
bits (or ``q + 1`` if they are all zero) as a candidate value; the
register keeps the maximum it has seen. The remaining low bits of the
hash are ignored.

Sketches with the same configuration merge by register-wise maximum.
A sketch can also be losslessly compressed to a coarser configuration,
which is what makes recording at high precision and analyzing at low
precision equivalent to recording at low precision directly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MAGIC = b"HLK1"

_U64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SketchConfig:
    """Sketch shape: ``2**p`` registers, ranks saturating at ``q + 1``."""

    p: int
    q: int

    def __post_init__(self):
        if not isinstance(self.p, int) or not isinstance(self.q, int):
            raise ValueError(f"p and q must be integers, got {self.p!r}, {self.q!r}")
        if not 1 <= self.p <= 26:
            raise ValueError(f"p must be in [1, 26], got {self.p}")
        if self.q < 0:
            raise ValueError(f"q must be nonnegative, got {self.q}")
        if self.p + self.q > 64:
            raise ValueError(f"p + q must be at most 64, got {self.p + self.q}")

    @property
    def m(self) -> int:
        return 1 << self.p

    @property
    def max_register_value(self) -> int:
        return self.q + 1


def split_hash(hash_value: int, config: SketchConfig) -> tuple[int, int]:
    """Split a 64-bit hash into (register index, rank value)."""
    h = hash_value & _U64_MASK
    idx = h >> (64 - config.p)
    bits = (h >> (64 - config.p - config.q)) & ((1 << config.q) - 1)
    k = config.q + 1 if bits == 0 else config.q - bits.bit_length() + 1
    return idx, k


def hash_item(item) -> int:
    """Default 64-bit hash: blake2b over the item's byte representation.

    Bytes are hashed as-is, strings as UTF-8; anything else is hashed
    through ``repr``, which is stable for ints and most simple values.
    """
    if isinstance(item, bytes):
        data = item
    elif isinstance(item, str):
        data = item.encode("utf-8")
    else:
        data = repr(item).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


class HllSketch:
    """Mutable register array plus its configuration."""

    __slots__ = ("config", "registers")

    def __init__(self, config: SketchConfig, registers: np.ndarray | None = None):
        if registers is None:
            registers = np.zeros(config.m, dtype=np.uint8)
        else:
            registers = np.asarray(registers, dtype=np.uint8)
            if registers.shape != (config.m,):
                raise ValueError(
                    f"expected {config.m} registers, got shape {registers.shape}"
                )
            if registers.max(initial=0) > config.max_register_value:
                raise ValueError(
                    f"register values must be at most {config.max_register_value}"
                )
        self.config = config
        self.registers = registers

    def insert_hash(self, hash_value: int) -> None:
        """Fold one 64-bit hash into the sketch."""
        idx, k = split_hash(hash_value, self.config)
        if k > self.registers[idx]:
            self.registers[idx] = k

    def insert(self, item) -> None:
        """Hash an item with :func:`hash_item` and insert it."""
        self.insert_hash(hash_item(item))

    def copy(self) -> "HllSketch":
        return HllSketch(self.config, self.registers.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, HllSketch):
            return NotImplemented
        return self.config == other.config and np.array_equal(
            self.registers, other.registers
        )

    def __repr__(self) -> str:
        nonzero = int(np.count_nonzero(self.registers))
        return (
            f"HllSketch(p={self.config.p}, q={self.config.q}, "
            f"nonzero_registers={nonzero})"
        )

    def to_bytes(self) -> bytes:
        """Serialize as magic, p, q, then the raw register bytes."""
        return MAGIC + bytes([self.config.p, self.config.q]) + self.registers.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "HllSketch":
        if data[: len(MAGIC)] != MAGIC:
            raise ValueError("not a serialized sketch: bad magic")
        if len(data) < len(MAGIC) + 2:
            raise ValueError("truncated sketch header")
        p, q = data[len(MAGIC)], data[len(MAGIC) + 1]
        config = SketchConfig(p, q)
        body = data[len(MAGIC) + 2 :]
        if len(body) != config.m:
            raise ValueError(f"expected {config.m} register bytes, got {len(body)}")
        registers = np.frombuffer(body, dtype=np.uint8).copy()
        return cls(config, registers)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "HllSketch":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


def new_sketch(config: SketchConfig) -> HllSketch:
    """Create an empty sketch (all registers zero)."""
    return HllSketch(config)


def insert_hash(sketch: HllSketch, hash_value: int) -> None:
    """Function form of :meth:`HllSketch.insert_hash`."""
    sketch.insert_hash(hash_value)


def merge(s1: HllSketch, s2: HllSketch) -> HllSketch:
    """Sketch of the union of the two inputs' underlying sets.

    Register-wise maximum; both sketches must share a configuration.
    """
    if s1.config != s2.config:
        raise ValueError(f"cannot merge configs {s1.config} and {s2.config}")
    return HllSketch(s1.config, np.maximum(s1.registers, s2.registers))


def compress(sketch: HllSketch, new_config: SketchConfig) -> HllSketch:
    """Losslessly reduce a sketch to a coarser configuration.

    Requires ``new_config.p <= p`` and ``new_config.p + new_config.q <=
    p + q``. The result is identical to what direct recording of the
    same hash stream at the coarser configuration would have produced.
    """
    old = sketch.config
    if new_config.p > old.p:
        raise ValueError(f"cannot raise p from {old.p} to {new_config.p}")
    if new_config.p + new_config.q > old.p + old.q:
        raise ValueError(
            f"p + q must not grow: {old.p + old.q} -> {new_config.p + new_config.q}"
        )
    f = old.p - new_config.p
    if f == 0 and new_config.q == old.q:
        return sketch.copy()
    cap = new_config.q + 1
    groups = sketch.registers.reshape(new_config.m, 1 << f)
    nonzero = groups != 0
    has_any = nonzero.any(axis=1)
    first = np.argmax(nonzero, axis=1)
    out = np.zeros(new_config.m, dtype=np.int64)
    # a group's new value comes from its first nonzero slot: slot 0 keeps
    # its rank shifted up by the f reclaimed index bits, while a later
    # slot j contributes the rank of j itself read as an f-bit pattern
    lead = has_any & (first == 0)
    out[lead] = np.minimum(groups[lead, 0].astype(np.int64) + f, cap)
    rest = has_any & (first > 0)
    if np.any(rest):
        j = first[rest].astype(np.float64)
        bit_length = np.frexp(j)[1]
        out[rest] = np.minimum(f - bit_length + 1, cap)
    return HllSketch(new_config, out.astype(np.uint8))


@dataclass
class MultiplicityVector:
    """Histogram of register values: ``counts[k]`` registers hold value k.

    Length is ``q + 2`` (values 0 through q + 1) and the entries sum to
    the register count m. This is the only input the estimators need.
    """

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or len(counts) < 2:
            raise ValueError("counts must be a 1-D array of length at least 2")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        self.counts = counts

    @property
    def q(self) -> int:
        return len(self.counts) - 2

    @property
    def m(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, k: int) -> int:
        return int(self.counts[k])

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiplicityVector):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)


def extract_counts(sketch: HllSketch) -> MultiplicityVector:
    """Histogram the registers into a multiplicity vector."""
    counts = np.bincount(sketch.registers, minlength=sketch.config.q + 2)
    return MultiplicityVector(counts.astype(np.int64))


class TrackedSketch:
    """A sketch that keeps its multiplicity vector current on every insert.

    Tracking makes the common no-op insert cheap: a hash whose rank is
    at most the smallest register value cannot change anything and is
    rejected by one comparison.
    """

    __slots__ = ("sketch", "_counts", "_min_value")

    def __init__(self, sketch: HllSketch):
        self.sketch = sketch
        counts = np.bincount(sketch.registers, minlength=sketch.config.q + 2)
        self._counts = counts.astype(np.int64).tolist()
        self._min_value = 0
        while self._counts[self._min_value] == 0:
            self._min_value += 1

    @classmethod
    def empty(cls, config: SketchConfig) -> "TrackedSketch":
        return cls(new_sketch(config))

    @property
    def min_value(self) -> int:
        return self._min_value

    @property
    def multiplicity(self) -> MultiplicityVector:
        return MultiplicityVector(np.array(self._counts, dtype=np.int64))

    def insert_hash(self, hash_value: int) -> None:
        """Fold in one hash, keeping the multiplicity counts in step."""
        idx, k = split_hash(hash_value, self.sketch.config)
        if k <= self._min_value:
            return
        old = int(self.sketch.registers[idx])
        if k > old:
            self._counts[old] -= 1
            self._counts[k] += 1
            if old == self._min_value:
                while self._counts[self._min_value] == 0:
                    self._min_value += 1
            self.sketch.registers[idx] = k

    def insert(self, item) -> None:
        self.insert_hash(hash_item(item))


def insert_hash_tracked(tracked: TrackedSketch, hash_value: int) -> None:
    """Function form of :meth:`TrackedSketch.insert_hash`."""
    tracked.insert_hash(hash_value)
