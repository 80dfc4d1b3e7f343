"""Synthetic subset-sum arithmetic task generator.

Each observation is a vector x of d values drawn uniformly from a range.
Two index windows of length round(s*d) are cut out of x; their sums a and
b feed a binary arithmetic operation to produce the target t = a op b.
The windows overlap by a fraction o of their length: o=1 makes them
identical, o=0 disjoint. Extrapolation is tested by sampling x from a
disjoint range while keeping the window geometry fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numpy as np


class ConfigError(ValueError):
    """Raised for degenerate task configurations (e.g. empty subsets)."""


class Operation(Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"

    def apply(self, a, b):
        if self is Operation.ADD:
            return a + b
        if self is Operation.SUB:
            return a - b
        if self is Operation.MUL:
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b

    @property
    def symbol(self) -> str:
        return {"add": "+", "sub": "-", "mul": "*", "div": "/"}[self.value]


@dataclass(frozen=True)
class RangeSpec:
    """A sampling interval, or a union of disjoint intervals.

    Sampling from a union draws each element from a mixture of the
    segments weighted by segment length.
    """

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ConfigError("range needs at least one segment")
        for lo, hi in self.segments:
            if lo > hi:
                raise ConfigError(f"segment [{lo}, {hi}] has lower > upper")

    @classmethod
    def single(cls, lower: float, upper: float) -> "RangeSpec":
        return cls(segments=((float(lower), float(upper)),))

    @classmethod
    def parse(cls, value) -> "RangeSpec":
        """Accepts [lo, hi] or [[lo, hi], [lo, hi], ...]."""
        if isinstance(value, RangeSpec):
            return value
        seq = list(value)
        if seq and not isinstance(seq[0], (list, tuple)):
            seq = [seq]
        return cls(segments=tuple((float(lo), float(hi)) for lo, hi in seq))

    @property
    def lower(self) -> float:
        return min(lo for lo, _ in self.segments)

    @property
    def upper(self) -> float:
        return max(hi for _, hi in self.segments)

    def contains(self, x: np.ndarray) -> np.ndarray:
        ok = np.zeros_like(x, dtype=bool)
        for lo, hi in self.segments:
            ok |= (x >= lo) & (x <= hi)
        return ok

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        lengths = np.array([hi - lo for lo, hi in self.segments])
        total = lengths.sum()
        if total == 0.0:
            # All segments degenerate: constant fixture ranges.
            return np.full(size, self.segments[0][0], dtype=float)
        u = rng.random(size) * total
        if len(self.segments) == 1:
            return self.segments[0][0] + u
        edges = np.cumsum(lengths)
        idx = np.searchsorted(edges, u, side="right")
        idx = np.minimum(idx, len(self.segments) - 1)
        starts = np.array([lo for lo, _ in self.segments])
        offsets = edges - lengths  # cumulative length before each segment
        return starts[idx] + (u - offsets[idx])

    def to_json(self) -> list[list[float]]:
        return [[lo, hi] for lo, hi in self.segments]


EvalSplit = Literal["interp", "extrap"]


@dataclass(frozen=True)
class DatasetSpec:
    """Fully determines a task distribution (up to the seeded offset)."""

    op: Operation
    interp: RangeSpec = field(default_factory=lambda: RangeSpec.single(1.0, 2.0))
    extrap: RangeSpec = field(default_factory=lambda: RangeSpec.single(2.0, 6.0))
    input_size: int = 100
    subset_ratio: float = 0.25
    overlap_ratio: float = 0.5

    def __post_init__(self) -> None:
        if self.input_size < 1:
            raise ConfigError("input_size must be >= 1")
        if not (0.0 < self.subset_ratio <= 0.5):
            raise ConfigError("subset_ratio must lie in (0, 0.5]")
        if not (0.0 <= self.overlap_ratio <= 1.0):
            raise ConfigError("overlap_ratio must lie in [0, 1]")
        if self.subset_size < 1:
            raise ConfigError(
                f"subset of round({self.subset_ratio} * {self.input_size}) elements is empty"
            )
        if self.span > self.input_size:
            raise ConfigError(
                f"the two subsets need {self.span} indices but input_size is {self.input_size}"
            )

    @property
    def subset_size(self) -> int:
        """Elements per subset: round(s * d)."""
        return round(self.subset_ratio * self.input_size)

    @property
    def overlap_size(self) -> int:
        """Shared elements between the subsets: round(o * subset_size)."""
        return round(self.overlap_ratio * self.subset_size)

    @property
    def span(self) -> int:
        """Total indices covered by both subsets."""
        return 2 * self.subset_size - self.overlap_size

    @property
    def offset_max(self) -> float:
        """Upper end of the legal offset interval: k ~ U(0, 1 - 2s + o*s)."""
        return 1.0 - 2.0 * self.subset_ratio + self.overlap_ratio * self.subset_ratio

    def range_for(self, which: EvalSplit) -> RangeSpec:
        if which == "interp":
            return self.interp
        if which == "extrap":
            return self.extrap
        raise ValueError(f"unknown split {which!r}")

    def to_json(self) -> dict:
        return {
            "op": self.op.value,
            "interp": self.interp.to_json(),
            "extrap": self.extrap.to_json(),
            "d": self.input_size,
            "s": self.subset_ratio,
            "o": self.overlap_ratio,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DatasetSpec":
        return cls(
            op=Operation(data["op"]),
            interp=RangeSpec.parse(data["interp"]),
            extrap=RangeSpec.parse(data["extrap"]),
            input_size=int(data["d"]),
            subset_ratio=float(data["s"]),
            overlap_ratio=float(data["o"]),
        )


@dataclass
class SampleBatch:
    x: np.ndarray  # batch x d
    t: np.ndarray  # batch


def subset_indices(
    spec: DatasetSpec, k: float
) -> tuple[tuple[int, int], tuple[int, int]]:
    """The two half-open index windows for offset k.

    Both windows have exactly subset_size elements; the second starts
    subset_size - overlap_size after the first, so their intersection is
    exactly overlap_size indices.
    """
    if not (0.0 <= k <= spec.offset_max):
        raise ValueError(f"offset {k} outside legal interval [0, {spec.offset_max}]")
    start_a = math.floor(spec.input_size * k)
    start_a = min(start_a, spec.input_size - spec.span)
    size = spec.subset_size
    start_b = start_a + size - spec.overlap_size
    return (start_a, start_a + size), (start_b, start_b + size)


def draw_offset(spec: DatasetSpec, rng: np.random.Generator) -> float:
    """One offset k ~ U(0, 1 - 2s + o*s); fixes the window geometry."""
    return float(rng.uniform(0.0, spec.offset_max))


def targets_for(spec: DatasetSpec, x: np.ndarray, k: float) -> np.ndarray:
    """Subset sums and operation for a fixed offset, applied row-wise."""
    (a0, a1), (b0, b1) = subset_indices(spec, k)
    a = x[:, a0:a1].sum(axis=1)
    b = x[:, b0:b1].sum(axis=1)
    return spec.op.apply(a, b)


def sample_batch(
    spec: DatasetSpec,
    which: EvalSplit,
    batch: int,
    rng: np.random.Generator,
    k: float | None = None,
) -> SampleBatch:
    """Draw a batch of (x, t) pairs from the given range.

    With k=None every row gets its own offset; passing a fixed k pins the
    window geometry, which is how training/evaluation datasets of a trial
    share one task instance across the interpolation and extrapolation
    ranges.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    rng_range = spec.range_for(which)
    x = rng_range.sample(rng, (batch, spec.input_size))
    if k is not None:
        return SampleBatch(x=x, t=targets_for(spec, x, k))
    ks = rng.uniform(0.0, spec.offset_max, size=batch)
    cs = np.zeros((batch, spec.input_size + 1))
    np.cumsum(x, axis=1, out=cs[:, 1:])
    rows = np.arange(batch)
    bounds = np.array([subset_indices(spec, float(kk)) for kk in ks])
    a = cs[rows, bounds[:, 0, 1]] - cs[rows, bounds[:, 0, 0]]
    b = cs[rows, bounds[:, 1, 1]] - cs[rows, bounds[:, 1, 0]]
    return SampleBatch(x=x, t=spec.op.apply(a, b))


def fixed_eval_set(
    spec: DatasetSpec,
    which: EvalSplit,
    n: int,
    seed: int,
    k: float | None = None,
) -> SampleBatch:
    """An immutable evaluation dataset, identical for identical arguments."""
    rng = np.random.default_rng(seed)
    return sample_batch(spec, which, n, rng, k=k)
