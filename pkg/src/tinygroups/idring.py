"""The ID space [0, 1) as a unit ring with 64-bit fixed-point positions."""

from dataclasses import dataclass
import math

import numpy as np

SCALE = 1 << 64
MASK64 = SCALE - 1


@dataclass(frozen=True, order=True)
class IdPoint:
    """A ring position ``value / 2**64``."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < SCALE:
            raise ValueError(f"IdPoint out of range: {self.value}")

    @classmethod
    def from_float(cls, x):
        if not 0.0 <= x < 1.0:
            raise ValueError(f"fraction must lie in [0, 1): {x}")
        return cls(min(int(x * SCALE), MASK64))

    def __float__(self):
        return self.value / SCALE

    def hex(self):
        return f"{self.value:016x}"

    @classmethod
    def from_hex(cls, s):
        return cls(int(s, 16))

    def __repr__(self):
        return f"IdPoint({float(self):.6f})"


def as_value(x):
    """Coerce an IdPoint, int or float fraction to a raw 64-bit value."""
    if isinstance(x, IdPoint):
        return x.value
    if isinstance(x, (float, np.floating)):
        return IdPoint.from_float(float(x)).value
    return int(x) & MASK64


class RingSet:
    """Sorted, duplicate-free set of ring positions.

    ``values`` is a read-only ``uint64`` array, so index-level queries can be
    vectorised with ``numpy.searchsorted``.
    """

    def __init__(self, points):
        arr = np.asarray([as_value(p) for p in points] if not isinstance(points, np.ndarray)
                         else points, dtype=np.uint64)
        arr = np.sort(arr)
        if arr.size > 1 and np.any(arr[1:] == arr[:-1]):
            raise ValueError("ID collision: duplicate ring positions")
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def random(cls, n, rng):
        """``n`` distinct u.a.r. positions."""
        vals = np.unique(rng.integers(0, SCALE, size=n, dtype=np.uint64, endpoint=False))
        while vals.size < n:
            extra = rng.integers(0, SCALE, size=n - vals.size, dtype=np.uint64, endpoint=False)
            vals = np.unique(np.concatenate([vals, extra]))
        return cls(vals)

    def __len__(self):
        return int(self.values.size)

    def __iter__(self):
        return (IdPoint(int(v)) for v in self.values)

    def __contains__(self, x):
        v = np.uint64(as_value(x))
        i = int(np.searchsorted(self.values, v))
        return i < len(self) and self.values[i] == v

    def index_of(self, x):
        v = np.uint64(as_value(x))
        i = int(np.searchsorted(self.values, v))
        if i >= len(self) or self.values[i] != v:
            raise KeyError(f"{IdPoint(int(v))!r} not in ring")
        return i

    def point(self, i):
        return IdPoint(int(self.values[i]))

    def successor_index(self, keys):
        """Index of the first point clockwise from each key (vectorised)."""
        if len(self) == 0:
            raise ValueError("empty ID space")
        idx = np.searchsorted(self.values, np.asarray(keys, dtype=np.uint64), side="left")
        return np.where(idx == len(self), 0, idx)

    def predecessor_index(self, i):
        return (np.asarray(i) - 1) % len(self)

    def without(self, points):
        drop = np.asarray([as_value(p) for p in points], dtype=np.uint64)
        return RingSet(self.values[~np.isin(self.values, drop)])


def successor(ring, x):
    """First point of ``ring`` at or clockwise from ``x``."""
    if len(ring) == 0:
        raise ValueError("empty ID space")
    i = int(ring.successor_index(np.array([as_value(x)], dtype=np.uint64))[0])
    return ring.point(i)


def clockwise_distance(a, b):
    """``(b - a) mod 1`` as a float."""
    return ((as_value(b) - as_value(a)) & MASK64) / SCALE


def cw_values(a, b):
    """Vectorised clockwise distance on raw uint64 arrays (wraps mod 2**64)."""
    return np.asarray(b, dtype=np.uint64) - np.asarray(a, dtype=np.uint64)


def adjacent_distances(ring):
    """Clockwise gaps between consecutive ring points, as fractions."""
    v = ring.values
    gaps = np.diff(v, append=v[:1])  # last gap wraps (uint64 arithmetic)
    if len(ring) == 1:
        gaps = np.array([0], dtype=np.uint64)
    return gaps.astype(np.float64) / SCALE


def estimate_loglog_n(samples):
    """Median of ``ln ln (1/d)`` over adjacent-ID distances ``d``."""
    d = np.asarray(samples, dtype=np.float64)
    if d.size == 0:
        raise ValueError("no distance samples")
    if np.any(d <= 0) or np.any(d >= 1):
        raise ValueError("distances must lie in (0, 1)")
    inner = np.log(1.0 / d)
    if np.any(inner <= 0):
        raise ValueError("distance too large for a ln ln estimate")
    return float(np.median(np.log(inner)))


def interval_counts(ring, length):
    """Number of points in each clockwise interval ``[p, p + length)`` starting at a point."""
    v = ring.values
    n = len(ring)
    span = np.uint64(min(int(length * SCALE), MASK64))
    ends = v + span  # wraps
    starts_idx = np.arange(n)
    end_idx = np.searchsorted(v, ends, side="left")
    wrapped = ends < v
    counts = np.where(wrapped, n - starts_idx + end_idx, end_idx - starts_idx)
    return counts


def ln_ln(n):
    return math.log(math.log(n))
