"""Closed real intervals and interval row vectors.

Plain floating point endpoints, no outward rounding. Empty intersections are
returned as the ``EMPTY`` sentinel rather than raised, so that callers can turn
them into domain-specific diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


class _Empty:
    """Result of intersecting disjoint intervals."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EMPTY"

    def __bool__(self) -> bool:
        return False


EMPTY = _Empty()


@dataclass(frozen=True, slots=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"invalid interval: lo={self.lo!r} > hi={self.hi!r}")

    @classmethod
    def point(cls, value: float) -> Interval:
        v = float(value)
        return cls(v, v)

    @classmethod
    def symmetric(cls, radius: float) -> Interval:
        r = abs(float(radius))
        return cls(-r, r)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def issubset(self, other: Interval, tol: float = 0.0) -> bool:
        return other.lo - tol <= self.lo and self.hi <= other.hi + tol

    def __add__(self, other):
        if isinstance(other, Interval):
            return add(self, other)
        c = float(other)
        return Interval(self.lo + c, self.hi + c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Interval):
            return sub(self, other)
        c = float(other)
        return Interval(self.lo - c, self.hi - c)

    def __rsub__(self, other):
        c = float(other)
        return Interval(c - self.hi, c - self.lo)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other):
        if isinstance(other, Interval):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return div_scalar(self, float(c))

    def __and__(self, other: Interval):
        return intersect(self, other)


def add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo - b.hi, a.hi - b.lo)


def mul(a: Interval, b: Interval) -> Interval:
    products = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval(min(products), max(products))


def scale(a: Interval, c: float) -> Interval:
    if c >= 0:
        return Interval(a.lo * c, a.hi * c)
    return Interval(a.hi * c, a.lo * c)


def div_scalar(a: Interval, c: float) -> Interval:
    if c == 0:
        raise ZeroDivisionError("interval division by zero")
    lo, hi = a.lo / c, a.hi / c
    return Interval(lo, hi) if lo <= hi else Interval(hi, lo)


def intersect(a: Interval, b: Interval, tol: float = 0.0):
    """Intersection of ``a`` and ``b``, or ``EMPTY``.

    With ``tol > 0`` a gap no wider than ``tol`` between the operands is
    bridged by the degenerate interval at the middle of the gap, so that
    bounds which agree analytically but differ by round-off do not come out
    empty.
    """
    lo = a.lo if a.lo >= b.lo else b.lo
    hi = a.hi if a.hi <= b.hi else b.hi
    if lo <= hi:
        return Interval(lo, hi)
    if lo - hi <= tol:
        m = 0.5 * (lo + hi)
        return Interval(m, m)
    return EMPTY


def hull(items: Iterable[Interval]) -> Interval:
    items = list(items)
    return Interval(min(i.lo for i in items), max(i.hi for i in items))


def interval_sum(items: Iterable[Interval]) -> Interval:
    lo = hi = 0.0
    for it in items:
        lo += it.lo
        hi += it.hi
    return Interval(lo, hi)


@dataclass(frozen=True)
class IntervalRowVector:
    """A 1 x p row of intervals."""

    entries: tuple[Interval, ...]

    def __init__(self, entries: Iterable[Interval]):
        object.__setattr__(self, "entries", tuple(entries))

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> IntervalRowVector:
        if len(lo) != len(hi):
            raise ValueError("bound vectors differ in length")
        return cls(Interval(float(a), float(b)) for a, b in zip(lo, hi))

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, k: int) -> Interval:
        return self.entries[k]

    def __iter__(self):
        return iter(self.entries)

    @property
    def lo(self) -> list[float]:
        return [e.lo for e in self.entries]

    @property
    def hi(self) -> list[float]:
        return [e.hi for e in self.entries]

    @property
    def mid(self) -> list[float]:
        return [e.mid for e in self.entries]

    @property
    def widths(self) -> list[float]:
        return [e.width for e in self.entries]

    def replace(self, k: int, value: Interval) -> IntervalRowVector:
        items = list(self.entries)
        items[k] = value
        return IntervalRowVector(items)

    def dot(self, v: Sequence[float]) -> Interval:
        """Product with a real column vector of matching length."""
        if len(v) != len(self.entries):
            raise ValueError(f"length mismatch: {len(self.entries)} vs {len(v)}")
        return interval_sum(scale(e, float(c)) for e, c in zip(self.entries, v))

    def contains(self, v: Sequence[float], tol: float = 0.0) -> bool:
        return all(e.contains(float(c), tol) for e, c in zip(self.entries, v))

    def issubset(self, other: IntervalRowVector, tol: float = 0.0) -> bool:
        return all(a.issubset(b, tol) for a, b in zip(self.entries, other.entries))
