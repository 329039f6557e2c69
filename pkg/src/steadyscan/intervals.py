"""Closed interval arithmetic with conservative outward inflation.

The interval type here is the plain floating-point kind used by interval
constraint solvers: a pair of doubles ``[lo, hi]`` denoting the set of reals
between them, with ``+-inf`` endpoints standing for unbounded sides.  We do
not use directed rounding; instead every arithmetic operation inflates its
result outward by a relative ``1e-12`` (plus one ulp), which is orders of
magnitude wider than the rounding error of a single double operation.  The
containment guarantee every caller relies on:

    x in a and y in b  =>  x <op> y in apply(op, a, b)

Intersection, hull, width and split are exact (no inflation) so that box
subdivision tiles without gaps or overlap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

INFLATE_REL = 1e-12

_INF = math.inf


class IntervalError(ValueError):
    """Malformed interval construction (NaN endpoint, lo > hi)."""


class DomainError(ValueError):
    """Operation applied outside its real domain (e.g. [-2,-1] ** 0.5)."""


class BoxShapeError(ValueError):
    """Boxes over different unknown tuples were combined."""


def _nudge_down(x: float) -> float:
    if x == -_INF:
        return x
    return math.nextafter(x - INFLATE_REL * abs(x), -_INF)


def _nudge_up(x: float) -> float:
    if x == _INF:
        return x
    return math.nextafter(x + INFLATE_REL * abs(x), _INF)


# ------------------------------------------------------------------ intervals


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed real interval ``[lo, hi]``; ``lo > hi`` encodes the empty set."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo = float(self.lo)
        hi = float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise IntervalError(f"NaN endpoint in interval [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    # -- constructors ---------------------------------------------------

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @classmethod
    def entire(cls) -> "Interval":
        return cls(-_INF, _INF)

    @classmethod
    def empty(cls) -> "Interval":
        return cls(_INF, -_INF)

    # -- predicates ------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def contains(self, x: float) -> bool:
        return (not self.is_empty) and self.lo <= x <= self.hi

    def __contains__(self, x: float) -> bool:
        return self.contains(x)

    def encloses(self, other: "Interval") -> bool:
        if other.is_empty:
            return True
        return (not self.is_empty) and self.lo <= other.lo and other.hi <= self.hi

    # -- measures ---------------------------------------------------------

    @property
    def width(self) -> float:
        if self.is_empty:
            return 0.0
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        if self.is_empty:
            raise IntervalError("midpoint of empty interval")
        if self.lo == -_INF and self.hi == _INF:
            return 0.0
        mid = 0.5 * (self.lo + self.hi)
        if math.isinf(mid):
            # one-sided unbounded, or overflow of lo + hi
            return mid if math.isinf(self.lo) or math.isinf(self.hi) else 0.5 * self.lo + 0.5 * self.hi
        return mid

    @property
    def relative_width(self) -> float:
        """Width over |midpoint|; the split-selection measure.

        Degenerate and empty intervals score 0, intervals around 0 or with an
        unbounded side score inf, so they are split first.
        """
        if self.is_empty or self.is_degenerate:
            return 0.0
        if math.isinf(self.width):
            return _INF
        mid = self.midpoint
        if mid == 0.0:
            return _INF
        return self.width / abs(mid)

    # -- exact lattice ops -------------------------------------------------

    def intersect(self, other: "Interval") -> "Interval":
        if self.is_empty or other.is_empty:
            return Interval.empty()
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return Interval.empty()
        return Interval(lo, hi)

    def hull(self, other: "Interval") -> "Interval":
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def split(self) -> tuple["Interval", "Interval"]:
        """Bisect at the midpoint; the two halves tile this interval exactly."""
        if self.is_empty:
            raise IntervalError("cannot split empty interval")
        mid = self.midpoint
        if not math.isfinite(mid) or not (self.lo < mid < self.hi):
            raise IntervalError(f"interval [{self.lo}, {self.hi}] is not splittable")
        return Interval(self.lo, mid), Interval(mid, self.hi)

    def inflate(self) -> "Interval":
        if self.is_empty:
            return self
        return Interval(_nudge_down(self.lo), _nudge_up(self.hi))

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        if self.is_empty:
            return "Interval.empty()"
        return f"Interval({self.lo!r}, {self.hi!r})"


# --------------------------------------------------------------- arithmetic


def iv_add(a: Interval, b: Interval) -> Interval:
    if a.is_empty or b.is_empty:
        return Interval.empty()
    return Interval(a.lo + b.lo, a.hi + b.hi).inflate()


def iv_sub(a: Interval, b: Interval) -> Interval:
    if a.is_empty or b.is_empty:
        return Interval.empty()
    return Interval(a.lo - b.hi, a.hi - b.lo).inflate()


def _prod(x: float, y: float) -> float:
    # 0 * inf: the finite factor is an actual real, so the product is 0.
    if x == 0.0 or y == 0.0:
        return 0.0
    return x * y


def iv_mul(a: Interval, b: Interval) -> Interval:
    if a.is_empty or b.is_empty:
        return Interval.empty()
    ps = (_prod(a.lo, b.lo), _prod(a.lo, b.hi), _prod(a.hi, b.lo), _prod(a.hi, b.hi))
    return Interval(min(ps), max(ps)).inflate()


def _quot(x: float, y: float) -> float:
    if x == 0.0:
        return 0.0
    if math.isinf(y):
        return math.nan if math.isinf(x) else 0.0
    return x / y


def iv_div(a: Interval, b: Interval) -> Interval:
    """Interval quotient.

    When 0 is interior to ``b`` the true image splits in two rays; we return
    their hull (possibly ``[-inf, inf]``) rather than a disjunction, which is
    the documented conservative choice.
    """
    if a.is_empty or b.is_empty:
        return Interval.empty()
    if b.lo > 0.0 or b.hi < 0.0:
        qs = [q for q in (_quot(a.lo, b.lo), _quot(a.lo, b.hi), _quot(a.hi, b.lo), _quot(a.hi, b.hi)) if not math.isnan(q)]
        return Interval(min(qs), max(qs)).inflate()
    # 0 in b
    if a.lo == 0.0 and a.hi == 0.0:
        return Interval(0.0, 0.0).inflate()
    if b.lo == 0.0 and b.hi == 0.0:
        return Interval.entire()
    if a.lo > 0.0:
        if b.lo == 0.0:
            return Interval(_quot(a.lo, b.hi), _INF).inflate()
        if b.hi == 0.0:
            return Interval(-_INF, _quot(a.lo, b.lo)).inflate()
        return Interval.entire()
    if a.hi < 0.0:
        if b.lo == 0.0:
            return Interval(-_INF, _quot(a.hi, b.hi)).inflate()
        if b.hi == 0.0:
            return Interval(_quot(a.hi, b.lo), _INF).inflate()
        return Interval.entire()
    return Interval.entire()


def _fpow(x: float, q: float) -> float:
    if x == 0.0 and q < 0.0:
        return _INF
    try:
        return math.pow(x, q)
    except OverflowError:
        return _INF if x > 1.0 or (x < -1.0 and int(q) % 2 == 0) else -_INF


def iv_pow(a: Interval, q: float) -> Interval:
    """``a ** q``.  Integer exponents handle signed bases; fractional ones
    require a nonnegative base (DomainError otherwise)."""
    if a.is_empty:
        return Interval.empty()
    if float(q).is_integer():
        n = int(q)
        if n == 0:
            return Interval(1.0, 1.0)
        if n < 0:
            return iv_div(Interval(1.0, 1.0), iv_pow(a, -n))
        if n % 2 == 1:
            return Interval(_fpow(a.lo, n), _fpow(a.hi, n)).inflate()
        # even power
        if a.lo >= 0.0:
            return Interval(_fpow(a.lo, n), _fpow(a.hi, n)).inflate()
        if a.hi <= 0.0:
            return Interval(_fpow(a.hi, n), _fpow(a.lo, n)).inflate()
        return Interval(0.0, max(_fpow(-a.lo, n), _fpow(a.hi, n))).inflate()
    if a.lo < 0.0:
        raise DomainError(f"fractional power {q} of interval [{a.lo}, {a.hi}] with negative base")
    if q > 0.0:
        return Interval(_fpow(a.lo, q), _fpow(a.hi, q)).inflate()
    if q == 0.0:
        return Interval(1.0, 1.0)
    return Interval(_fpow(a.hi, q), _fpow(a.lo, q)).inflate()


def iv_neg(a: Interval) -> Interval:
    if a.is_empty:
        return a
    return Interval(-a.hi, -a.lo)


def iv_abs(a: Interval) -> Interval:
    if a.is_empty:
        return a
    if a.lo >= 0.0:
        return a
    if a.hi <= 0.0:
        return Interval(-a.hi, -a.lo)
    return Interval(0.0, max(-a.lo, a.hi))


def iv_min(a: Interval, b: Interval) -> Interval:
    if a.is_empty or b.is_empty:
        return Interval.empty()
    return Interval(min(a.lo, b.lo), min(a.hi, b.hi))


def iv_max(a: Interval, b: Interval) -> Interval:
    if a.is_empty or b.is_empty:
        return Interval.empty()
    return Interval(max(a.lo, b.lo), max(a.hi, b.hi))


_UNARY = {"neg": iv_neg, "abs": iv_abs}
_BINARY = {
    "add": iv_add,
    "sub": iv_sub,
    "mul": iv_mul,
    "div": iv_div,
    "min": iv_min,
    "max": iv_max,
}


def apply(op: str, a: Interval, b: Interval | float | None = None) -> Interval:
    """Dispatch an interval operation by name.

    ``op`` is one of add, sub, mul, div, pow, neg, abs, min, max; ``b`` is the
    second operand (a float exponent for ``pow``), omitted for unary ops.
    """
    if op in _UNARY:
        if b is not None:
            raise TypeError(f"{op} is unary")
        return _UNARY[op](a)
    if op == "pow":
        if isinstance(b, Interval):
            if not b.is_degenerate:
                raise TypeError("pow exponent must be a number or a degenerate interval")
            b = b.lo
        if b is None:
            raise TypeError("pow needs an exponent")
        return iv_pow(a, float(b))
    if op in _BINARY:
        if not isinstance(b, Interval):
            raise TypeError(f"{op} needs an interval second operand")
        return _BINARY[op](a, b)
    raise ValueError(f"unknown interval op {op!r}")


# --------------------------------------------------------------------- boxes


@dataclass(frozen=True, slots=True)
class Box:
    """An axis-aligned box: one interval per named unknown, order preserved.

    The name tuple is part of the box identity; combining boxes over
    different name tuples raises :class:`BoxShapeError`.
    """

    names: tuple[str, ...]
    intervals: tuple[Interval, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.intervals):
            raise BoxShapeError("names and intervals differ in length")
        if len(set(self.names)) != len(self.names):
            raise BoxShapeError("duplicate unknown name in box")

    @classmethod
    def from_dict(cls, d: Mapping[str, Interval]) -> "Box":
        return cls(tuple(d.keys()), tuple(d.values()))

    # -- access ------------------------------------------------------------

    def __getitem__(self, name: str) -> Interval:
        try:
            return self.intervals[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def index(self, name: str) -> int:
        return self.names.index(name)

    def as_dict(self) -> dict[str, Interval]:
        return dict(zip(self.names, self.intervals))

    def __iter__(self) -> Iterator[tuple[str, Interval]]:
        return iter(zip(self.names, self.intervals))

    @property
    def is_empty(self) -> bool:
        return any(iv.is_empty for iv in self.intervals)

    def contains_point(self, values: Mapping[str, float]) -> bool:
        return all(iv.contains(values[n]) for n, iv in self)

    def encloses(self, other: "Box") -> bool:
        self._check_shape(other)
        return all(a.encloses(b) for a, b in zip(self.intervals, other.intervals))

    # -- functional updates --------------------------------------------------

    def with_interval(self, name: str, iv: Interval) -> "Box":
        i = self.index(name)
        ivs = list(self.intervals)
        ivs[i] = iv
        return Box(self.names, tuple(ivs))

    # -- lattice ops (exact) -------------------------------------------------

    def _check_shape(self, other: "Box") -> None:
        if self.names != other.names:
            raise BoxShapeError(f"box unknowns differ: {self.names} vs {other.names}")

    def intersect(self, other: "Box") -> "Box":
        self._check_shape(other)
        return Box(self.names, tuple(a.intersect(b) for a, b in zip(self.intervals, other.intervals)))

    def hull(self, other: "Box") -> "Box":
        self._check_shape(other)
        return Box(self.names, tuple(a.hull(b) for a, b in zip(self.intervals, other.intervals)))

    # -- measures ------------------------------------------------------------

    def widths(self) -> tuple[float, ...]:
        return tuple(iv.width for iv in self.intervals)

    def midpoints(self) -> tuple[float, ...]:
        return tuple(iv.midpoint for iv in self.intervals)

    def relative_widths(self) -> tuple[float, ...]:
        return tuple(iv.relative_width for iv in self.intervals)

    # -- splitting -------------------------------------------------------------

    def splittable_dims(self) -> list[int]:
        out = []
        for i, iv in enumerate(self.intervals):
            if iv.is_empty or iv.is_degenerate:
                continue
            mid = iv.midpoint
            if math.isfinite(mid) and iv.lo < mid < iv.hi:
                out.append(i)
        return out

    def pick_split_dim(self, allowed: Sequence[int] | None = None) -> int | None:
        """Widest relative width wins; ties fall back to declaration order."""
        dims = self.splittable_dims() if allowed is None else list(allowed)
        best: int | None = None
        best_rw = -1.0
        for i in dims:
            rw = self.intervals[i].relative_width
            if rw > best_rw:
                best, best_rw = i, rw
        return best

    def split(self, dim: int | None = None) -> tuple["Box", "Box"]:
        """Bisect along ``dim`` (default: the pick_split_dim choice).

        The two halves tile the box: their union is the input and they share
        only the splitting hyperplane.
        """
        if dim is None:
            dim = self.pick_split_dim()
            if dim is None:
                raise IntervalError("box has no splittable dimension")
        left, right = self.intervals[dim].split()
        ivs = list(self.intervals)
        ivs[dim] = left
        lo_box = Box(self.names, tuple(ivs))
        ivs[dim] = right
        hi_box = Box(self.names, tuple(ivs))
        return lo_box, hi_box

    # -- serialization ------------------------------------------------------------

    def to_record(self) -> dict[str, list[float]]:
        return {n: [iv.lo, iv.hi] for n, iv in self}

    @classmethod
    def from_record(cls, rec: Mapping[str, Sequence[float]]) -> "Box":
        return cls(tuple(rec.keys()), tuple(Interval(float(v[0]), float(v[1])) for v in rec.values()))

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        dims = ", ".join(f"{n}=[{iv.lo:.6g}, {iv.hi:.6g}]" for n, iv in self)
        return f"Box({dims})"


# ----------------------------------------------------------------- box unions


@dataclass(frozen=True, slots=True)
class BoxUnion:
    """A finite union of same-shaped boxes (a paving).

    ``unresolved`` holds indices of boxes a paving run returned unsplit when
    its box budget ran out; they are ordinary members of the union otherwise.
    """

    boxes: tuple[Box, ...]
    unresolved: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        for b in self.boxes[1:]:
            self.boxes[0]._check_shape(b)

    @classmethod
    def single(cls, box: Box) -> "BoxUnion":
        return cls((box,))

    def __len__(self) -> int:
        return len(self.boxes)

    def __iter__(self) -> Iterator[Box]:
        return iter(self.boxes)

    @property
    def is_empty(self) -> bool:
        return all(b.is_empty for b in self.boxes)

    @property
    def names(self) -> tuple[str, ...]:
        if not self.boxes:
            raise BoxShapeError("empty union has no unknown names")
        return self.boxes[0].names

    def hull(self) -> Box:
        boxes = [b for b in self.boxes if not b.is_empty]
        if not boxes:
            raise BoxShapeError("hull of an empty union")
        out = boxes[0]
        for b in boxes[1:]:
            out = out.hull(b)
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(b.to_record()) + "\n" for b in self.boxes)

    @classmethod
    def from_jsonl(cls, text: str) -> "BoxUnion":
        boxes = tuple(Box.from_record(json.loads(line)) for line in text.splitlines() if line.strip())
        return cls(boxes)


def union_from_lines(lines: Iterable[str]) -> BoxUnion:
    return BoxUnion(tuple(Box.from_record(json.loads(line)) for line in lines if line.strip()))
