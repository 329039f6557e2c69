"""Interval arithmetic containment: x in A and y in B imply x op y in A op B.

The randomized containment property is the module's core soundness claim;
everything else (lattice ops, splitting, serialization) is pinned by direct
cases.
"""

import math

import pytest
from hypothesis import given, strategies as st

from steadyscan.intervals import (
    Box,
    BoxUnion,
    DomainError,
    Interval,
    IntervalError,
    apply,
    iv_abs,
    iv_add,
    iv_div,
    iv_mul,
    iv_pow,
    iv_sub,
)

finite = st.floats(min_value=-1e8, max_value=1e8, allow_nan=False)
unit = st.floats(min_value=0.0, max_value=1.0)


def make_interval(lo, width, u):
    iv = Interval(lo, lo + width)
    x = min(lo + u * width, iv.hi)
    return iv, x


@given(finite, unit, finite, unit, st.floats(min_value=0, max_value=100), st.floats(min_value=0, max_value=100))
def test_containment_add_sub_mul(lo1, u1, lo2, u2, w1, w2):
    a, x = make_interval(lo1, w1, u1)
    b, y = make_interval(lo2, w2, u2)
    assert x + y in iv_add(a, b)
    assert x - y in iv_sub(a, b)
    assert x * y in iv_mul(a, b)
    assert min(x, y) in apply("min", a, b)
    assert max(x, y) in apply("max", a, b)


@given(finite, unit, finite, unit, st.floats(min_value=0, max_value=100), st.floats(min_value=0, max_value=100))
def test_containment_div(lo1, u1, lo2, u2, w1, w2):
    a, x = make_interval(lo1, w1, u1)
    b, y = make_interval(lo2, w2, u2)
    if y == 0.0:
        return
    assert x / y in iv_div(a, b)


@given(finite, unit, st.floats(min_value=0, max_value=50), st.sampled_from([-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 0.5, 1.5]))
def test_containment_pow(lo, u, w, q):
    a, x = make_interval(lo, w, u)
    if q != int(q) and a.lo < 0.0:
        with pytest.raises(DomainError):
            iv_pow(a, q)
        return
    if q < 0 and x == 0.0:
        return
    assert x**q in iv_pow(a, q)


@given(finite, unit, st.floats(min_value=0, max_value=100))
def test_containment_unary(lo, u, w):
    a, x = make_interval(lo, w, u)
    assert -x in apply("neg", a)
    assert abs(x) in iv_abs(a)


def test_division_through_zero_is_unbounded():
    out = iv_div(Interval(1.0, 2.0), Interval(-1.0, 1.0))
    assert out.lo == -math.inf and out.hi == math.inf
    # sign-definite divisor touching zero keeps one side
    out = iv_div(Interval(1.0, 2.0), Interval(0.0, 1.0))
    assert out.hi == math.inf and out.lo > 0.0


def test_empty_interval_basics():
    e = Interval.empty()
    assert e.is_empty
    assert not e.contains(0.0)
    assert e.width == 0.0
    assert Interval(0, 1).encloses(e)
    assert e.intersect(Interval(0, 1)).is_empty
    assert e.hull(Interval(0, 1)) == Interval(0, 1)
    with pytest.raises(IntervalError):
        e.split()
    with pytest.raises(IntervalError):
        _ = e.midpoint


def test_nan_endpoint_rejected():
    with pytest.raises(IntervalError):
        Interval(math.nan, 1.0)


def test_intersect_disjoint_is_empty():
    assert Interval(0, 1).intersect(Interval(2, 3)).is_empty


@given(finite, st.floats(min_value=1e-6, max_value=100), unit)
def test_split_tiles_interval(lo, w, u):
    iv = Interval(lo, lo + w)
    if not (iv.lo < iv.midpoint < iv.hi):
        return
    left, right = iv.split()
    assert left.hi == right.lo
    assert left.lo == iv.lo and right.hi == iv.hi
    x = min(lo + u * w, iv.hi)
    assert x in left or x in right


def test_inflate_strictly_widens():
    iv = Interval(1.0, 2.0)
    out = iv.inflate()
    assert out.lo < 1.0 < 2.0 < out.hi
    assert out.encloses(iv)


def test_relative_width_conventions():
    assert Interval.point(5.0).relative_width == 0.0
    assert Interval(-1.0, 1.0).relative_width == math.inf
    assert Interval(1.0, 3.0).relative_width == pytest.approx(1.0)


def test_apply_rejects_unknown_and_bad_arity():
    with pytest.raises(ValueError):
        apply("hypot", Interval(0, 1), Interval(0, 1))
    with pytest.raises(TypeError):
        apply("neg", Interval(0, 1), Interval(0, 1))
    with pytest.raises(TypeError):
        apply("pow", Interval(0, 1))
    with pytest.raises(TypeError):
        apply("pow", Interval(0, 1), Interval(1.0, 2.0))
    assert apply("pow", Interval(2, 3), Interval.point(2.0)) == iv_pow(Interval(2, 3), 2.0)


def test_box_point_containment_and_lattice():
    box = Box.from_dict({"x": Interval(0, 1), "y": Interval(-1, 1)})
    assert box.contains_point({"x": 0.5, "y": 0.0})
    assert not box.contains_point({"x": 1.5, "y": 0.0})
    other = Box.from_dict({"x": Interval(0.5, 2), "y": Interval(0, 3)})
    meet = box.intersect(other)
    assert meet["x"] == Interval(0.5, 1.0) and meet["y"] == Interval(0.0, 1.0)
    join = box.hull(other)
    assert join.encloses(box) and join.encloses(other)


def test_box_split_covers():
    box = Box.from_dict({"x": Interval(0, 4), "y": Interval(0, 1)})
    left, right = box.split(0)
    assert left["x"].hi == right["x"].lo == 2.0
    assert left["y"] == right["y"] == Interval(0, 1)
    # widest-relative dimension picked by default
    assert box.pick_split_dim() == box.index("x")


def test_box_record_round_trip():
    box = Box.from_dict({"a": Interval(1e-9, 2e-9), "b": Interval(0, 1)})
    assert Box.from_record(box.to_record()) == box


def test_box_union_jsonl_round_trip():
    b1 = Box.from_dict({"x": Interval(0, 1)})
    b2 = Box.from_dict({"x": Interval(1, 2)})
    u = BoxUnion((b1, b2))
    again = BoxUnion.from_jsonl(u.to_jsonl())
    assert again.boxes == (b1, b2)
    assert not u.is_empty
    assert u.hull()["x"] == Interval(0.0, 2.0)
