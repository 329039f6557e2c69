"""Expression parsing and the two evaluators.

The load-bearing property: interval evaluation over a degenerate box agrees
with point evaluation (up to outward rounding), so the contractor and the
sampler see the same arithmetic.
"""

import math

import pytest
from hypothesis import given, strategies as st

from steadyscan.expr import (
    Bin,
    Const,
    ExprSyntaxError,
    MissingValueError,
    Neg,
    Ref,
    UndeclaredNameError,
    eval_interval,
    eval_point,
    flatten_sum,
    parse_expr,
    sig_plus_point,
    term_scale,
    to_text,
)
from steadyscan.intervals import Interval


def test_precedence_and_round_trip():
    e = parse_expr("a + b * c**2 - -d / (a + b)")
    assert isinstance(e, Bin) and e.op == "-"
    again = parse_expr(to_text(e))
    assert to_text(again) == to_text(e)


def test_power_binds_tighter_than_unary_minus():
    e = parse_expr("-a**2")
    assert isinstance(e, Neg)
    assert eval_point(e, {"a": 3.0}) == -9.0


def test_calls_parse():
    e = parse_expr("min(a, max(b, 2)) + abs(-3) + sig+(x, theta)")
    assert eval_point(e, {"a": 10.0, "b": 1.0, "x": 5.0, "theta": 5.0}) == pytest.approx(2.0 + 3.0 + 0.5)


@pytest.mark.parametrize(
    "bad",
    ["", "1 +", "a b", "min(a", "2 ** b", "(a))", "sig+(x)", "a @ b"],
)
def test_syntax_errors(bad):
    with pytest.raises(ExprSyntaxError):
        parse_expr(bad)


def test_resolver_rejects_undeclared():
    def resolve(name, col):
        if name != "x":
            raise UndeclaredNameError(name, None, col)
        return Ref(name)

    assert eval_point(parse_expr("x + 1", resolve), {"x": 1.0}) == 2.0
    with pytest.raises(UndeclaredNameError):
        parse_expr("x + y", resolve)


def test_init_gated():
    e = parse_expr("init(x) * 0.5", allow_init=True)
    assert "init" in to_text(e)
    with pytest.raises(ExprSyntaxError):
        parse_expr("init(x)")


def test_missing_value_names_the_ref():
    with pytest.raises(MissingValueError) as err:
        eval_point(parse_expr("a + b"), {"a": 1.0})
    assert "b" in str(err.value)


def test_sig_plus_shape():
    assert sig_plus_point(5.0, 5.0) == pytest.approx(0.5)
    assert sig_plus_point(0.0, 5.0) == 0.0
    assert sig_plus_point(500.0, 5.0) > 0.999
    assert sig_plus_point(0.05, 5.0) < 0.001
    # monotone in x, and a steeper hill sharpens the transition
    xs = [0.1 * k for k in range(100)]
    vals = [sig_plus_point(x, 5.0) for x in xs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert sig_plus_point(6.0, 5.0, n=8.0) > sig_plus_point(6.0, 5.0, n=2.0)
    # ratio form survives magnitudes that overflow x**n
    assert sig_plus_point(1e300, 1e-300) == 1.0


def test_flatten_sum_and_term_scale():
    e = parse_expr("a*b - c + 2")
    signs = sorted(s for s, _ in flatten_sum(e))
    assert signs == [-1, 1, 1]
    assert term_scale(e, {"a": 3.0, "b": 4.0, "c": 100.0}) == 100.0


names = st.sampled_from(["x", "y"])


@st.composite
def exprs(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        if draw(st.booleans()):
            return draw(names)
        return repr(draw(st.floats(min_value=-5, max_value=5, allow_nan=False)))
    op = draw(st.sampled_from(["+", "-", "*", "/"]))
    a = draw(exprs(depth=depth - 1))
    b = draw(exprs(depth=depth - 1))
    return f"({a} {op} {b})"


@given(exprs(), st.floats(min_value=-10, max_value=10, allow_nan=False), st.floats(min_value=-10, max_value=10, allow_nan=False))
def test_interval_eval_brackets_point_eval(text, xv, yv):
    e = parse_expr(text)
    try:
        pt = eval_point(e, {"x": xv, "y": yv})
    except ZeroDivisionError:
        return
    if not math.isfinite(pt):
        return
    box = {"x": Interval.point(xv), "y": Interval.point(yv)}
    iv = eval_interval(e, box)
    pad = 1e-10 * max(1.0, abs(pt))
    assert iv.lo - pad <= pt <= iv.hi + pad
