"""Offline monitoring of signal temporal logic formulas over traces.

Formulas are parsed against a fixed set of signal names and evaluated
quantitatively: each operator maps to min/max arithmetic on robustness
signals, so the sign of the result gives the boolean verdict and its
magnitude says how far the trace is from flipping that verdict.

Robustness signals are piecewise linear.  Atom margins are evaluated at
the trace's own sample times and interpolated linearly in between;
boolean connectives insert segment crossings before taking a pointwise
min or max, and window operators take their extremum over segment
endpoints plus the window boundaries, which is exact for piecewise-
linear input.  No resampling grid or tolerance knob is involved.

Grammar, loosest-binding first (parentheses group; keywords are
reserved and cannot be signal names):

    formula     := disjunction ('->' formula)?
    disjunction := conjunction ('or' conjunction)*
    conjunction := temporal ('and' temporal)*
    temporal    := operand ('until' window operand)*
    operand     := 'not' operand
                 | 'always' window operand
                 | 'eventually' window operand
                 | '(' formula ')'
                 | atom
    window      := '[' time ',' (time | 'inf') ']'
    atom        := arith ('<' | '<=' | '>' | '>=') arith

Atom arithmetic is the model expression language plus init(name), the
signal's value at the start of the trace.  Window times are seconds,
measured from the start of the trace; an 'inf' upper bound means the
window extends to wherever the trace ends.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .expr import (
    DEFAULT_HILL_EXPONENT,
    Bin,
    Call,
    Const,
    Expr,
    ExprSyntaxError,
    Neg,
    Ref,
    _Parser,
    _pow_pt,
    sig_plus_point,
    to_text,
    tokenize,
)
from .odesim import Trace

# |robustness| below this fraction of the largest atom margin seen on the
# trace is reported as marginal: the verdict is a coin toss numerically
MARGINAL_BAND = 1e-12


class StlError(ValueError):
    """Base for formula parsing and monitoring failures."""


class StlSyntaxError(StlError):
    def __init__(self, msg: str, col: int | None = None):
        super().__init__(f"{msg} (column {col})" if col is not None else msg)


class UnknownSignalError(StlError):
    """An atom references a name the trace does not carry."""


class WindowBoundError(StlError):
    """A temporal window is inverted or otherwise unusable."""


class HorizonError(StlError):
    """The trace ends before the formula stops reading it."""


# ----------------------------------------------------------------- formula AST


@dataclass(frozen=True)
class Atom:
    # holds when margin > 0 (strict) or margin >= 0; both evaluate to the
    # same robustness, the flag only records how the source was written
    margin: Expr
    strict: bool
    text: str

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class Not:
    sub: "StlFormula"

    def __str__(self) -> str:
        return f"not ({self.sub})"


@dataclass(frozen=True)
class And:
    lhs: "StlFormula"
    rhs: "StlFormula"

    def __str__(self) -> str:
        return f"({self.lhs}) and ({self.rhs})"


@dataclass(frozen=True)
class Or:
    lhs: "StlFormula"
    rhs: "StlFormula"

    def __str__(self) -> str:
        return f"({self.lhs}) or ({self.rhs})"


@dataclass(frozen=True)
class Implies:
    lhs: "StlFormula"
    rhs: "StlFormula"

    def __str__(self) -> str:
        return f"({self.lhs}) -> ({self.rhs})"


def _fmt_bound(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:g}"


@dataclass(frozen=True)
class Always:
    lo: float
    hi: float
    sub: "StlFormula"

    def __str__(self) -> str:
        return f"always[{_fmt_bound(self.lo)}, {_fmt_bound(self.hi)}] ({self.sub})"


@dataclass(frozen=True)
class Eventually:
    lo: float
    hi: float
    sub: "StlFormula"

    def __str__(self) -> str:
        return f"eventually[{_fmt_bound(self.lo)}, {_fmt_bound(self.hi)}] ({self.sub})"


@dataclass(frozen=True)
class Until:
    lo: float
    hi: float
    lhs: "StlFormula"
    rhs: "StlFormula"

    def __str__(self) -> str:
        return f"({self.lhs}) until[{_fmt_bound(self.lo)}, {_fmt_bound(self.hi)}] ({self.rhs})"


StlFormula = Union[Atom, Not, And, Or, Implies, Always, Eventually, Until]


@dataclass(frozen=True)
class StlVerdict:
    satisfied: bool
    robustness: float
    # set when |robustness| is so small relative to the atom margins that
    # floating-point noise could flip the verdict
    marginal: bool
    scale: float

    def __bool__(self) -> bool:
        return self.satisfied


# --------------------------------------------------------------------- parsing

_KEYWORDS = frozenset(("not", "and", "or", "always", "eventually", "until", "inf"))
_RELATIONS = ("<", "<=", ">", ">=")
# tokens that, seen right after a closing parenthesis, mean the group was
# arithmetic and not a sub-formula
_ARITH_FOLLOW = frozenset(("+", "-", "*", "/", "**", "<", "<=", ">", ">="))


class _StlParser:
    def __init__(self, tokens: list[tuple[str, str, int]], signals: frozenset[str], hill: float):
        self.toks = tokens
        self.i = 0
        self.signals = signals
        self.hill = hill

    def peek(self) -> tuple[str, str, int] | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self) -> tuple[str, str, int]:
        t = self.peek()
        if t is None:
            raise StlSyntaxError("unexpected end of formula", self.toks[-1][2] if self.toks else 1)
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        t = self.take()
        if t[1] != text:
            raise StlSyntaxError(f"expected {text!r}, got {t[1]!r}", t[2])

    def at_keyword(self, word: str) -> bool:
        t = self.peek()
        return t is not None and t[0] == "name" and t[1] == word

    def parse_formula(self) -> StlFormula:
        node = self.parse_or()
        t = self.peek()
        if t is not None and t[1] == "->":
            self.take()
            return Implies(node, self.parse_formula())
        return node

    def parse_or(self) -> StlFormula:
        node = self.parse_and()
        while self.at_keyword("or"):
            self.take()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> StlFormula:
        node = self.parse_until()
        while self.at_keyword("and"):
            self.take()
            node = And(node, self.parse_until())
        return node

    def parse_until(self) -> StlFormula:
        node = self.parse_operand()
        while self.at_keyword("until"):
            self.take()
            lo, hi = self.parse_window()
            node = Until(lo, hi, node, self.parse_operand())
        return node

    def parse_operand(self) -> StlFormula:
        t = self.peek()
        if t is None:
            raise StlSyntaxError("unexpected end of formula", self.toks[-1][2] if self.toks else 1)
        if t[0] == "name" and t[1] == "not":
            self.take()
            return Not(self.parse_operand())
        if t[0] == "name" and t[1] in ("always", "eventually"):
            self.take()
            lo, hi = self.parse_window()
            sub = self.parse_operand()
            return Always(lo, hi, sub) if t[1] == "always" else Eventually(lo, hi, sub)
        if t[1] == "(" and self._group_is_formula():
            self.take()
            node = self.parse_formula()
            self.expect(")")
            return node
        return self.parse_atom()

    def _group_is_formula(self) -> bool:
        """Is the '(' at the cursor a formula group or arithmetic?

        Scans to the matching ')': if what follows would continue an
        arithmetic expression or a comparison, the group belongs to an
        atom and the whole atom is handed to the expression parser.
        """
        depth = 0
        j = self.i
        while j < len(self.toks):
            tok = self.toks[j][1]
            if tok == "(":
                depth += 1
            elif tok == ")":
                depth -= 1
                if depth == 0:
                    after = self.toks[j + 1][1] if j + 1 < len(self.toks) else None
                    return after not in _ARITH_FOLLOW
            j += 1
        raise StlSyntaxError("unbalanced parentheses", self.toks[self.i][2])

    def parse_window(self) -> tuple[float, float]:
        self.expect("[")
        lo = self._time_bound(allow_inf=False)
        self.expect(",")
        hi = self._time_bound(allow_inf=True)
        self.expect("]")
        if hi < lo:
            raise WindowBoundError(f"window [{_fmt_bound(lo)}, {_fmt_bound(hi)}] has inverted bounds")
        return lo, hi

    def _time_bound(self, allow_inf: bool) -> float:
        t = self.take()
        if t[0] == "num":
            return float(t[1])
        if t[0] == "name" and t[1] == "inf":
            if not allow_inf:
                raise StlSyntaxError("a window must start at a finite time", t[2])
            return math.inf
        raise StlSyntaxError(f"expected a time bound, got {t[1]!r}", t[2])

    def parse_atom(self) -> Atom:
        lhs = self._arith()
        t = self.take()
        if t[1] == "=":
            raise StlSyntaxError("equality atoms are not supported, use >= and <=", t[2])
        if t[1] not in _RELATIONS:
            raise StlSyntaxError(f"expected a comparison, got {t[1]!r}", t[2])
        rhs = self._arith()
        nxt = self.peek()
        if nxt is not None and nxt[1] in _RELATIONS:
            raise StlSyntaxError("chained comparisons are not supported", nxt[2])
        # normalize to a margin that is positive when the atom holds
        if t[1] in (">", ">="):
            margin = Bin("-", lhs, rhs)
        else:
            margin = Bin("-", rhs, lhs)
        return Atom(margin, t[1] in ("<", ">"), f"{to_text(lhs)} {t[1]} {to_text(rhs)}")

    def _arith(self) -> Expr:
        p = _Parser(self.toks, self._resolve, None, self.hill, allow_init=True)
        p.i = self.i
        try:
            node = p.parse_expr()
        except ExprSyntaxError as e:
            raise StlSyntaxError(str(e)) from e
        self.i = p.i
        return node

    def _resolve(self, name: str, col: int) -> Ref:
        if name in _KEYWORDS or name not in self.signals:
            raise UnknownSignalError(f"unknown signal {name!r} (column {col})")
        return Ref(name)


def parse_stl(
    text: str,
    signals: Iterable[str],
    *,
    hill_exponent: float = DEFAULT_HILL_EXPONENT,
) -> StlFormula:
    """Parse a formula; atoms may only reference names in ``signals``."""
    try:
        tokens = tokenize(text)
    except ExprSyntaxError as e:
        raise StlSyntaxError(str(e)) from e
    if not tokens:
        raise StlSyntaxError("empty formula")
    p = _StlParser(tokens, frozenset(signals), hill_exponent)
    node = p.parse_formula()
    t = p.peek()
    if t is not None:
        raise StlSyntaxError(f"trailing input {t[1]!r}", t[2])
    return node


def horizon(f: StlFormula) -> float:
    """Latest trace time the formula reads, measured from the trace start.

    Unbounded windows stretch to wherever the trace ends, so they demand
    nothing beyond their start offset.
    """
    if isinstance(f, Atom):
        return 0.0
    if isinstance(f, Not):
        return horizon(f.sub)
    if isinstance(f, (And, Or, Implies)):
        return max(horizon(f.lhs), horizon(f.rhs))
    if isinstance(f, (Always, Eventually)):
        reach = f.lo if math.isinf(f.hi) else f.hi
        return reach + horizon(f.sub)
    if isinstance(f, Until):
        reach = f.lo if math.isinf(f.hi) else f.hi
        return reach + max(horizon(f.lhs), horizon(f.rhs))
    raise TypeError(f"not a formula node: {f!r}")


# -------------------------------------------------- piecewise-linear machinery
#
# A robustness signal is (times, values) with strictly increasing times
# starting at 0 and linear interpolation in between.  All operators below
# keep that representation closed.

_Sig = tuple[np.ndarray, np.ndarray]


def _eval_samples(e: Expr, tr: Trace) -> np.ndarray:
    n = len(tr.times)
    if isinstance(e, Const):
        return np.full(n, e.value)
    if isinstance(e, Ref):
        try:
            return tr.signal(e.name)
        except KeyError:
            raise UnknownSignalError(f"trace has no signal {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval_samples(e.arg, tr)
    if isinstance(e, Bin):
        left = _eval_samples(e.left, tr)
        if e.op == "**":
            # parser guarantees a constant exponent
            q = e.right.value  # type: ignore[union-attr]
            return np.vectorize(_pow_pt, otypes=[float])(left, q)
        right = _eval_samples(e.right, tr)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        with np.errstate(divide="ignore", invalid="ignore"):
            return left / right
    if isinstance(e, Call):
        if e.fn == "init":
            name = e.args[0].name  # type: ignore[union-attr]
            try:
                return np.full(n, tr.initial(name))
            except KeyError:
                raise UnknownSignalError(f"trace has no signal {name!r}") from None
        args = [_eval_samples(a, tr) for a in e.args]
        if e.fn == "abs":
            return np.abs(args[0])
        if e.fn == "min":
            return np.minimum.reduce(args)
        if e.fn == "max":
            return np.maximum.reduce(args)
        if e.fn == "sig+":
            return np.vectorize(sig_plus_point, otypes=[float])(*args)
    raise TypeError(f"cannot evaluate {e!r}")


def _merge_grids(a: _Sig, b: _Sig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Both signals on one grid refined with their mutual crossings."""
    t = np.union1d(a[0], b[0])
    va = np.interp(t, a[0], a[1])
    vb = np.interp(t, b[0], b[1])
    d = va - vb
    ix = np.nonzero(d[:-1] * d[1:] < 0.0)[0]
    if ix.size:
        tc = t[ix] + (t[ix + 1] - t[ix]) * (d[ix] / (d[ix] - d[ix + 1]))
        t = np.unique(np.concatenate((t, tc)))
        va = np.interp(t, a[0], a[1])
        vb = np.interp(t, b[0], b[1])
    return t, va, vb


def _pointwise_min(a: _Sig, b: _Sig) -> _Sig:
    t, va, vb = _merge_grids(a, b)
    return t, np.minimum(va, vb)


def _pointwise_max(a: _Sig, b: _Sig) -> _Sig:
    t, va, vb = _merge_grids(a, b)
    return t, np.maximum(va, vb)


def _window_extremum(sig: _Sig, lo_off: float, hi_off: float, t_end: float, want_min: bool) -> _Sig:
    """Sliding inf/sup of a signal over the window [t+lo, t+hi].

    Output breakpoints sit where a window boundary crosses an input
    breakpoint; the extremum there is exact because a piecewise-linear
    signal attains it at a breakpoint or at a window edge.  Windows are
    clamped to the trace, so an infinite upper bound reads to the end.
    """
    t, v = sig
    pieces = [t - lo_off, np.array([0.0, t_end])]
    if math.isfinite(hi_off):
        pieces.append(t - hi_off)
    c = np.concatenate(pieces)
    c = np.unique(c[(c >= 0.0) & (c <= t_end)])
    lo = np.minimum(c + lo_off, t_end)
    hi = np.minimum(c + hi_off, t_end)
    vlo = np.interp(lo, t, v)
    vhi = np.interp(hi, t, v)
    pick = np.minimum if want_min else np.maximum
    out = pick(vlo, vhi)
    # monotone deque over breakpoints inside the window; both window edges
    # only ever move right as the output time advances
    dq: deque[int] = deque()
    right = 0
    fill = math.inf if want_min else -math.inf
    inner = np.full(len(c), fill)
    for k in range(len(c)):
        while right < len(t) and t[right] <= hi[k]:
            if want_min:
                while dq and v[right] <= v[dq[-1]]:
                    dq.pop()
            else:
                while dq and v[right] >= v[dq[-1]]:
                    dq.pop()
            dq.append(right)
            right += 1
        while dq and t[dq[0]] < lo[k]:
            dq.popleft()
        if dq:
            out[k] = pick(out[k], v[dq[0]])
        # a breakpoint sitting exactly on the left window edge leaves the
        # window right after this instant (its value here is the edge value
        # vlo anyway), so the constant for the open interval excludes it
        while dq and t[dq[0]] <= lo[k]:
            dq.popleft()
        if dq:
            inner[k] = v[dq[0]]
    if len(c) < 2:
        return c, out
    # between consecutive output times the extremum is min/max of three
    # linear pieces (each window edge plus the best interior breakpoint,
    # all of which persist across the open interval), so it can kink
    # strictly inside; insert those crossings to stay piecewise linear
    ts = [c]
    vs = [out]
    span = np.diff(c)
    lines = ((vlo[:-1], vlo[1:]), (vhi[:-1], vhi[1:]), (inner[:-1], inner[:-1]))
    for (a0, a1), (b0, b1) in ((lines[0], lines[1]), (lines[0], lines[2]), (lines[1], lines[2])):
        d0 = a0 - b0
        d1 = a1 - b1
        with np.errstate(invalid="ignore"):
            mask = (d0 * d1 < 0.0) & np.isfinite(d0) & np.isfinite(d1)
        if not mask.any():
            continue
        r = d0[mask] / (d0[mask] - d1[mask])
        tx = c[:-1][mask] + r * span[mask]
        w = np.stack(
            (
                vlo[:-1][mask] + (vlo[1:] - vlo[:-1])[mask] * r,
                vhi[:-1][mask] + (vhi[1:] - vhi[:-1])[mask] * r,
                inner[:-1][mask],
            )
        )
        ts.append(tx)
        vs.append(np.min(w, axis=0) if want_min else np.max(w, axis=0))
    if len(ts) == 1:
        return c, out
    allt = np.concatenate(ts)
    order = np.argsort(allt, kind="stable")
    allt = allt[order]
    allv = np.concatenate(vs)[order]
    keep = np.concatenate(([True], np.diff(allt) > 0.0))
    return allt[keep], allv[keep]


def _seg_sup_min3(p: float, q: float, fa: float, fb: float, ga: float, gb: float, cap: float) -> float:
    """Sup over [p, q] of min(f, g, cap) with f and g linear on the segment.

    The minimum of three linear pieces is concave, so the sup sits at a
    segment end or where two pieces cross; every crossing is checked.
    """
    if q < p:
        return -math.inf
    span = q - p
    xs = [p, q]
    if span > 0.0:
        df = fb - fa
        dg = gb - ga
        # f meets g
        if df != dg:
            r = (ga - fa) / (df - dg)
            if 0.0 < r < 1.0:
                xs.append(p + r * span)
        # f meets cap, g meets cap
        if df != 0.0:
            r = (cap - fa) / df
            if 0.0 < r < 1.0:
                xs.append(p + r * span)
        if dg != 0.0:
            r = (cap - ga) / dg
            if 0.0 < r < 1.0:
                xs.append(p + r * span)
    best = -math.inf
    for x in xs:
        w = 0.0 if span == 0.0 else (x - p) / span
        fx = fa + (fb - fa) * w
        gx = ga + (gb - ga) * w
        best = max(best, min(fx, gx, cap))
    return best


def _until_at(grid: np.ndarray, f: np.ndarray, g: np.ndarray, t0: float, w_lo: float, w_hi: float) -> float:
    """Exact until robustness at one output time.

    Walks the refined grid from t0, carrying the running infimum of the
    left operand, and takes the sup of min(right, running-inf) over the
    window; within one segment that is a sup of min of linear pieces.
    """
    pts = np.unique(np.clip(np.concatenate((grid, (t0, w_lo, w_hi))), t0, w_hi))
    fv = np.interp(pts, grid, f)
    gv = np.interp(pts, grid, g)
    run = fv[0]
    best = -math.inf
    if pts[0] >= w_lo:
        best = min(gv[0], run)
    for k in range(len(pts) - 1):
        p, q = pts[k], pts[k + 1]
        cap = min(run, fv[k])
        if q >= w_lo:
            a = max(p, w_lo)
            wa = 0.0 if q == p else (a - p) / (q - p)
            fa = fv[k] + (fv[k + 1] - fv[k]) * wa
            ga = gv[k] + (gv[k + 1] - gv[k]) * wa
            best = max(best, _seg_sup_min3(a, q, fa, fv[k + 1], ga, gv[k + 1], cap))
        run = min(cap, fv[k + 1])
    return best


def _until_signal(sf: _Sig, sg: _Sig, lo_off: float, hi_off: float, t_end: float) -> _Sig:
    grid = np.union1d(sf[0], sg[0])
    f = np.interp(grid, sf[0], sf[1])
    g = np.interp(grid, sg[0], sg[1])
    pieces = [grid, grid - lo_off, np.array([0.0, t_end])]
    if math.isfinite(hi_off):
        pieces.append(grid - hi_off)
    c = np.concatenate(pieces)
    c = np.unique(c[(c >= 0.0) & (c <= t_end)])

    def at(t0: float) -> float:
        return _until_at(grid, f, g, t0, min(t0 + lo_off, t_end), min(t0 + hi_off, t_end))

    out = np.array([at(t0) for t0 in c])
    # the output kinks at times that are awkward to enumerate (the optimal
    # witness switches regime), so refine intervals where the chord misses
    # the true value; two probe points per interval catch a lone kink that
    # a midpoint alone could straddle symmetrically
    finite = np.abs(out[np.isfinite(out)])
    eps = 1e-12 * (float(finite.max()) if finite.size else 1.0) + 1e-300
    work = [(c[k], out[k], c[k + 1], out[k + 1], 0) for k in range(len(c) - 1)]
    extra_t: list[float] = []
    extra_v: list[float] = []
    while work:
        t1, v1, t2, v2, depth = work.pop()
        if depth >= 10 or t2 - t1 <= 0.0:
            continue
        worst = None
        for r in (0.5, 0.381966):
            tm = t1 + r * (t2 - t1)
            vm = at(tm)
            chord = v1 + (v2 - v1) * r
            gap = abs(vm - chord) if math.isfinite(vm) and math.isfinite(chord) else (0.0 if vm == chord else math.inf)
            if gap > eps and (worst is None or gap > worst[2]):
                worst = (tm, vm, gap)
        if worst is not None:
            tm, vm, _ = worst
            extra_t.append(tm)
            extra_v.append(vm)
            work.append((t1, v1, tm, vm, depth + 1))
            work.append((tm, vm, t2, v2, depth + 1))
    if extra_t:
        allt = np.concatenate((c, extra_t))
        order = np.argsort(allt, kind="stable")
        allt = allt[order]
        allv = np.concatenate((out, extra_v))[order]
        keep = np.concatenate(([True], np.diff(allt) > 0.0))
        return allt[keep], allv[keep]
    return c, out


def _build_signal(f: StlFormula, tr: Trace, peak: list[float]) -> _Sig:
    if isinstance(f, Atom):
        m = _eval_samples(f.margin, tr)
        finite = m[np.isfinite(m)]
        if finite.size:
            peak[0] = max(peak[0], float(np.max(np.abs(finite))))
        return tr.times - tr.times[0], m
    if isinstance(f, Not):
        t, v = _build_signal(f.sub, tr, peak)
        return t, -v
    if isinstance(f, And):
        return _pointwise_min(_build_signal(f.lhs, tr, peak), _build_signal(f.rhs, tr, peak))
    if isinstance(f, Or):
        return _pointwise_max(_build_signal(f.lhs, tr, peak), _build_signal(f.rhs, tr, peak))
    if isinstance(f, Implies):
        t, v = _build_signal(f.lhs, tr, peak)
        return _pointwise_max((t, -v), _build_signal(f.rhs, tr, peak))
    span = float(tr.times[-1] - tr.times[0])
    if isinstance(f, Always):
        return _window_extremum(_build_signal(f.sub, tr, peak), f.lo, f.hi, span, want_min=True)
    if isinstance(f, Eventually):
        return _window_extremum(_build_signal(f.sub, tr, peak), f.lo, f.hi, span, want_min=False)
    if isinstance(f, Until):
        return _until_signal(
            _build_signal(f.lhs, tr, peak),
            _build_signal(f.rhs, tr, peak),
            f.lo,
            f.hi,
            span,
        )
    raise TypeError(f"not a formula node: {f!r}")


def _check_horizon(f: StlFormula, tr: Trace) -> None:
    need = horizon(f)
    have = float(tr.times[-1] - tr.times[0])
    if need > have:
        raise HorizonError(f"formula reads {need:g} s of trace but only {have:g} s were recorded")


# ------------------------------------------------------------------ monitoring


def robustness(f: StlFormula, tr: Trace) -> float:
    """Quantitative verdict at the start of the trace.

    Positive means satisfied, negative means violated, and the magnitude
    is how far signals may shift (in atom-margin units) before the
    verdict can change.  Formula times are measured from the first trace
    sample.
    """
    _check_horizon(f, tr)
    t, v = _build_signal(f, tr, [0.0])
    return float(v[0])


def satisfies(f: StlFormula, tr: Trace) -> StlVerdict:
    """Boolean verdict with the robustness behind it.

    The verdict is robustness > 0; when |robustness| is tiny against the
    largest atom margin seen on the trace, the marginal flag warns that
    rounding could have flipped it.
    """
    _check_horizon(f, tr)
    peak = [0.0]
    t, v = _build_signal(f, tr, peak)
    rho = float(v[0])
    scale = peak[0] if peak[0] > 0.0 else 1.0
    return StlVerdict(rho > 0.0, rho, abs(rho) < MARGINAL_BAND * scale, scale)
