"""Expression trees shared by constraints, ODE right-hand sides and STL atoms.

A small fixed node set keeps both evaluators total: float point evaluation
and conservative interval evaluation walk the same tree.  The saturating
regulation nonlinearity ``sig+`` is a first-class node because the interval
evaluator exploits its monotonicity and the contractor inverts it in closed
form.

``sig+(x, theta, n) = max(x,0)^n / (max(x,0)^n + theta^n)``

The clamp at zero matters only for transient simulations that overshoot
below zero; on the modeled domain (concentrations, ``x >= 0``) it is the
plain Hill form, with image inside ``[0, 1]``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

from .intervals import DomainError, Interval, apply as iv_apply, iv_div, iv_pow

DEFAULT_HILL_EXPONENT = 4.0


class ExprSyntaxError(ValueError):
    """Raised on malformed expression text; carries line/column context."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = "" if line is None else f" (line {line}, col {col})"
        super().__init__(message + where)


class UndeclaredNameError(ExprSyntaxError):
    """A referenced name is not among the declared unknowns/states."""


class MissingValueError(KeyError):
    """Point evaluation hit a ref with no value; carries the ref name."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(name)


# ----------------------------------------------------------------- node types


@dataclass(frozen=True, slots=True)
class Const:
    value: float


@dataclass(frozen=True, slots=True)
class Ref:
    name: str
    kind: str = "unknown"  # "unknown" | "state" | "signal"


@dataclass(frozen=True, slots=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True, slots=True)
class Bin:
    op: str  # + - * / **
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True, slots=True)
class Call:
    fn: str  # abs | min | max | sig+ | init
    args: tuple["Expr", ...]


Expr = Const | Ref | Neg | Bin | Call


def iter_nodes(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, Neg):
        yield from iter_nodes(e.arg)
    elif isinstance(e, Bin):
        yield from iter_nodes(e.left)
        yield from iter_nodes(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from iter_nodes(a)


def refs(e: Expr) -> set[str]:
    return {n.name for n in iter_nodes(e) if isinstance(n, Ref)}


def count_ref(e: Expr, name: str) -> int:
    return sum(1 for n in iter_nodes(e) if isinstance(n, Ref) and n.name == name)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if isinstance(e, Ref) and e.name in mapping:
        return mapping[e.name]
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Bin):
        return Bin(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Call):
        return Call(e.fn, tuple(substitute(a, mapping) for a in e.args))
    return e


def flatten_sum(e: Expr, sign: float = 1.0) -> list[tuple[float, Expr]]:
    """Decompose into signed additive terms (descends through +, - and neg)."""
    if isinstance(e, Bin) and e.op == "+":
        return flatten_sum(e.left, sign) + flatten_sum(e.right, sign)
    if isinstance(e, Bin) and e.op == "-":
        return flatten_sum(e.left, sign) + flatten_sum(e.right, -sign)
    if isinstance(e, Neg):
        return flatten_sum(e.arg, -sign)
    return [(sign, e)]


# ------------------------------------------------------------ point evaluation


def _pow_pt(x: float, q: float) -> float:
    if x == 0.0 and q < 0.0:
        return math.inf
    try:
        return math.pow(x, q)
    except OverflowError:
        return math.inf if (x > 1.0 or (x < -1.0 and int(q) % 2 == 0)) else -math.inf


def sig_plus_point(x: float, theta: float, n: float = DEFAULT_HILL_EXPONENT) -> float:
    xc = max(x, 0.0)
    if xc == 0.0 and theta == 0.0:
        return 0.0
    if theta <= 0.0:
        return 1.0
    # evaluate on the ratio so huge x**n cannot overflow to inf/inf
    if xc >= theta:
        r = _pow_pt(theta / xc, n)
        return 1.0 / (1.0 + r)
    r = _pow_pt(xc / theta, n)
    return r / (r + 1.0)


def eval_point(e: Expr, values: Mapping[str, float]) -> float:
    """Evaluate at a point; raises MissingValueError naming any unvalued ref."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Ref):
        try:
            return values[e.name]
        except KeyError:
            raise MissingValueError(e.name) from None
    if isinstance(e, Neg):
        return -eval_point(e.arg, values)
    if isinstance(e, Bin):
        a = eval_point(e.left, values)
        b = eval_point(e.right, values)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                return math.inf if a > 0 else (-math.inf if a < 0 else math.nan)
            return a / b
        if e.op == "**":
            return _pow_pt(a, b)
        raise ValueError(f"unknown operator {e.op!r}")
    if isinstance(e, Call):
        if e.fn == "abs":
            return abs(eval_point(e.args[0], values))
        if e.fn == "min":
            return min(eval_point(a, values) for a in e.args)
        if e.fn == "max":
            return max(eval_point(a, values) for a in e.args)
        if e.fn == "sig+":
            x = eval_point(e.args[0], values)
            th = eval_point(e.args[1], values)
            n = eval_point(e.args[2], values)
            return sig_plus_point(x, th, n)
        if e.fn == "init":
            # resolved against trace start by the STL evaluator; as a plain
            # expression it reads the named value directly
            return eval_point(e.args[0], values)
    raise TypeError(f"cannot evaluate node {e!r}")


def term_scale(e: Expr, values: Mapping[str, float]) -> float:
    """Largest additive-term magnitude; the scale residual checks divide by."""
    return max((abs(eval_point(t, values)) for _, t in flatten_sum(e)), default=0.0)


# --------------------------------------------------------- interval evaluation


def sig_plus_interval(x: Interval, theta: Interval, n: float = DEFAULT_HILL_EXPONENT) -> Interval:
    if x.is_empty or theta.is_empty:
        return Interval.empty()
    if theta.lo >= 0.0:
        # increasing in x, decreasing in theta
        lo = sig_plus_point(x.lo, theta.hi, n)
        hi = sig_plus_point(x.hi, theta.lo, n)
        out = Interval(lo, hi).inflate()
    else:
        xc = Interval(max(x.lo, 0.0), max(x.hi, 0.0))
        xn = iv_pow(xc, n)
        tn = iv_pow(theta, n)
        out = iv_div(xn, iv_apply("add", xn, tn))
    return out.intersect(Interval(0.0, 1.0))


def eval_interval(e: Expr, box: Mapping[str, Interval]) -> Interval:
    """Conservative image of ``e`` over the box.

    For a degenerate (point) box this brackets eval_point to within the
    accumulated inflation, about 1e-12 per operation.
    """
    if isinstance(e, Const):
        return Interval.point(e.value)
    if isinstance(e, Ref):
        try:
            return box[e.name]
        except KeyError:
            raise MissingValueError(e.name) from None
    if isinstance(e, Neg):
        return iv_apply("neg", eval_interval(e.arg, box))
    if isinstance(e, Bin):
        a = eval_interval(e.left, box)
        if e.op == "**":
            if not isinstance(e.right, Const):
                raise DomainError("power exponent must be a constant")
            return iv_pow(a, e.right.value)
        b = eval_interval(e.right, box)
        return iv_apply({"+": "add", "-": "sub", "*": "mul", "/": "div"}[e.op], a, b)
    if isinstance(e, Call):
        if e.fn == "abs":
            return iv_apply("abs", eval_interval(e.args[0], box))
        if e.fn in ("min", "max"):
            out = eval_interval(e.args[0], box)
            for a in e.args[1:]:
                out = iv_apply(e.fn, out, eval_interval(a, box))
            return out
        if e.fn == "sig+":
            if not isinstance(e.args[2], Const):
                raise DomainError("sig+ exponent must be a constant")
            return sig_plus_interval(eval_interval(e.args[0], box), eval_interval(e.args[1], box), e.args[2].value)
        if e.fn == "init":
            return eval_interval(e.args[0], box)
    raise TypeError(f"cannot evaluate node {e!r}")


# -------------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "**": 4}


def to_text(e: Expr) -> str:
    """Render with minimal parentheses; parse_expr(to_text(e)) == e."""

    def render(node: Expr, parent_prec: int, right_side: bool) -> str:
        if isinstance(node, Const):
            v = node.value
            if v < 0.0 or (v == 0.0 and math.copysign(1.0, v) < 0.0):
                s = repr(v)
                return f"({s})" if parent_prec > 0 else s
            return repr(v)
        if isinstance(node, Ref):
            return node.name
        if isinstance(node, Neg):
            inner = render(node.arg, 3, False)
            s = f"-{inner}"
            return f"({s})" if parent_prec > 1 or (parent_prec == 1 and right_side) else s
        if isinstance(node, Bin):
            p = _PREC[node.op]
            if node.op == "**":
                # parenthesize any compound base so a**b reparses unchanged
                left = render(node.left, p + 1, False)
                s = f"{left}**{render(node.right, p - 1, True)}"
            else:
                left = render(node.left, p, False)
                # '-' and '/' are left-associative: equal-precedence right
                # children need parentheses
                rp = p + 1 if node.op in ("-", "/") else p
                s = f"{left} {node.op} {render(node.right, rp, True)}"
            needs = p < parent_prec or (p == parent_prec and right_side)
            return f"({s})" if needs else s
        if isinstance(node, Call):
            args = ", ".join(render(a, 0, False) for a in node.args)
            return f"{node.fn}({args})"
        raise TypeError(f"cannot render {node!r}")

    return render(e, 0, False)


# --------------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<num>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(\^eq)?)
  | (?P<op>\*\*|->|<=|>=|[-+*/(),<>=\[\]])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)

_FUNCTIONS = ("abs", "min", "max", "sig+", "init")


def tokenize(text: str, line: int | None = None) -> list[tuple[str, str, int]]:
    """Tokens as (kind, text, column); kind in num/name/func/op."""
    out: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", line, pos + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind == "name":
            # 'sig' immediately followed by '+(' is the sig+ function token
            if tok == "sig" and text[m.end() : m.end() + 2] == "+(":
                out.append(("func", "sig+", pos + 1))
                pos = m.end() + 1
                continue
            if tok in _FUNCTIONS and text[m.end() : m.end() + 1] == "(":
                out.append(("func", tok, pos + 1))
            else:
                out.append(("name", tok, pos + 1))
        elif kind != "ws":
            out.append((kind, tok, pos + 1))
        pos = m.end()
    return out


class _Parser:
    def __init__(
        self,
        tokens: list[tuple[str, str, int]],
        resolve: Callable[[str, int], Ref],
        line: int | None,
        hill_exponent: float,
        allow_init: bool,
    ):
        self.toks = tokens
        self.i = 0
        self.resolve = resolve
        self.line = line
        self.hill = hill_exponent
        self.allow_init = allow_init

    def peek(self) -> tuple[str, str, int] | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self) -> tuple[str, str, int]:
        t = self.peek()
        if t is None:
            raise ExprSyntaxError("unexpected end of expression", self.line, self.toks[-1][2] if self.toks else 1)
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        t = self.take()
        if t[1] != text:
            raise ExprSyntaxError(f"expected {text!r}, got {t[1]!r}", self.line, t[2])

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while (t := self.peek()) is not None and t[1] in ("+", "-"):
            self.take()
            node = Bin(t[1], node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while (t := self.peek()) is not None and t[1] in ("*", "/"):
            self.take()
            node = Bin(t[1], node, self.parse_unary())
        return node

    def parse_unary(self) -> Expr:
        t = self.peek()
        if t is not None and t[1] == "-":
            self.take()
            inner = self.parse_unary()
            # fold so that printed negative literals reparse to the same node
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        if t is not None and t[1] == "+":
            self.take()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        t = self.peek()
        if t is not None and t[1] == "**":
            self.take()
            exp = self.parse_unary()
            folded = _fold_const(exp)
            if folded is None:
                raise ExprSyntaxError("power exponent must be constant", self.line, t[2])
            return Bin("**", base, folded)
        return base

    def parse_atom(self) -> Expr:
        t = self.take()
        kind, text, col = t
        if kind == "num":
            return Const(float(text))
        if kind == "func":
            return self.parse_call(text, col)
        if kind == "name":
            return self.resolve(text, col)
        if text == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected token {text!r}", self.line, col)

    def parse_call(self, fn: str, col: int) -> Expr:
        self.expect("(")
        args = [self.parse_expr()]
        while (t := self.peek()) is not None and t[1] == ",":
            self.take()
            args.append(self.parse_expr())
        self.expect(")")
        if fn == "abs":
            if len(args) != 1:
                raise ExprSyntaxError("abs takes one argument", self.line, col)
        elif fn in ("min", "max"):
            if len(args) < 2:
                raise ExprSyntaxError(f"{fn} takes at least two arguments", self.line, col)
        elif fn == "sig+":
            if len(args) == 2:
                args.append(Const(self.hill))
            if len(args) != 3:
                raise ExprSyntaxError("sig+ takes (x, threshold[, exponent])", self.line, col)
            folded = _fold_const(args[2])
            if folded is None:
                raise ExprSyntaxError("sig+ exponent must be constant", self.line, col)
            args[2] = folded
        elif fn == "init":
            if not self.allow_init:
                raise ExprSyntaxError("init(...) is only valid in temporal-logic atoms", self.line, col)
            if len(args) != 1 or not isinstance(args[0], Ref):
                raise ExprSyntaxError("init takes a single signal name", self.line, col)
        return Call(fn, tuple(args))


def _fold_const(e: Expr) -> Const | None:
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        inner = _fold_const(e.arg)
        return Const(-inner.value) if inner is not None else None
    return None


def parse_expr(
    text: str,
    resolve: Callable[[str, int], Ref] | None = None,
    *,
    line: int | None = None,
    hill_exponent: float = DEFAULT_HILL_EXPONENT,
    allow_init: bool = False,
) -> Expr:
    """Parse one expression.  ``resolve`` maps a name token to a Ref node and
    is where undeclared-name errors come from; the default accepts any name
    as an unknown-ref."""
    if resolve is None:
        resolve = lambda name, col: Ref(name)  # noqa: E731
    tokens = tokenize(text, line)
    if not tokens:
        raise ExprSyntaxError("empty expression", line, 1)
    p = _Parser(tokens, resolve, line, hill_exponent, allow_init)
    node = p.parse_expr()
    if p.peek() is not None:
        t = p.peek()
        raise ExprSyntaxError(f"trailing input {t[1]!r}", line, t[2])
    return node
