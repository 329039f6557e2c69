"""Steady-state sampling by constraint-directed search.

The search instantiates unknowns one at a time (tearing), narrows the
remaining box after every assignment, deduces whatever an equality pins
down exactly, checks constraints the moment they become fully assigned,
and decomposes the residual system into independent sub-problems solved
hardest-first.  Sampling distributions follow the declared scale
(log-uniform across decades for rate constants), and every attempt owns
a child RNG derived from (seed, attempt index) so sequential and
parallel runs agree.

Emitted solutions are re-validated from scratch: equality residuals
within tolerance, inequalities strictly, every value inside its domain.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .expr import (
    Bin,
    Call,
    Const,
    Expr,
    Neg,
    Ref,
    count_ref,
    eval_interval,
    eval_point,
    flatten_sum,
    term_scale,
)
from .intervals import Box, BoxUnion, Interval
from .modelfile import Constraint, Model
from .propagate import DEFAULT_TOL, IncrementalPropagator

RTOL = 1e-9
ATOL = 1e-20
DEFAULT_TEAR_RETRIES = 2


class DomainViolation(Exception):
    """A value left its unknown's interval at insertion time."""

    def __init__(self, name: str, value: float, interval: Interval):
        super().__init__(f"{name} = {value!r} outside [{interval.lo!r}, {interval.hi!r}]")
        self.name = name
        self.value = value
        self.interval = interval


class DeadBranch(Exception):
    """A partial assignment was proven unextendable; carries the blocking id."""

    def __init__(self, cid: str):
        super().__init__(cid)
        self.cid = cid


class _EpisodeExhausted(Exception):
    """Per-attempt draw cap hit: abort the whole episode, skip retries."""


# -------------------------------------------------------------------- types


@dataclass
class Assignment:
    values: dict[str, float] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    def insert(
        self,
        name: str,
        value: float,
        box: Box | None,
        provenance: str,
        stats: "SearchStats | None" = None,
    ) -> None:
        """Record a value, checking it against the active box first.

        The check allows a hair of relative slack: propagation can contract
        an interval to a point whose last bits differ from the value an
        isolation walk computes for the same root.
        """
        if box is not None:
            iv = box[name]
            slack = RTOL * max(abs(iv.lo), abs(iv.hi))
            ok = (not iv.is_empty) and iv.lo - slack <= value <= iv.hi + slack
            if stats is not None:
                stats.count_check(f"domain:{name}", ok=ok)
            if not ok:
                raise DomainViolation(name, value, iv)
        self.values[name] = value
        self.provenance[name] = provenance

    def copy(self) -> "Assignment":
        return Assignment(dict(self.values), dict(self.provenance))


@dataclass
class SearchStats:
    checked: dict[str, int] = field(default_factory=dict)
    violated: dict[str, int] = field(default_factory=dict)
    attempts: dict[str, int] = field(default_factory=dict)
    successes: dict[str, int] = field(default_factory=dict)
    samples_drawn: int = 0
    episodes: int = 0
    solutions_found: int = 0
    wall_time: float = 0.0

    def count_check(self, cid: str, ok: bool) -> None:
        self.checked[cid] = self.checked.get(cid, 0) + 1
        if not ok:
            self.violated[cid] = self.violated.get(cid, 0) + 1

    def count_draw(self, subproblem: str) -> None:
        self.attempts[subproblem] = self.attempts.get(subproblem, 0) + 1
        self.samples_drawn += 1

    def count_success(self, subproblem: str) -> None:
        self.successes[subproblem] = self.successes.get(subproblem, 0) + 1

    def violation_rate(self, cid: str) -> float:
        n = self.checked.get(cid, 0)
        return (self.violated.get(cid, 0) / n) if n else 0.0

    def constraint_stats(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for cid, n in self.checked.items():
            out[cid] = {"checked": n, "violated": self.violated.get(cid, 0)}
        return out

    def merge(self, other: "SearchStats") -> "SearchStats":
        for src, dst in (
            (other.checked, self.checked),
            (other.violated, self.violated),
            (other.attempts, self.attempts),
            (other.successes, self.successes),
        ):
            for k, v in src.items():
                dst[k] = dst.get(k, 0) + v
        self.samples_drawn += other.samples_drawn
        self.episodes += other.episodes
        self.solutions_found += other.solutions_found
        self.wall_time = max(self.wall_time, other.wall_time)
        return self

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(
            {
                "checked": self.checked,
                "violated": self.violated,
                "attempts": self.attempts,
                "successes": self.successes,
                "samples_drawn": self.samples_drawn,
                "episodes": self.episodes,
                "solutions_found": self.solutions_found,
                "wall_time": self.wall_time,
            },
            indent=indent,
        )


@dataclass(frozen=True)
class Solution:
    assignment: Assignment
    residuals: dict[str, float]

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "values": self.assignment.values,
                "provenance": self.assignment.provenance,
                "residuals": self.residuals,
            }
        )

    @staticmethod
    def from_json_line(line: str) -> "Solution":
        raw = json.loads(line)
        return Solution(Assignment(raw["values"], raw.get("provenance", {})), raw.get("residuals", {}))


def solutions_to_jsonl(sols: Iterable[Solution]) -> str:
    return "".join(s.to_json_line() + "\n" for s in sols)


def solutions_from_jsonl(text: str) -> list[Solution]:
    return [Solution.from_json_line(ln) for ln in text.splitlines() if ln.strip()]


# ------------------------------------------------------------ residual checks


def equality_tolerance(c: Constraint, values: Mapping[str, float], rtol: float = RTOL, atol: float = ATOL) -> float:
    scale = max(abs(eval_point(c.rhs, values)), term_scale(c.lhs, values), term_scale(c.rhs, values))
    return atol + rtol * scale


def residual(c: Constraint, values: Mapping[str, float]) -> float:
    """Signed slack: 0-tolerance for equalities, positive margin for inequalities."""
    lhs = eval_point(c.lhs, values)
    rhs = eval_point(c.rhs, values)
    if c.rel == "=":
        return lhs - rhs
    if c.rel in ("<", "<="):
        return rhs - lhs
    return lhs - rhs


def holds(c: Constraint, values: Mapping[str, float], rtol: float = RTOL, atol: float = ATOL) -> bool:
    r = residual(c, values)
    if c.rel == "=":
        return abs(r) <= equality_tolerance(c, values, rtol, atol)
    return r > 0.0  # inequalities must hold strictly


# ----------------------------------------------------------- early checking


@dataclass(frozen=True)
class CheckOutcome:
    checked: tuple[str, ...]
    failed: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failed


def early_check(
    a: Assignment,
    cs: Sequence[Constraint],
    stats: SearchStats | None = None,
) -> CheckOutcome:
    """Evaluate every constraint whose refs are all assigned.

    Partially assigned constraints are skipped and not counted.  Violations
    are reported, not raised; the caller decides whether the branch dies.
    """
    checked: list[str] = []
    failed: list[str] = []
    for c in cs:
        if any(n not in a.values for n in c.names()):
            continue
        ok = holds(c, a.values)
        checked.append(c.cid)
        if stats is not None:
            stats.count_check(c.cid, ok)
        if not ok:
            failed.append(c.cid)
    return CheckOutcome(tuple(checked), tuple(failed))


# ------------------------------------------------------- redundant constraints


def _nonneg(e: Expr, box: Box | None) -> bool:
    if isinstance(e, Const):
        return e.value >= 0.0
    if isinstance(e, Ref):
        return box is not None and box[e.name].lo >= 0.0
    if isinstance(e, Neg):
        return False
    if isinstance(e, Bin):
        if e.op in ("*", "/"):
            return _nonneg(e.left, box) and _nonneg(e.right, box)
        if e.op == "+":
            return _nonneg(e.left, box) and _nonneg(e.right, box)
        if e.op == "**":
            n = e.right.value
            if float(n).is_integer() and int(n) % 2 == 0:
                return True
            return _nonneg(e.left, box)
        return False
    if isinstance(e, Call):
        if e.fn in ("abs", "sig+"):
            return True
        if e.fn in ("min", "max"):
            return all(_nonneg(a, box) for a in e.args)
    return False


def add_redundant(cs: Sequence[Constraint], *, domains: Box | None = None) -> list[Constraint]:
    """Derive simpler constraints that can be checked earlier.

    Two sources: derivation rules shipped on a constraint (its ``derived``
    children, already parsed), and the generic pattern "sum of nonnegative
    terms bounded above by a constant", which yields one bound per term.
    Nonnegativity of a term is established from ``domains`` when given,
    else structurally.  Originals are never modified.
    """
    out: list[Constraint] = []
    existing = {c.cid for c in cs}
    for c in cs:
        out.extend(c.derived)
        existing.update(ch.cid for ch in c.derived)
    for c in cs:
        if c.rel not in ("<", "<=") or not isinstance(c.rhs, Const) or c.is_redundant:
            continue
        terms = flatten_sum(c.lhs)
        if len(terms) < 2:
            continue
        if not all(sign > 0 and _nonneg(term, domains) for sign, term in terms):
            continue
        for i, (_, term) in enumerate(terms):
            cid = f"{c.cid}:r{i}"
            if cid in existing:
                continue
            existing.add(cid)
            out.append(
                Constraint(cid, term, c.rel, c.rhs, tags=c.tags | frozenset(["redundant"]))
            )
    return out


# ------------------------------------------------------------------ deduction


def _sym_kind(e: Expr, u: str) -> str | None:
    """'const' if e never mentions u, 'linear' if e is affine in u, else None."""
    if isinstance(e, Const):
        return "const"
    if isinstance(e, Ref):
        return "linear" if e.name == u else "const"
    if isinstance(e, Neg):
        return _sym_kind(e.arg, u)
    if isinstance(e, Bin):
        lk = _sym_kind(e.left, u)
        rk = _sym_kind(e.right, u)
        if lk is None or rk is None:
            return None
        if e.op in ("+", "-"):
            return "linear" if "linear" in (lk, rk) else "const"
        if e.op == "*":
            if lk == rk == "const":
                return "const"
            if lk == "linear" and rk == "linear":
                return None
            return "linear"
        if e.op == "/":
            if rk != "const":
                return None
            return lk
        if e.op == "**":
            if lk == "const":
                return "const"
            return "linear" if e.right.value == 1 else None
    if isinstance(e, Call):
        kinds = [_sym_kind(a, u) for a in e.args]
        if any(k is None or k == "linear" for k in kinds):
            return None
        return "const"
    return None


_ISOLATABLE = (Neg, Bin)


def _isolation_path_ok(e: Expr, u: str) -> bool:
    if isinstance(e, Ref):
        return e.name == u
    if isinstance(e, Neg):
        return _isolation_path_ok(e.arg, u)
    if isinstance(e, Bin):
        lc = count_ref(e.left, u)
        inner = e.left if lc else e.right
        return _isolation_path_ok(inner, u)
    return False  # calls are not inverted


def can_solve_for(c: Constraint, u: str) -> str | None:
    """Whether deduce could pin u from equality c: 'linear', 'isolate', or None."""
    if c.rel != "=":
        return None
    occ = count_ref(c.lhs, u) + count_ref(c.rhs, u)
    if occ == 0:
        return None
    lk = _sym_kind(c.lhs, u)
    rk = _sym_kind(c.rhs, u)
    if lk is not None and rk is not None:
        return "linear"
    if occ == 1:
        side = c.lhs if count_ref(c.lhs, u) else c.rhs
        other = c.rhs if side is c.lhs else c.lhs
        if _sym_kind(other, u) == "const" and _isolation_path_ok(side, u):
            return "isolate"
    return None


def _lin_num(e: Expr, u: str, values: Mapping[str, float]) -> tuple[float, float] | None:
    """Numeric affine decomposition e = a*u + b; None when not affine in u."""
    if count_ref(e, u) == 0:
        return 0.0, eval_point(e, values)
    if isinstance(e, Ref):
        return 1.0, 0.0
    if isinstance(e, Neg):
        d = _lin_num(e.arg, u, values)
        return None if d is None else (-d[0], -d[1])
    if isinstance(e, Bin):
        dl = _lin_num(e.left, u, values)
        dr = _lin_num(e.right, u, values)
        if dl is None or dr is None:
            return None
        la, lb = dl
        ra, rb = dr
        if e.op == "+":
            return la + ra, lb + rb
        if e.op == "-":
            return la - ra, lb - rb
        if e.op == "*":
            if la != 0.0 and ra != 0.0:
                return None
            if la == 0.0:
                return lb * ra, lb * rb
            return rb * la, rb * lb
        if e.op == "/":
            if ra != 0.0:
                return None
            if rb == 0.0:
                return None
            return la / rb, lb / rb
        if e.op == "**":
            if e.right.value == 1:
                return dl
            return None
    return None


class _Contradiction(Exception):
    pass


def _solve_isolation(side: Expr, target: float, u: str, box: Box | None, values: Mapping[str, float]) -> float | None:
    node = side
    while True:
        if isinstance(node, Ref):
            return target
        if isinstance(node, Neg):
            target = -target
            node = node.arg
            continue
        if isinstance(node, Bin):
            on_left = count_ref(node.left, u) > 0
            inner = node.left if on_left else node.right
            outer = node.right if on_left else node.left
            if node.op == "+":
                target = target - eval_point(outer, values)
            elif node.op == "-":
                if on_left:
                    target = target + eval_point(outer, values)
                else:
                    target = eval_point(outer, values) - target
            elif node.op == "*":
                ov = eval_point(outer, values)
                if ov == 0.0:
                    return None
                target = target / ov
            elif node.op == "/":
                if on_left:
                    target = target * eval_point(outer, values)
                else:
                    if target == 0.0:
                        return None
                    target = eval_point(outer, values) / target
            elif node.op == "**":
                n = node.right.value  # exponent is always a constant on the right
                if float(n).is_integer():
                    ni = int(n)
                    if ni < 0:
                        if target == 0.0:
                            raise _Contradiction
                        target = 1.0 / target
                        ni = -ni
                    if ni % 2 == 1:
                        target = math.copysign(abs(target) ** (1.0 / ni), target)
                    else:
                        if target < 0.0:
                            raise _Contradiction
                        root = target ** (1.0 / ni)
                        target = _pick_even_root_sign(inner, root, box, values)
                else:
                    if target < 0.0:
                        raise _Contradiction
                    target = target ** (1.0 / n)
            else:  # pragma: no cover
                return None
            node = inner
            continue
        return None


def _pick_even_root_sign(inner: Expr, root: float, box: Box | None, values: Mapping[str, float]) -> float:
    if box is None:
        return root
    doms = {}
    for r in _ref_names(inner):
        doms[r] = Interval.point(values[r]) if r in values else box[r]
    iv = eval_interval(inner, doms)
    if iv.lo >= 0.0:
        return root
    if iv.hi <= 0.0:
        return -root
    return root if iv.contains(root) else -root


def _ref_names(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Ref):
            out.add(n.name)
        elif isinstance(n, Neg):
            stack.append(n.arg)
        elif isinstance(n, Bin):
            stack.append(n.left)
            stack.append(n.right)
        elif isinstance(n, Call):
            stack.extend(n.args)
    return out


def deduce(
    a: Assignment,
    equalities: Sequence[Constraint],
    box: Box | None = None,
    stats: SearchStats | None = None,
) -> Assignment:
    """Fixpoint deduction: pin any unknown an equality determines exactly.

    Each pass solves equalities with exactly one unassigned unknown that is
    affine in it or reachable by inverting the operator chain (single
    occurrence).  Vacuous 0 = 0 instances are skipped; verification of the
    solved equalities is left to early_check (they pass by construction).
    Raises DomainViolation or DeadBranch when a deduction lands outside its
    interval or contradicts the equation.
    """
    solved: set[str] = set()
    progress = True
    while progress:
        progress = False
        for c in equalities:
            if c.cid in solved or c.rel != "=":
                continue
            missing = [n for n in c.names() if n not in a.values]
            if len(missing) != 1:
                continue
            u = missing[0]
            method = can_solve_for(c, u)
            if method is None:
                continue
            value = _deduce_value(c, u, a.values, box, method, stats)
            if value == "vacuous":
                solved.add(c.cid)
                continue
            if value is None:
                continue
            if not math.isfinite(value):
                if stats is not None:
                    stats.count_check(c.cid, ok=False)
                raise DeadBranch(c.cid)
            a.insert(u, value, box, "deduced", stats)
            solved.add(c.cid)
            progress = True
    return a


def _deduce_value(
    c: Constraint,
    u: str,
    values: Mapping[str, float],
    box: Box | None,
    method: str,
    stats: SearchStats | None = None,
) -> float | str | None:
    if method == "linear":
        dl = _lin_num(c.lhs, u, values)
        dr = _lin_num(c.rhs, u, values)
        if dl is None or dr is None:
            return None
        a = dl[0] - dr[0]
        b = dr[1] - dl[1]
        if a == 0.0:
            scale = max(term_scale(c.lhs, {**values, u: 0.0}), term_scale(c.rhs, {**values, u: 0.0}))
            if abs(b) <= ATOL + RTOL * scale:
                return "vacuous"
            if stats is not None:
                stats.count_check(c.cid, ok=False)
            raise DeadBranch(c.cid)
        return b / a
    on_lhs = count_ref(c.lhs, u) > 0
    side = c.lhs if on_lhs else c.rhs
    other = c.rhs if on_lhs else c.lhs
    try:
        return _solve_isolation(side, eval_point(other, values), u, box, values)
    except _Contradiction:
        if stats is not None:
            stats.count_check(c.cid, ok=False)
        raise DeadBranch(c.cid)


def _affine_deg(e: Expr, free: frozenset[str] | set[str]) -> int:
    """Degree of ``e`` in the unknowns ``free``: 0, 1, or 2 for anything
    beyond affine."""
    if isinstance(e, Const):
        return 0
    if isinstance(e, Ref):
        return 1 if e.name in free else 0
    if isinstance(e, Neg):
        return _affine_deg(e.arg, free)
    if isinstance(e, Bin):
        dl, dr = _affine_deg(e.left, free), _affine_deg(e.right, free)
        if e.op in ("+", "-"):
            return max(dl, dr)
        if e.op == "*":
            return min(dl + dr, 2)
        if e.op == "/":
            return dl if dr == 0 else 2
        return 0 if dl == 0 else 2  # ** with constant exponent
    if isinstance(e, Call):
        if e.fn == "init":
            return _affine_deg(e.args[0], free)
        return 0 if all(_affine_deg(a, free) == 0 for a in e.args) else 2
    return 2


def solve_affine_cluster(
    eqs: Sequence[Constraint],
    unknowns: Sequence[str],
    values: Mapping[str, float],
    scale: Mapping[str, float] | None = None,
) -> dict[str, float] | None:
    """Solve equalities jointly affine in ``unknowns``, all else assigned.

    Tearing cannot handle a square affine core: interval propagation pins
    each unknown to a zero-width sliver, and a value re-sampled inside the
    sliver misses the root by far more than the other equation tolerates.
    Solving the little linear system gives the root to machine precision.
    Returns None when the cluster is underdetermined or the matrix is not
    finite; least squares covers the overdetermined case and the numeric
    residual check afterwards has the final word.
    """
    if len(eqs) < len(unknowns) or not unknowns:
        return None
    base = dict(values)
    for n in unknowns:
        base[n] = 0.0
    s = [max(abs(scale.get(n, 1.0)), 1e-300) if scale else 1.0 for n in unknowns]
    m = len(eqs)
    k = len(unknowns)
    A = np.zeros((m, k))
    b = np.zeros(m)
    try:
        for r, c in enumerate(eqs):
            g0 = eval_point(c.lhs, base) - eval_point(c.rhs, base)
            b[r] = -g0
            for i, n in enumerate(unknowns):
                base[n] = s[i]
                gi = eval_point(c.lhs, base) - eval_point(c.rhs, base)
                base[n] = 0.0
                A[r, i] = (gi - g0) / s[i]
    except (ValueError, OverflowError, ZeroDivisionError):
        return None
    if not (np.isfinite(A).all() and np.isfinite(b).all()):
        return None
    try:
        x = np.linalg.solve(A, b) if m == k else np.linalg.lstsq(A, b, rcond=None)[0]
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(A, b, rcond=None)[0]
    if not np.isfinite(x).all():
        return None
    return {n: float(v) for n, v in zip(unknowns, x)}


# ------------------------------------------------------------- decomposition


def dependency_graph(cs: Sequence[Constraint], assigned: Iterable[str]) -> nx.Graph:
    """Bipartite graph linking constraints to their unassigned unknowns.

    Constraint nodes are ("c", id), unknown nodes ("u", name).  A fully
    assigned constraint keeps its node but no edges, flagged checkable:
    the search evaluates it immediately instead of solving for anything.
    """
    done = set(assigned)
    g = nx.Graph()
    for c in cs:
        free = [n for n in c.names() if n not in done]
        g.add_node(("c", c.cid), kind="constraint", rel=c.rel, checkable=not free, obj=c)
        for n in free:
            g.add_node(("u", n), kind="unknown")
            g.add_edge(("c", c.cid), ("u", n))
    return g


def _components(g: nx.Graph) -> list[tuple[list[str], list[str]]]:
    """Connected components as (constraint ids, unknown names), skipping
    isolated checkable constraints."""
    out = []
    for nodes in nx.connected_components(g):
        cids = sorted(n[1] for n in nodes if n[0] == "c")
        names = sorted(n[1] for n in nodes if n[0] == "u")
        if names:
            out.append((cids, names))
    return out


class _EdgeConstraint:
    """Structural stand-in when a graph node carries no constraint object:
    every unknown neighbor counts as solvable-for."""

    __slots__ = ("cid", "rel", "_names")

    def __init__(self, cid: str, rel: str, names: tuple[str, ...]):
        self.cid = cid
        self.rel = rel
        self._names = frozenset(names)

    def names(self) -> frozenset[str]:
        return self._names


def _graph_constraints(graph: nx.Graph) -> list:
    out = []
    for node, data in graph.nodes(data=True):
        if node[0] != "c":
            continue
        obj = data.get("obj")
        if obj is not None:
            out.append(obj)
            continue
        names = tuple(sorted(n[1] for n in graph.neighbors(node)))
        out.append(_EdgeConstraint(node[1], data.get("rel", "="), names))
    return out


def _closure(cs, assigned: set[str]) -> tuple[set[str], set[str], int]:
    """Structural deduction closure.

    Returns (reachable assigned set, used equality ids, count of equalities
    that end up fully assigned without having produced a deduction).  The
    last number counts the measure-zero residual checks a sampler would be
    left with; tear selection tries to keep it from growing.
    """
    a = set(assigned)
    used: set[str] = set()
    eqs = [c for c in cs if c.rel == "="]
    progress = True
    while progress:
        progress = False
        for c in eqs:
            if c.cid in used:
                continue
            missing = [n for n in c.names() if n not in a]
            if len(missing) != 1:
                continue
            u = missing[0]
            solvable = True if isinstance(c, _EdgeConstraint) else can_solve_for(c, u) is not None
            if solvable:
                a.add(u)
                used.add(c.cid)
                progress = True
    overdetermined = 0
    for c in eqs:
        names = c.names()
        if c.cid not in used and names and all(n in a for n in names) and any(n not in assigned for n in names):
            overdetermined += 1
    return a, used, overdetermined


def _articulation_scores(g: nx.Graph) -> dict[tuple[str, str], int]:
    """Components a node's removal adds, for every node, in one pass.

    Deleting a node splits its component into as many pieces as there are
    biconnected blocks through it, so the score is that count minus one:
    zero everywhere except articulation points.
    """
    score = dict.fromkeys(g, 0)
    for block in nx.biconnected_components(g):
        for n in block:
            score[n] += 1
    return {n: max(0, s - 1) for n, s in score.items()}


def select_sampling_set(graph: nx.Graph, union: BoxUnion) -> list[str]:
    """Greedy tearing order: which unknowns to sample, and in what order.

    Ranking per pick: ascending relative width (narrow first), then
    descending articulation score (disconnectors first), then declaration
    order.  Candidates whose structural closure would strand an equality
    fully assigned but unused (a measure-zero check) are deferred while an
    alternative exists.  Picks continue until the closure covers every
    unknown in the graph.
    """
    hull = union.hull()
    relw = {n: hull[n].relative_width for n in hull.names}
    decl = {n: i for i, n in enumerate(hull.names)}
    unknowns = sorted(
        (n[1] for n in graph.nodes if n[0] == "u"),
        key=lambda n: decl.get(n, len(decl)),
    )
    cs = _graph_constraints(graph)
    mentioned = set().union(*(c.names() for c in cs)) if cs else set()
    pre = mentioned - set(unknowns)  # assigned before the graph was built
    art = _articulation_scores(graph)
    chosen: list[str] = []
    while True:
        reach, _, base_over = _closure(cs, pre | set(chosen))
        free = [n for n in unknowns if n not in reach]
        if not free:
            return chosen
        ranked = sorted(
            free,
            key=lambda n: (
                relw.get(n, math.inf),
                -art.get(("u", n), 0),
                decl.get(n, len(decl)),
            ),
        )
        pick = None
        for cand in ranked:
            _, _, over = _closure(cs, pre | set(chosen) | {cand})
            if over <= base_over:
                pick = cand
                break
        if pick is None:
            pick = ranked[0]
        chosen.append(pick)


# ------------------------------------------------------------------ sampling


def _draw(rng: np.random.Generator, iv: Interval, scale: str) -> float:
    if iv.is_degenerate:
        return iv.lo
    if scale == "log" and iv.lo > 0.0:
        return float(10.0 ** rng.uniform(math.log10(iv.lo), math.log10(iv.hi)))
    return float(rng.uniform(iv.lo, iv.hi))


def _box_weight(box: Box, scales: Mapping[str, str]) -> float:
    w = 1.0
    for name, iv in zip(box.names, box.intervals):
        if scales.get(name) == "log" and iv.lo > 0.0:
            w *= math.log10(iv.hi / iv.lo) if iv.hi > iv.lo else 0.0
        else:
            w *= iv.width
    return w


def _pick_box(rng: np.random.Generator, union: BoxUnion, scales: Mapping[str, str]) -> Box:
    boxes = union.boxes
    if len(boxes) == 1:
        return boxes[0]
    weights = np.array([_box_weight(b, scales) for b in boxes], dtype=float)
    total = weights.sum()
    if not math.isfinite(total) or total <= 0.0:
        idx = int(rng.integers(0, len(boxes)))
    else:
        idx = int(rng.choice(len(boxes), p=weights / total))
    return boxes[idx]


def _component_key(names: Sequence[str]) -> str:
    names = sorted(names)
    if len(names) <= 4:
        return ",".join(names)
    return f"{names[0]}+{len(names) - 1}more"


class _Episode:
    """One end-to-end attempt at a full assignment."""

    def __init__(
        self,
        model: Model,
        cs: Sequence[Constraint],
        box: Box,
        rng: np.random.Generator,
        stats: SearchStats,
        tol: float,
        tear_retries: int,
        max_draws: int,
        prop: IncrementalPropagator | None = None,
    ):
        self.model = model
        self.cs = list(cs)
        self.eqs = [c for c in self.cs if c.rel == "="]
        self.rng = rng
        self.stats = stats
        self.tol = tol
        self.tear_retries = tear_retries
        self.max_draws = max_draws
        self.draws = 0
        self.box = box
        self.assign = Assignment()
        self.checked: set[str] = set()
        self.decl = {n: i for i, n in enumerate(box.names)}
        self.scales = {u.name: u.scale for u in model.unknowns}
        self.prop = prop if prop is not None else IncrementalPropagator(self.cs, box.names, tol)

    # -- state snapshot for tear retries
    def _snapshot(self):
        return self.box, self.assign.copy(), set(self.checked)

    def _restore(self, snap) -> None:
        self.box, self.assign, self.checked = snap

    def _live(self, i: int) -> bool:
        # interval work only pays off while a referenced unknown is still
        # open; fully assigned constraints get a numeric recheck instead
        values = self.assign.values
        return any(n not in values for n in self.prop.cnames[i])

    def _pin(self, name: str, value: float) -> None:
        self._pin_all(((name, value),))

    def _pin_all(self, pairs: Iterable[tuple[str, float]]) -> None:
        ivs = list(self.box.intervals)
        seed: set[int] = set()
        for name, value in pairs:
            d = self.decl[name]
            ivs[d] = Interval.point(value)
            seed.update(self.prop.touching(d))
        # pruning only: early_check and _validate recheck numerically, so the
        # global-fixpoint closing sweep is not worth a full pass per pin, and
        # a shrink-toward-empty spiral gets cut off instead of churning (slow
        # squeezes cost far more wall time than the wider draws they prevent)
        culprit = self.prop.narrow(ivs, seed=seed, live=self._live, max_steps=max(32, 2 * len(self.cs)))
        if culprit is not None:
            raise DeadBranch(culprit)
        self.box = Box(self.box.names, tuple(ivs))

    def _deduce_and_check(self, cids: Sequence[str] | None = None) -> None:
        eqs = self.eqs if cids is None else [c for c in self.eqs if c.cid in cids]
        before = set(self.assign.values)
        while True:
            n0 = len(self.assign.values)
            deduce(self.assign, [c for c in eqs if c.cid not in self.checked], self.box, self.stats)
            self._affine_clusters(eqs)
            if len(self.assign.values) == n0:
                break
        fresh = sorted(set(self.assign.values) - before, key=self.decl.__getitem__)
        if fresh:
            self._pin_all((n, self.assign.values[n]) for n in fresh)
        unchecked = [c for c in self.cs if c.cid not in self.checked]
        outcome = early_check(self.assign, unchecked, self.stats)
        self.checked.update(outcome.checked)
        if not outcome.passed:
            raise DeadBranch(outcome.failed[0])

    def _affine_clusters(self, eqs: Sequence[Constraint]) -> None:
        """Assign square or overdetermined affine clusters by direct solve."""
        values = self.assign.values
        cand: list[tuple[Constraint, frozenset[str]]] = []
        for c in eqs:
            if c.cid in self.checked:
                continue
            missing = frozenset(n for n in c.names() if n not in values)
            if not missing:
                continue
            if _affine_deg(c.lhs, missing) <= 1 and _affine_deg(c.rhs, missing) <= 1:
                cand.append((c, missing))
        if not cand:
            return
        g = nx.Graph()
        for i, (_, miss) in enumerate(cand):
            for n in miss:
                g.add_edge(("c", i), ("u", n))
        for comp in nx.connected_components(g):
            idxs = sorted(i for t, i in comp if t == "c")
            us = sorted(n for t, n in comp if t == "u")
            if len(idxs) < len(us) or len(us) < 2:
                continue  # underdetermined: leave the freedom to tearing
            mids = {n: self.box[n].midpoint for n in us}
            got = solve_affine_cluster([cand[i][0] for i in idxs], us, values, mids)
            if got is None:
                continue
            for n, v in got.items():
                self.assign.insert(n, v, self.box, "deduced", self.stats)

    def solve(self, cs_scope: Sequence[Constraint], unknowns: Sequence[str]) -> None:
        """Recursively instantiate every unknown in scope."""
        while True:
            self._deduce_and_check([c.cid for c in cs_scope])
            free = [n for n in unknowns if n not in self.assign.values]
            if not free:
                return
            live = [c for c in cs_scope if any(n not in self.assign.values for n in c.names())]
            comps = _components(dependency_graph(live, self.assign.values))
            if len(comps) > 1:
                by_id = {c.cid: c for c in live}
                comps.sort(
                    key=lambda cu: (
                        -(len(cu[0]) - len(cu[1])),
                        -max((self.stats.violation_rate(i) for i in cu[0]), default=0.0),
                        cu[1][0],
                    )
                )
                for cids, names in comps:
                    self.solve([by_id[i] for i in cids], names)
                return
            cids, names = comps[0] if comps else ([], free)
            scope = [c for c in live if c.cid in set(cids)] if comps else []
            self._tear(scope or live, names)

    def _tear(self, cs_scope: Sequence[Constraint], names: Sequence[str]) -> None:
        key = _component_key(names)
        u = self._pick_tear(cs_scope, names)
        last = "domain"
        for _ in range(self.tear_retries):
            if self.draws >= self.max_draws:
                raise _EpisodeExhausted
            snap = self._snapshot()
            value = _draw(self.rng, self.box[u], self.scales.get(u, "linear"))
            self.draws += 1
            self.stats.count_draw(key)
            try:
                self.assign.insert(u, value, self.box, "sampled", self.stats)
                self._pin(u, value)
                self.solve(cs_scope, names)
                self.stats.count_success(key)
                return
            except (DeadBranch, DomainViolation) as exc:
                last = exc.cid if isinstance(exc, DeadBranch) else f"domain:{exc.name}"
                self._restore(snap)
                # a pinned interval always yields the same draw: retrying is futile
                if self.box[u].relative_width <= 1e-9:
                    break
        raise DeadBranch(last)

    def _pick_tear(self, cs_scope: Sequence[Constraint], names: Sequence[str]) -> str:
        reach, _, base_over = _closure(cs_scope, set(self.assign.values))
        free = [n for n in names if n not in reach] or list(names)
        art = _articulation_scores(dependency_graph(cs_scope, self.assign.values))
        ranked = sorted(
            free,
            key=lambda n: (
                self.box[n].relative_width,
                -art.get(("u", n), 0),
                self.decl.get(n, len(self.decl)),
            ),
        )
        for cand in ranked:
            _, _, over = _closure(cs_scope, set(self.assign.values) | {cand})
            if over <= base_over:
                return cand
        return ranked[0]


def _validate(model: Model, cs: Sequence[Constraint], assign: Assignment, rtol: float, atol: float) -> Solution | None:
    values = assign.values
    residuals: dict[str, float] = {}
    for c in cs:
        if c.is_redundant:
            continue
        if not holds(c, values, rtol, atol):
            return None
        residuals[c.cid] = residual(c, values)
    if model.derive_steady_state:
        # odes reference raw state names, so bind those to the ^eq values
        ss = dict(values)
        ss.update(model.steady_state_values(values))
        for state, rhs in model.odes:
            v = eval_point(rhs, ss)
            if abs(v) > atol + rtol * term_scale(rhs, ss):
                return None
    return Solution(assign, residuals)


def _run_attempts(
    model: Model,
    union: BoxUnion,
    cs: tuple[Constraint, ...],
    attempts: Sequence[int],
    target: int,
    seed: int,
    tol: float,
    tear_retries: int,
    rtol: float,
    atol: float,
) -> tuple[list[tuple[int, Solution]], SearchStats]:
    stats = SearchStats()
    scales = {u.name: u.scale for u in model.unknowns}
    # clean episodes use about one draw per torn unknown; a doomed one gets
    # a few retries per level before the attempt is abandoned
    max_draws = 8 * max(1, len(union.names))
    prop = IncrementalPropagator(cs, union.names, tol)
    found: list[tuple[int, Solution]] = []
    t0 = time.perf_counter()
    for idx in attempts:
        if len(found) >= target:
            break
        rng = np.random.default_rng([seed, idx])
        box = _pick_box(rng, union, scales)
        stats.episodes += 1
        ep = _Episode(model, cs, box, rng, stats, tol, tear_retries, max_draws, prop)
        try:
            ep.solve(ep.cs, list(box.names))
        except (DeadBranch, DomainViolation, _EpisodeExhausted):
            continue
        sol = _validate(model, cs, ep.assign, rtol, atol)
        if sol is not None:
            stats.solutions_found += 1
            found.append((idx, sol))
    stats.wall_time = time.perf_counter() - t0
    return found, stats


_POOL_CTX: dict = {}


def _pool_init(model: Model, union: BoxUnion, cs: tuple[Constraint, ...]) -> None:
    _POOL_CTX["args"] = (model, union, cs)


def _pool_attempts(attempts, target, seed, tol, tear_retries, rtol, atol):
    model, union, cs = _POOL_CTX["args"]
    return _run_attempts(model, union, cs, attempts, target, seed, tol, tear_retries, rtol, atol)


def sample_steady_states(
    m: Model,
    u: BoxUnion,
    target: int,
    budget: int,
    seed: int,
    jobs: int = 1,
    tol: float = DEFAULT_TOL,
    tear_retries: int = DEFAULT_TEAR_RETRIES,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> tuple[list[Solution], SearchStats]:
    """Draw up to ``target`` validated steady states within ``budget`` attempts.

    Attempt i uses its own RNG stream derived from (seed, i), so a run is
    reproducible and its solution set does not depend on ``jobs``.  Returns
    fewer than ``target`` solutions when the budget runs out; the stats
    object then feeds difficulty_ranking.
    """
    if u.is_empty or target < 1:
        return [], SearchStats()
    cs = tuple(list(m.constraints) + add_redundant(m.constraints, domains=m.domain_box()))
    if jobs <= 1:
        found, stats = _run_attempts(m, u, cs, range(budget), target, seed, tol, tear_retries, rtol, atol)
        return [s for _, s in found[:target]], stats
    stats = SearchStats()
    found: list[tuple[int, Solution]] = []
    # small waves keep the post-target overshoot bounded; the model ships to
    # each worker once through the pool initializer, not with every task
    wave = max(jobs * 4, 16)
    t0 = time.perf_counter()
    with ProcessPoolExecutor(max_workers=jobs, initializer=_pool_init, initargs=(m, u, cs)) as pool:
        start = 0
        while start < budget and len(found) < target:
            hi = min(budget, start + wave)
            chunks = np.array_split(np.arange(start, hi), jobs)
            futures = [
                pool.submit(_pool_attempts, [int(i) for i in ch], target, seed, tol, tear_retries, rtol, atol)
                for ch in chunks
                if len(ch)
            ]
            for f in futures:
                part, pstats = f.result()
                found.extend(part)
                stats.merge(pstats)
            start = hi
    found.sort(key=lambda t: t[0])
    stats.wall_time = time.perf_counter() - t0
    return [s for _, s in found[:target]], stats
