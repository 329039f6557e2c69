"""Constraint propagation: forward-backward contraction and paving.

``revise`` is the single-constraint contractor: a forward interval sweep
over the expression trees followed by a backward projection pass that
narrows each referenced unknown.  ``propagate_fixpoint`` chains revisions
with a work queue until no dimension moves by more than a relative
tolerance, and ``pave`` wraps the fixpoint in branch-and-contract
subdivision, returning a union of boxes that covers every solution of the
constraint set inside the starting box.

Soundness is the only hard guarantee: no contraction ever discards a point
satisfying all constraints, and an empty result is a proof that none
existed.  Strict and non-strict inequalities contract identically (the
closure of the feasible set); strictness is re-checked at sample time.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

from .expr import Bin, Call, Const, Expr, Neg, Ref, sig_plus_interval
from .intervals import Box, BoxUnion, Interval, iv_div, iv_mul, iv_pow, apply as iv_apply
from .modelfile import Constraint

DEFAULT_TOL = 1e-3
DEFAULT_MAX_BOXES = 4096

_INF = math.inf


class _EmptyBox(Exception):
    """Internal: a projection proved the constraint unsatisfiable on the box."""


# ------------------------------------------------------------------- forward


def _forward(e: Expr, doms: dict[str, Interval], memo: dict[int, Interval]) -> Interval:
    key = id(e)
    got = memo.get(key)
    if got is not None:
        return got
    if isinstance(e, Const):
        out = Interval.point(e.value)
    elif isinstance(e, Ref):
        out = doms[e.name]
    elif isinstance(e, Neg):
        out = iv_apply("neg", _forward(e.arg, doms, memo))
    elif isinstance(e, Bin):
        a = _forward(e.left, doms, memo)
        if e.op == "**":
            out = iv_pow(a, e.right.value)  # parser guarantees Const exponent
            memo[id(e.right)] = Interval.point(e.right.value)
        else:
            b = _forward(e.right, doms, memo)
            out = iv_apply({"+": "add", "-": "sub", "*": "mul", "/": "div"}[e.op], a, b)
    elif isinstance(e, Call):
        args = [_forward(a, doms, memo) for a in e.args]
        if e.fn == "abs":
            out = iv_apply("abs", args[0])
        elif e.fn in ("min", "max"):
            out = args[0]
            for a in args[1:]:
                out = iv_apply(e.fn, out, a)
        elif e.fn == "sig+":
            out = sig_plus_interval(args[0], args[1], e.args[2].value)
        else:
            out = args[0]  # init(...) behaves as identity outside traces
    else:  # pragma: no cover - exhaustive
        raise TypeError(f"cannot evaluate {e!r}")
    memo[key] = out
    return out


# ------------------------------------------------------------------ backward


def _signed_root(x: float, n: int) -> float:
    if x >= 0.0:
        return x ** (1.0 / n)
    return -((-x) ** (1.0 / n))


def _even_root_iv(t: Interval, n: float) -> Interval:
    hi = t.hi ** (1.0 / n) if math.isfinite(t.hi) else _INF
    lo = t.lo ** (1.0 / n) if t.lo > 0.0 else 0.0
    return Interval(lo, hi)


def _ratio_root(s: float, n: float) -> float:
    # (s / (1 - s)) ** (1/n), clamped at the saturating ends
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return _INF
    return (s / (1.0 - s)) ** (1.0 / n)


def _inv_ratio_root(s: float, n: float) -> float:
    if s <= 0.0:
        return _INF
    if s >= 1.0:
        return 0.0
    return ((1.0 - s) / s) ** (1.0 / n)


def _prod_guard(x: float, y: float) -> float:
    if x == 0.0 or y == 0.0:
        return 0.0
    return x * y


def _project(e: Expr, target: Interval, doms: dict[str, Interval], memo: dict[int, Interval]) -> None:
    cur = memo[id(e)]
    t = target.intersect(cur)
    if t.is_empty:
        raise _EmptyBox
    if isinstance(e, Const):
        return
    if isinstance(e, Ref):
        nd = doms[e.name].intersect(t)
        if nd.is_empty:
            raise _EmptyBox
        doms[e.name] = nd
        return
    if isinstance(e, Neg):
        _project(e.arg, iv_apply("neg", t), doms, memo)
        return
    if isinstance(e, Bin):
        if e.op == "+":
            a, b = memo[id(e.left)], memo[id(e.right)]
            _project(e.left, iv_apply("sub", t, b), doms, memo)
            _project(e.right, iv_apply("sub", t, a), doms, memo)
            return
        if e.op == "-":
            a, b = memo[id(e.left)], memo[id(e.right)]
            _project(e.left, iv_apply("add", t, b), doms, memo)
            _project(e.right, iv_apply("sub", a, t), doms, memo)
            return
        if e.op == "*":
            a, b = memo[id(e.left)], memo[id(e.right)]
            for child, other in ((e.left, b), (e.right, a)):
                if other.lo == 0.0 and other.hi == 0.0:
                    if not t.contains(0.0):
                        raise _EmptyBox
                    continue  # factor-by-zero: no information on the child
                _project(child, iv_div(t, other), doms, memo)
            return
        if e.op == "/":
            a, b = memo[id(e.left)], memo[id(e.right)]
            _project(e.left, iv_mul(t, b), doms, memo)
            if not (t.lo == 0.0 and t.hi == 0.0):
                _project(e.right, iv_div(a, t), doms, memo)
            return
        if e.op == "**":
            n = e.right.value
            base = memo[id(e.left)]
            if float(n).is_integer():
                ni = int(n)
                if ni == 0:
                    if not t.contains(1.0):
                        raise _EmptyBox
                    return
                if ni < 0:
                    t = iv_div(Interval(1.0, 1.0), t)
                    ni = -ni
                if ni % 2 == 1:
                    _project(e.left, Interval(_signed_root(t.lo, ni), _signed_root(t.hi, ni)).inflate(), doms, memo)
                    return
                tp = t.intersect(Interval(0.0, _INF))
                if tp.is_empty:
                    raise _EmptyBox
                r = _even_root_iv(tp, ni)
                if base.lo >= 0.0:
                    proj = r
                elif base.hi <= 0.0:
                    proj = Interval(-r.hi, -r.lo)
                else:
                    proj = Interval(-r.hi, r.hi)
                _project(e.left, proj.inflate(), doms, memo)
                return
            # fractional: nonnegative base (forward pass enforced it)
            tp = t.intersect(Interval(0.0, _INF))
            if tp.is_empty:
                raise _EmptyBox
            _project(e.left, iv_pow(tp, 1.0 / n), doms, memo)
            return
    if isinstance(e, Call):
        if e.fn == "abs":
            tp = t.intersect(Interval(0.0, _INF))
            if tp.is_empty:
                raise _EmptyBox
            base = memo[id(e.args[0])]
            if base.lo >= 0.0:
                proj = tp
            elif base.hi <= 0.0:
                proj = Interval(-tp.hi, -tp.lo)
            else:
                proj = Interval(-tp.hi, tp.hi)
            _project(e.args[0], proj, doms, memo)
            return
        if e.fn in ("min", "max"):
            fwd = [memo[id(a)] for a in e.args]
            for i, arg in enumerate(e.args):
                if e.fn == "min":
                    hi = t.hi if all(f.lo > t.hi for j, f in enumerate(fwd) if j != i) else _INF
                    _project(arg, Interval(t.lo, hi), doms, memo)
                else:
                    lo = t.lo if all(f.hi < t.lo for j, f in enumerate(fwd) if j != i) else -_INF
                    _project(arg, Interval(lo, t.hi), doms, memo)
            return
        if e.fn == "sig+":
            n = e.args[2].value
            ts = t.intersect(Interval(0.0, 1.0))
            if ts.is_empty:
                raise _EmptyBox
            theta = memo[id(e.args[1])]
            x = memo[id(e.args[0])]
            if theta.lo >= 0.0:
                lo = _prod_guard(theta.lo, _ratio_root(ts.lo, n)) if ts.lo > 0.0 else -_INF
                hi = _prod_guard(theta.hi, _ratio_root(ts.hi, n))
                _project(e.args[0], Interval(lo, hi).inflate(), doms, memo)
                if ts.lo > 0.0 and x.lo >= 0.0:
                    t_lo = _prod_guard(x.lo, _inv_ratio_root(ts.hi, n))
                    t_hi = _prod_guard(x.hi, _inv_ratio_root(ts.lo, n))
                    _project(e.args[1], Interval(t_lo, t_hi).inflate(), doms, memo)
            return
        if e.fn == "init":
            _project(e.args[0], t, doms, memo)
            return
    raise TypeError(f"cannot project through {e!r}")  # pragma: no cover


# -------------------------------------------------------------------- revise


def _empty_like(box: Box) -> Box:
    return Box(box.names, tuple(Interval.empty() for _ in box.names))


def constraint_names(c: Constraint, cache: dict[int, tuple[str, ...]] | None = None) -> tuple[str, ...]:
    if cache is not None:
        got = cache.get(id(c))
        if got is not None:
            return got
    names = tuple(sorted(c.names()))
    if cache is not None:
        cache[id(c)] = names
    return names


def _revise_doms(c: Constraint, doms: dict[str, Interval]) -> None:
    """Contract ``doms`` in place with respect to ``c``; raises _EmptyBox."""
    memo: dict[int, Interval] = {}
    lhs = _forward(c.lhs, doms, memo)
    rhs = _forward(c.rhs, doms, memo)
    if lhs.is_empty or rhs.is_empty:
        raise _EmptyBox
    if c.rel == "=":
        t = lhs.intersect(rhs)
        if t.is_empty:
            raise _EmptyBox
        _project(c.lhs, t, doms, memo)
        _project(c.rhs, t, doms, memo)
    elif c.rel in ("<", "<="):
        tl = lhs.intersect(Interval(-_INF, rhs.hi))
        tr = rhs.intersect(Interval(lhs.lo, _INF))
        if tl.is_empty or tr.is_empty:
            raise _EmptyBox
        _project(c.lhs, tl, doms, memo)
        _project(c.rhs, tr, doms, memo)
    else:  # > or >=
        tl = lhs.intersect(Interval(rhs.lo, _INF))
        tr = rhs.intersect(Interval(-_INF, lhs.hi))
        if tl.is_empty or tr.is_empty:
            raise _EmptyBox
        _project(c.lhs, tl, doms, memo)
        _project(c.rhs, tr, doms, memo)


def revise(c: Constraint, box: Box) -> Box:
    """One forward-backward contraction of ``box`` with respect to ``c``.

    Returns the contracted box; an empty box proves ``c`` has no solution
    inside ``box``.  Unknowns not referenced by ``c`` are untouched.
    """
    if box.is_empty:
        return box
    names = c.names()
    doms = {n: box[n] for n in names}
    for iv in doms.values():
        if iv.is_empty:
            return _empty_like(box)
    try:
        _revise_doms(c, doms)
    except _EmptyBox:
        return _empty_like(box)
    out = box
    for n in names:
        if doms[n] is not box[n]:
            out = out.with_interval(n, doms[n])
    return out


# ------------------------------------------------------------------- fixpoint


def _rel_shrink(old: Interval, new: Interval) -> float:
    if old.is_empty:
        return 0.0
    if new.is_empty:
        return _INF
    ow, nw = old.width, new.width
    if math.isinf(ow):
        return _INF if math.isfinite(nw) else 0.0
    if ow == 0.0:
        return 0.0
    return (ow - nw) / ow


class IncrementalPropagator:
    """Reusable work-queue contractor over a fixed constraint list and frame.

    The per-constraint index structures are built once; ``narrow`` then
    prunes an interval list in place, starting from a seeded set of
    constraint indices and following shrinkage through shared unknowns.
    One instance serves any number of boxes over the same name frame, so a
    caller that contracts repeatedly (a sampler pinning values one at a
    time) skips the setup cost on every call.
    """

    def __init__(self, cs: Sequence[Constraint], names: Sequence[str], tol: float = DEFAULT_TOL):
        self.cs = list(cs)
        self.tol = tol
        idx = {n: k for k, n in enumerate(names)}
        # sorted by dim so queue growth is independent of set iteration order
        pairs = [sorted((idx[n], n) for n in c.names()) for c in self.cs]
        self.cnames = [tuple(n for _, n in ps) for ps in pairs]
        self.cdims = [tuple(d for d, _ in ps) for ps in pairs]
        self.by_dim: dict[int, list[int]] = {}
        for i, dims in enumerate(self.cdims):
            for d in dims:
                self.by_dim.setdefault(d, []).append(i)

    def touching(self, dim: int) -> Sequence[int]:
        """Indices of constraints that reference the given dimension."""
        return self.by_dim.get(dim, ())

    def _run(self, i: int, ivs: list[Interval]) -> tuple[bool, list[int]]:
        """Revise ``ivs`` in place; returns (emptied, dims shrunk past tol)."""
        cnames, cdims = self.cnames[i], self.cdims[i]
        doms = {n: ivs[d] for n, d in zip(cnames, cdims)}
        for iv in doms.values():
            if iv.is_empty:
                return True, []
        try:
            _revise_doms(self.cs[i], doms)
        except _EmptyBox:
            return True, []
        changed = []
        for n, d in zip(cnames, cdims):
            new = doms[n]
            if new is not ivs[d]:
                if _rel_shrink(ivs[d], new) > self.tol:
                    changed.append(d)
                ivs[d] = new
        return False, changed

    def narrow(
        self,
        ivs: list[Interval],
        seed: Iterable[int] | None = None,
        live=None,
        closing_sweep: bool = False,
        max_steps: int | None = None,
    ) -> str | None:
        """Prune ``ivs`` in place; returns the culprit id if a dim emptied.

        ``seed`` restricts the initial queue to the given constraint
        indices (incremental re-propagation after a point assignment).
        ``live`` is an optional index predicate: constraints it rejects
        never enter the queue, for callers that recheck fully assigned
        constraints numerically and only want interval work on the rest.
        Without the closing sweep the result is sound but possibly wider
        than the global fixpoint; the same goes for ``max_steps``, which
        stops slow contraction spirals early.
        """
        cs = self.cs
        initial = range(len(cs)) if seed is None else sorted(set(seed))
        if live is not None:
            initial = [i for i in initial if live(i)]
        queue: deque[int] = deque(initial)
        inq = set(queue)
        steps = 0
        cap = max_steps if max_steps is not None else max(10_000, 200 * len(cs) * max(1, len(ivs)))
        while True:
            while queue:
                i = queue.popleft()
                inq.discard(i)
                empty, changed = self._run(i, ivs)
                if empty:
                    return cs[i].cid
                steps += 1
                if steps > cap:  # pathological slow convergence: stop soundly
                    return None
                for d in changed:
                    for j in self.by_dim.get(d, ()):
                        if j not in inq and (live is None or live(j)):
                            queue.append(j)
                            inq.add(j)
            if not closing_sweep:
                return None
            # closing sweep: postcondition demands one more pass moves nothing
            moved = False
            sweep = range(len(cs)) if live is None else [i for i in range(len(cs)) if live(i)]
            for i in sweep:
                empty, changed = self._run(i, ivs)
                if empty:
                    return cs[i].cid
                steps += 1
                for d in changed:
                    moved = True
                    for j in self.by_dim.get(d, ()):
                        if j not in inq and (live is None or live(j)):
                            queue.append(j)
                            inq.add(j)
            if not moved or steps > cap:
                return None


def propagate_fixpoint_ex(
    cs: Sequence[Constraint],
    box: Box,
    tol: float = DEFAULT_TOL,
    seed: Iterable[int] | None = None,
    closing_sweep: bool = True,
    max_steps: int | None = None,
) -> tuple[Box, str | None]:
    """Work-queue fixpoint; returns (box, culprit id or None).

    The culprit is the constraint whose revision emptied the box, when that
    happened.  ``seed`` restricts the initial queue to the given constraint
    indices; the closing sweep still guarantees the global fixpoint
    postcondition.  A caller that only wants cheap pruning (and rechecks
    numerically anyway) can drop the sweep; the box stays sound, just
    possibly wider.  The same goes for ``max_steps``: slow contraction
    spirals stop early with a sound but unconverged box.
    """
    if box.is_empty or not cs:
        return box, None
    prop = IncrementalPropagator(cs, box.names, tol)
    ivs = list(box.intervals)
    culprit = prop.narrow(ivs, seed=seed, closing_sweep=closing_sweep, max_steps=max_steps)
    if culprit is not None:
        return _empty_like(box), culprit
    return Box(box.names, tuple(ivs)), None


def propagate_fixpoint(cs: Sequence[Constraint], box: Box, tol: float = DEFAULT_TOL) -> Box:
    """Contract ``box`` against all of ``cs`` to a tol-relative fixpoint."""
    out, _ = propagate_fixpoint_ex(cs, box, tol)
    return out


# --------------------------------------------------------------------- paving


def _precision_targets(box: Box, precision: float) -> tuple[float, ...]:
    out = []
    for iv in box.intervals:
        w = iv.width
        out.append(precision * w if math.isfinite(w) else _INF)
    return tuple(out)


def _meets(box: Box, targets: tuple[float, ...]) -> bool:
    return all(iv.width <= t or iv.is_degenerate for iv, t in zip(box.intervals, targets))


def _pave_child(args: tuple[Sequence[Constraint], Box, float]) -> Box:
    cs, half, tol = args
    return propagate_fixpoint(cs, half, tol)


def pave(
    cs: Sequence[Constraint],
    box: Box,
    precision: float = 2.0,
    max_boxes: int = DEFAULT_MAX_BOXES,
    tol: float = DEFAULT_TOL,
    jobs: int = 1,
) -> BoxUnion:
    """Branch-and-contract cover of the feasible set.

    ``precision`` is the per-dimension width target as a fraction of the
    input box's width (unbounded dimensions never demand splitting).  Boxes
    are refined breadth-first, children ordered low-then-high, so output is
    deterministic.  If the union would exceed ``max_boxes`` the remaining
    frontier is flushed unsplit with its indices flagged ``unresolved``.
    """
    targets = _precision_targets(box, precision)
    first = propagate_fixpoint(cs, box, tol)
    if first.is_empty:
        return BoxUnion(())
    out: list[Box] = []
    unresolved: set[int] = set()
    frontier: deque[Box] = deque([first])
    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while frontier:
            budget_hit = len(out) + len(frontier) >= max_boxes
            if budget_hit:
                while frontier:
                    b = frontier.popleft()
                    if not _meets(b, targets):
                        unresolved.add(len(out))
                    out.append(b)
                break
            splits: list[Box] = []
            keep_order: list[tuple[str, int]] = []  # ("out", idx) | ("split", idx)
            while frontier:
                b = frontier.popleft()
                if _meets(b, targets):
                    out.append(b)
                    continue
                allowed = [
                    i
                    for i in b.splittable_dims()
                    if b.intervals[i].width > targets[i]
                ]
                dim = b.pick_split_dim(allowed) if allowed else None
                if dim is None:
                    out.append(b)
                    continue
                lo_half, hi_half = b.split(dim)
                splits.append(lo_half)
                splits.append(hi_half)
                if len(out) + len(splits) >= max_boxes:
                    break
            if not splits:
                continue
            if executor is not None and len(splits) > 8:
                children = list(executor.map(_pave_child, [(cs, h, tol) for h in splits], chunksize=8))
            else:
                children = [propagate_fixpoint(cs, h, tol) for h in splits]
            for child in children:
                if not child.is_empty:
                    frontier.append(child)
    finally:
        if executor is not None:
            executor.shutdown()
    return BoxUnion(tuple(out), frozenset(unresolved))
