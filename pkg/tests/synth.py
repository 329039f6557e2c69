"""Shared generators and oracles.

Three independent oracles live here so the test modules and the acceptance
suite exercise the library against something that does not share its code
paths:

- random inequality systems plus a plain-float point checker (contraction
  soundness is judged by Monte-Carlo points, not by interval arithmetic),
- exhaustive subset enumeration of minimum-cardinality repair sets,
- a boolean STL evaluator working purely on index arithmetic over a dense
  uniform grid.
"""

import itertools
import math
import operator

import numpy as np

from steadyscan import parse_model, propagate_fixpoint
from steadyscan.expr import eval_point

# ------------------------------------------------- random constraint systems

_RELS = ("<", "<=", ">", ">=")
_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}


def _template(rng, names):
    i, j = rng.choice(len(names), size=2, replace=False)
    xi, xj = names[i], names[j]
    kind = rng.integers(0, 5)
    if kind == 0:
        a, b = rng.uniform(-2.0, 2.0, size=2).round(3)
        return f"{a}*{xi} + {b}*{xj}"
    if kind == 1:
        return f"{xi} * {xj}"
    if kind == 2:
        return f"{xi}**2"
    if kind == 3:
        return f"abs({xi} - {xj})"
    return xi


def random_system(rng, max_unknowns=6, max_constraints=8, conflict_bias=0.0):
    """Build (model, text) with inequality constraints over box domains.

    Thresholds are drawn from the lhs value at a random interior point plus
    noise, so constraints are neither vacuous nor hopeless.  With
    ``conflict_bias`` probability a directly contradictory pair is appended.
    """
    n = int(rng.integers(2, max_unknowns + 1))
    names = [f"x{i}" for i in range(n)]
    lines = ["modelfile v1", "model synth"]
    los = rng.uniform(-4.0, 4.0, size=n)
    widths = rng.uniform(0.5, 6.0, size=n)
    for k, nm in enumerate(names):
        lines.append(f"unknown {nm} in [{los[k]:.4f}, {los[k] + widths[k]:.4f}]")

    def interior():
        return {nm: float(rng.uniform(los[k], los[k] + widths[k])) for k, nm in enumerate(names)}

    m = int(rng.integers(1, max_constraints + 1))
    cid = 0
    for _ in range(m):
        lhs = _template(rng, names)
        probe = parse_model("\n".join(lines + [f"constraint probe: {lhs} > 0"]))
        val = eval_point(probe.constraints[-1].lhs, interior())
        thr = val + rng.normal(0.0, 0.3 * abs(val) + 0.1)
        rel = _RELS[rng.integers(0, 4)]
        lines.append(f"constraint c{cid}: {lhs} {rel} {thr:.4f}")
        cid += 1
    if rng.uniform() < conflict_bias:
        k = int(rng.integers(0, n))
        mid = los[k] + 0.5 * widths[k]
        gap = 0.05 * widths[k]
        lines.append(f"constraint c{cid}: {names[k]} > {mid + gap:.4f}")
        lines.append(f"constraint c{cid + 1}: {names[k]} < {mid - gap:.4f}")
        cid += 2
    text = "\n".join(lines)
    return parse_model(text), text


def point_sat(c, values):
    lhs = eval_point(c.lhs, values)
    rhs = eval_point(c.rhs, values)
    if c.rel == "=":
        return lhs == rhs
    return _OPS[c.rel](lhs, rhs)


def mc_satisfying_points(model, rng, count):
    """Uniform points of the domain box that satisfy every constraint."""
    box = model.domain_box()
    names = [nm for nm, _ in box]
    lo = np.array([iv.lo for _, iv in box])
    hi = np.array([iv.hi for _, iv in box])
    pts = rng.uniform(lo, hi, size=(count, len(names)))
    keep = []
    for row in pts:
        values = dict(zip(names, row))
        if all(point_sat(c, values) for c in model.constraints):
            keep.append(values)
    return keep


# ------------------------------------------------ exhaustive conflict oracle


def oracle_min_sets(cs, box, tol=1e-3):
    """All minimum-cardinality removal sets, by brute-force enumeration.

    Consistency is the same predicate the library contract states: a
    non-empty propagate_fixpoint result.  Only the enumeration is
    independent.
    """
    if not propagate_fixpoint(cs, box, tol).is_empty:
        return set()
    ids = [c.cid for c in cs]
    for size in range(1, len(ids) + 1):
        hits = set()
        for combo in itertools.combinations(ids, size):
            rest = [c for c in cs if c.cid not in combo]
            if not propagate_fixpoint(rest, box, tol).is_empty:
                hits.add(frozenset(combo))
        if hits:
            return hits
    return set()


# ------------------------------------------------- boolean dense-grid oracle

# Everything is kept on exact binary fractions: the dense grid step is
# 2**-10 s, trace breakpoints sit on multiples of 0.5 s and window bounds on
# multiples of 0.25 s, so index arithmetic below is exact.

DENSE_DT = 2.0**-10
DENSE_T_END = 10.0
DENSE_N = int(round(DENSE_T_END / DENSE_DT)) + 1


def _idx(seconds):
    return int(round(seconds / DENSE_DT))


def _window_idx(ia, ib, n):
    i = np.arange(n)
    lo = np.minimum(i + ia, n - 1)
    hi = np.minimum(i + ib if ib < n else np.full(n, n - 1), n - 1)
    return lo, np.maximum(hi, lo)


def bool_eval(node, dense_margins):
    """Boolean semantics of a generated formula on the dense grid.

    ``node`` is the tuple tree produced by random_formula; atom margins are
    looked up by id in ``dense_margins``.  Temporal windows clamp to the
    trace end exactly like the monitor's definition.
    """
    tag = node[0]
    n = DENSE_N
    if tag == "atom":
        return dense_margins[node[1]] > 0.0
    if tag == "not":
        return ~bool_eval(node[1], dense_margins)
    if tag == "and":
        return bool_eval(node[1], dense_margins) & bool_eval(node[2], dense_margins)
    if tag == "or":
        return bool_eval(node[1], dense_margins) | bool_eval(node[2], dense_margins)
    if tag == "implies":
        return ~bool_eval(node[1], dense_margins) | bool_eval(node[2], dense_margins)
    if tag in ("always", "eventually"):
        v = bool_eval(node[3], dense_margins)
        ia, ib = _idx(node[1]), (n if math.isinf(node[2]) else _idx(node[2]))
        lo, hi = _window_idx(ia, ib, n)
        cnt = np.concatenate(([0], np.cumsum(v)))
        inside = cnt[hi + 1] - cnt[lo]
        if tag == "always":
            return inside == hi + 1 - lo
        return inside > 0
    if tag == "until":
        f = bool_eval(node[3], dense_margins)
        g = bool_eval(node[4], dense_margins)
        ia, ib = _idx(node[1]), (n if math.isinf(node[2]) else _idx(node[2]))
        lo, hi = _window_idx(ia, ib, n)
        fpos = np.flatnonzero(~f)
        if fpos.size:
            # last index j >= i with f true throughout [i, j]
            ffirst = np.searchsorted(fpos, np.arange(n))
            last_ok = np.where(ffirst < fpos.size, fpos[np.minimum(ffirst, fpos.size - 1)] - 1, n - 1)
        else:
            last_ok = np.full(n, n - 1)
        gpos = np.flatnonzero(g)
        if not gpos.size:
            return np.zeros(n, dtype=bool)
        gfirst = np.searchsorted(gpos, lo)  # first g-witness at or past the window start
        has = gfirst < gpos.size
        witness = gpos[np.minimum(gfirst, gpos.size - 1)]
        return has & (witness <= np.minimum(hi, last_ok))
    raise AssertionError(tag)


# ------------------------------------------------- formula / trace generator

_ATOMS = (
    ("x > {c}", lambda x, y, c: x - c),
    ("x < {c}", lambda x, y, c: c - x),
    ("x - y >= {c}", lambda x, y, c: x - y - c),
    ("abs(x) <= {c}", lambda x, y, c: c - np.abs(x)),
    ("x * y > {c}", lambda x, y, c: x * y - c),
    ("y >= {c}", lambda x, y, c: y - c),
)


def random_trace(rng):
    """Piecewise-linear trace on breakpoints at multiples of 0.5 s."""
    k = int(rng.integers(2, 21))
    cuts = rng.choice(np.arange(1, 20), size=k - 1, replace=False)
    times = np.sort(np.concatenate(([0.0, DENSE_T_END], cuts * 0.5)))
    x = rng.uniform(-2.0, 2.0, size=times.size).round(4)
    y = rng.uniform(-2.0, 2.0, size=times.size).round(4)
    return times, x, y


def random_formula(rng, depth, atoms):
    """Return (text, tuple-tree); atoms collects (id -> margin lambda, c)."""
    if depth == 0 or rng.uniform() < 0.3:
        ti = int(rng.integers(0, len(_ATOMS)))
        c = float(rng.uniform(-1.5, 1.5).round(3))
        aid = len(atoms)
        atoms.append((_ATOMS[ti][1], c))
        return _ATOMS[ti][0].format(c=c), ("atom", aid)
    kind = rng.choice(["not", "and", "or", "implies", "always", "eventually", "until"], p=[0.1, 0.16, 0.16, 0.08, 0.18, 0.18, 0.14])
    if kind == "not":
        t, n = random_formula(rng, depth - 1, atoms)
        return f"not ({t})", ("not", n)
    if kind in ("and", "or", "implies"):
        t1, n1 = random_formula(rng, depth - 1, atoms)
        t2, n2 = random_formula(rng, depth - 1, atoms)
        op = {"and": "and", "or": "or", "implies": "->"}[kind]
        return f"({t1}) {op} ({t2})", (kind, n1, n2)
    a = float(rng.integers(0, 16)) * 0.25
    if rng.uniform() < 0.15:
        b, btxt = math.inf, "inf"
    else:
        b = a + float(rng.integers(1, 17)) * 0.25
        btxt = f"{b}"
    if kind == "until":
        t1, n1 = random_formula(rng, depth - 1, atoms)
        t2, n2 = random_formula(rng, depth - 1, atoms)
        return f"({t1}) until[{a}, {btxt}] ({t2})", ("until", a, b, n1, n2)
    t, n = random_formula(rng, depth - 1, atoms)
    return f"{kind}[{a}, {btxt}] ({t})", (kind, a, b, n)


def dense_atom_margins(atoms, times, x, y):
    """Sample each margin at the trace breakpoints, then interpolate.

    Interpolating the sampled margin (not re-evaluating the arithmetic
    densely) matches the monitor's stated semantics, so nonlinear margins
    carry no definitional gap.
    """
    grid = np.arange(DENSE_N) * DENSE_DT
    out = []
    for fn, c in atoms:
        coarse = fn(x, y, c)
        out.append(np.interp(grid, times, coarse))
    return out


def atom_slope_bound(atoms, times, x, y):
    worst = 0.0
    for fn, c in atoms:
        v = fn(x, y, c)
        dt = np.diff(times)
        worst = max(worst, float(np.max(np.abs(np.diff(v)) / dt)))
    return worst
