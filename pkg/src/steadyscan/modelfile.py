"""Model representation and the line-oriented model-file format.

A model couples four things: named unknowns with domain intervals (rate
parameters and steady-state concentrations), ODE states with their
right-hand sides, algebraic constraints over the unknowns, and optional
perturbation events plus a temporal-logic specification for simulations.

The ``derive-steady-state`` directive generates one equality per state:
the ODE right-hand side with every state reference replaced by the
corresponding ``<state>^eq`` unknown, set to zero.  These carry the
``steady-state`` tag and ids ``ss_<state>``; membership constraints
``expr in [a, b]`` are normalized at parse time into a ``:lo``/``:hi``
inequality pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .expr import (
    Const,
    Expr,
    ExprSyntaxError,
    Ref,
    UndeclaredNameError,
    DEFAULT_HILL_EXPONENT,
    parse_expr,
    refs,
    substitute,
    to_text,
)
from .intervals import Box, Interval

FORMAT_HEADER = "modelfile v1"

RELATIONS = ("=", "<", "<=", ">", ">=")


class ModelSyntaxError(ExprSyntaxError):
    """Malformed model file (unknown directive, bad interval literal, ...)."""


class DuplicateIdError(ModelSyntaxError):
    """A constraint id, unknown or state was declared twice."""


def state_eq_name(state: str) -> str:
    """Name of the steady-state unknown paired with an ODE state."""
    return state + "^eq"


# ------------------------------------------------------------------- records


@dataclass(frozen=True, slots=True)
class Unknown:
    name: str
    domain: Interval
    scale: str = "linear"  # "linear" | "log"
    tags: frozenset[str] = frozenset()


@dataclass(frozen=True, slots=True)
class Constraint:
    """``lhs REL rhs`` over unknowns.

    ``derived`` holds redundant consequences shipped with the model (already
    tagged ``redundant``); they are emitted by the redundant-constraint
    generator, never checked as part of this constraint itself.
    """

    cid: str
    lhs: Expr
    rel: str
    rhs: Expr
    tags: frozenset[str] = frozenset()
    derived: tuple["Constraint", ...] = ()
    _names: frozenset[str] = field(default=frozenset(), init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.rel not in RELATIONS:
            raise ValueError(f"bad relation {self.rel!r} in constraint {self.cid}")
        object.__setattr__(self, "_names", frozenset(refs(self.lhs) | refs(self.rhs)))

    @property
    def is_equality(self) -> bool:
        return self.rel == "="

    @property
    def is_redundant(self) -> bool:
        return "redundant" in self.tags

    def names(self) -> frozenset[str]:
        return self._names

    def text(self) -> str:
        return f"{to_text(self.lhs)} {self.rel} {to_text(self.rhs)}"


@dataclass(frozen=True, slots=True)
class Event:
    label: str
    time: Expr
    assignments: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True, slots=True)
class Model:
    name: str
    unknowns: tuple[Unknown, ...]
    states: tuple[str, ...]
    odes: tuple[tuple[str, Expr], ...]  # ordered like states
    constraints: tuple[Constraint, ...]  # explicit + generated steady-state
    events: tuple[Event, ...] = ()
    stl: str | None = None
    options: dict[str, str] = field(default_factory=dict)
    derive_steady_state: bool = False
    ode_tags: tuple[tuple[str, frozenset[str]], ...] = ()

    # -- lookups ---------------------------------------------------------

    def unknown(self, name: str) -> Unknown:
        for u in self.unknowns:
            if u.name == name:
                return u
        raise KeyError(name)

    def unknown_names(self) -> tuple[str, ...]:
        return tuple(u.name for u in self.unknowns)

    def constraint(self, cid: str) -> Constraint:
        for c in self.constraints:
            if c.cid == cid:
                return c
        raise KeyError(cid)

    def ode(self, state: str) -> Expr:
        for s, e in self.odes:
            if s == state:
                return e
        raise KeyError(state)

    def domain_box(self) -> Box:
        return Box(tuple(u.name for u in self.unknowns), tuple(u.domain for u in self.unknowns))

    def option_float(self, key: str, default: float) -> float:
        raw = self.options.get(key)
        return default if raw is None else float(raw)

    def steady_state_values(self, values: Mapping[str, float]) -> dict[str, float]:
        """Initial state vector from a solved assignment (state -> value)."""
        return {s: values[state_eq_name(s)] for s in self.states}


# ------------------------------------------------------------------ generation


def steady_state_constraints(states: Iterable[str], odes: Mapping[str, Expr]) -> list[Constraint]:
    sub = {name: Ref(state_eq_name(name)) for name in odes}
    out = []
    for s in states:
        lhs = substitute(odes[s], sub)
        out.append(Constraint(f"ss_{s}", lhs, "=", Const(0.0), tags=frozenset({"steady-state"})))
    return out


# --------------------------------------------------------------------- parsing


def _strip_tags(text: str) -> tuple[str, frozenset[str]]:
    parts = text.rsplit(" tags ", 1)
    if len(parts) == 2 and parts[1].strip() and " " not in parts[1].strip():
        tags = frozenset(t for t in parts[1].strip().split(",") if t)
        return parts[0].rstrip(), tags
    return text, frozenset()


def _parse_interval_literal(text: str, lineno: int) -> Interval:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ModelSyntaxError(f"expected interval literal, got {text!r}", lineno, 1)
    body = text[1:-1].split(",")
    if len(body) != 2:
        raise ModelSyntaxError(f"interval literal needs two endpoints: {text!r}", lineno, 1)
    try:
        lo, hi = float(body[0]), float(body[1])
    except ValueError:
        raise ModelSyntaxError(f"bad interval endpoint in {text!r}", lineno, 1) from None
    if lo > hi:
        raise ModelSyntaxError(f"interval lower bound exceeds upper in {text!r}", lineno, 1)
    return Interval(lo, hi)


def _split_relation(text: str, lineno: int) -> tuple[str, str, str]:
    """Split constraint body on its top-level relation.

    Returns (lhs_text, rel, rhs_text); rel "in" has the raw interval literal
    as rhs_text.
    """
    depth = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0:
            if text[i : i + 2] in ("<=", ">="):
                return text[:i], text[i : i + 2], text[i + 2 :]
            if ch in "<>=":
                return text[:i], ch, text[i + 1 :]
            if ch == "i" and text[i : i + 3] == "in " and i > 0 and text[i - 1].isspace():
                return text[:i], "in", text[i + 3 :]
            if ch == "i" and text[i : i + 3] == "in[" and i > 0 and text[i - 1].isspace():
                return text[:i], "in", text[i + 2 :]
        i += 1
    raise ModelSyntaxError("constraint has no relation (=, <, <=, >, >=, in)", lineno, 1)


class _ModelBuilder:
    def __init__(self, path_hint: str):
        self.path_hint = path_hint
        self.name = "model"
        self.unknowns: list[Unknown] = []
        self.states: list[str] = []
        self.odes: dict[str, Expr] = {}
        self.ode_tags: dict[str, frozenset[str]] = {}
        self.constraints: list[Constraint] = []
        self.derivations: list[tuple[str, Constraint, int]] = []  # parent, child, line
        self.events: list[Event] = []
        self.stl: str | None = None
        self.options: dict[str, str] = {}
        self.derive_ss = False
        self.hill = DEFAULT_HILL_EXPONENT

    # name resolution ------------------------------------------------------

    def _declared(self) -> set[str]:
        return {u.name for u in self.unknowns}

    def resolve_unknown(self, lineno: int):
        names = self._declared()

        def resolve(name: str, col: int) -> Ref:
            if name not in names:
                raise UndeclaredNameError(f"undeclared unknown {name!r}", lineno, col)
            return Ref(name, "unknown")

        return resolve

    def resolve_ode(self, lineno: int):
        unames = self._declared()
        snames = set(self.states)

        def resolve(name: str, col: int) -> Ref:
            if name in snames:
                return Ref(name, "state")
            if name in unames:
                return Ref(name, "unknown")
            raise UndeclaredNameError(f"undeclared name {name!r} (not an unknown or state)", lineno, col)

        return resolve

    # directives -------------------------------------------------------------

    def add_unknown(self, body: str, lineno: int) -> None:
        body, tags = _strip_tags(body)
        scale = "linear"
        if body.endswith(" scale log"):
            scale, body = "log", body[: -len(" scale log")]
        elif body.endswith(" scale linear"):
            scale, body = "linear", body[: -len(" scale linear")]
        parts = body.split(" in ", 1)
        if len(parts) != 2:
            raise ModelSyntaxError("unknown declaration needs 'in [lo, hi]'", lineno, 1)
        name = parts[0].strip()
        if not name:
            raise ModelSyntaxError("unknown declaration missing name", lineno, 1)
        if name in self._declared():
            raise DuplicateIdError(f"unknown {name!r} declared twice", lineno, 1)
        domain = _parse_interval_literal(parts[1], lineno)
        if scale == "log" and domain.lo <= 0.0:
            raise ModelSyntaxError(f"log-scale unknown {name!r} needs a positive domain", lineno, 1)
        self.unknowns.append(Unknown(name, domain, scale, tags))

    def add_state(self, body: str, lineno: int) -> None:
        name = body.strip()
        if not name:
            raise ModelSyntaxError("state declaration missing name", lineno, 1)
        if name in self.states:
            raise DuplicateIdError(f"state {name!r} declared twice", lineno, 1)
        self.states.append(name)

    def add_ode(self, body: str, lineno: int) -> None:
        body, tags = _strip_tags(body)
        parts = body.split("=", 1)
        if len(parts) != 2:
            raise ModelSyntaxError("ode needs '<state> = <expr>'", lineno, 1)
        state = parts[0].strip()
        if state not in self.states:
            raise UndeclaredNameError(f"ode for undeclared state {state!r}", lineno, 1)
        if state in self.odes:
            raise DuplicateIdError(f"ode for state {state!r} given twice", lineno, 1)
        self.odes[state] = parse_expr(parts[1], self.resolve_ode(lineno), line=lineno, hill_exponent=self.hill)
        self.ode_tags[state] = tags

    def _parse_constraint_body(self, cid: str, body: str, lineno: int, tags: frozenset[str]) -> list[Constraint]:
        lhs_text, rel, rhs_text = _split_relation(body, lineno)
        resolve = self.resolve_unknown(lineno)
        lhs = parse_expr(lhs_text, resolve, line=lineno, hill_exponent=self.hill)
        if rel == "in":
            iv = _parse_interval_literal(rhs_text, lineno)
            return [
                Constraint(cid + ":lo", lhs, ">=", Const(iv.lo), tags),
                Constraint(cid + ":hi", lhs, "<=", Const(iv.hi), tags),
            ]
        rhs = parse_expr(rhs_text, resolve, line=lineno, hill_exponent=self.hill)
        return [Constraint(cid, lhs, rel, rhs, tags)]

    def add_constraint(self, body: str, lineno: int) -> None:
        body, tags = _strip_tags(body)
        head, sep, rest = body.partition(":")
        if not sep:
            raise ModelSyntaxError("constraint needs '<id>: <lhs> <rel> <rhs>'", lineno, 1)
        cid = head.strip()
        known = {c.cid for c in self.constraints}
        for c in self._parse_constraint_body(cid, rest, lineno, tags):
            if c.cid in known:
                raise DuplicateIdError(f"constraint id {c.cid!r} declared twice", lineno, 1)
            self.constraints.append(c)

    def add_derive(self, body: str, lineno: int) -> None:
        head, sep, rest = body.partition(":")
        if not sep or "->" not in head:
            raise ModelSyntaxError("derive needs '<parent> -> <id>: <lhs> <rel> <rhs>'", lineno, 1)
        parent, child_id = (s.strip() for s in head.split("->", 1))
        children = self._parse_constraint_body(child_id, rest, lineno, frozenset({"redundant"}))
        if len(children) != 1:
            raise ModelSyntaxError("derive must use a plain relation, not 'in'", lineno, 1)
        self.derivations.append((parent, children[0], lineno))

    def add_event(self, body: str, lineno: int) -> None:
        head, sep, rest = body.partition(":")
        if not sep or " at " not in head + " ":
            raise ModelSyntaxError("event needs '<label> at <time>: <name> = <expr>[, ...]'", lineno, 1)
        label, _, time_text = head.partition(" at ")
        label = label.strip()
        time = parse_expr(time_text, self.resolve_unknown(lineno), line=lineno, hill_exponent=self.hill)
        assignments = []
        unames = self._declared()
        for part in rest.split(","):
            lhs, eq, rhs = part.partition("=")
            if not eq:
                raise ModelSyntaxError("event assignment needs '<name> = <expr>'", lineno, 1)
            target = lhs.strip()
            if target not in unames:
                raise UndeclaredNameError(f"event assigns undeclared unknown {target!r}", lineno, 1)
            assignments.append((target, parse_expr(rhs, self.resolve_unknown(lineno), line=lineno, hill_exponent=self.hill)))
        self.events.append(Event(label, time, tuple(assignments)))

    # assembly ---------------------------------------------------------------

    def build(self) -> Model:
        if self.derive_ss:
            missing = [s for s in self.states if s not in self.odes]
            if missing:
                raise ModelSyntaxError(f"derive-steady-state: states without odes: {missing}", 0, 1)
            undeclared = [s for s in self.states if state_eq_name(s) not in self._declared()]
            if undeclared:
                raise ModelSyntaxError(
                    f"derive-steady-state: missing steady-state unknowns for {undeclared}", 0, 1
                )
        constraints = list(self.constraints)
        if self.derive_ss:
            ss = steady_state_constraints(self.states, self.odes)
            ids = {c.cid for c in constraints}
            clash = [c.cid for c in ss if c.cid in ids]
            if clash:
                raise DuplicateIdError(f"generated steady-state ids collide: {clash}", 0, 1)
            constraints.extend(ss)
        # attach shipped derivation rules to their parents
        by_id = {c.cid: i for i, c in enumerate(constraints)}
        for parent, child, lineno in self.derivations:
            idx = by_id.get(parent)
            if idx is None:
                # membership constraints split into :lo/:hi; attach to :lo
                idx = by_id.get(parent + ":lo")
            if idx is None:
                raise ModelSyntaxError(f"derive references unknown constraint {parent!r}", lineno, 1)
            c = constraints[idx]
            constraints[idx] = replace(c, derived=c.derived + (child,))
        return Model(
            name=self.name,
            unknowns=tuple(self.unknowns),
            states=tuple(self.states),
            odes=tuple((s, self.odes[s]) for s in self.states if s in self.odes),
            constraints=tuple(constraints),
            events=tuple(self.events),
            stl=self.stl,
            options=dict(self.options),
            derive_steady_state=self.derive_ss,
            ode_tags=tuple((s, self.ode_tags.get(s, frozenset())) for s in self.states if s in self.odes),
        )


def parse_model(text: str, path_hint: str = "<string>") -> Model:
    """Parse model-file text; raises ModelSyntaxError and relatives with
    line/column positions."""
    lines = text.splitlines()
    stripped = [(i + 1, ln.split("#", 1)[0].rstrip()) for i, ln in enumerate(lines)]
    content = [(no, ln) for no, ln in stripped if ln.strip()]
    if not content or content[0][1].strip() != FORMAT_HEADER:
        raise ModelSyntaxError(f"first line must be {FORMAT_HEADER!r}", content[0][0] if content else 1, 1)

    b = _ModelBuilder(path_hint)
    # options first: the hill exponent affects expression parsing everywhere
    for no, ln in content[1:]:
        word, _, rest = ln.strip().partition(" ")
        if word == "option":
            key, _, value = rest.strip().partition(" ")
            if not key or not value.strip():
                raise ModelSyntaxError("option needs '<key> <value>'", no, 1)
            b.options[key] = value.strip()
    if "hill_exponent" in b.options:
        b.hill = float(b.options["hill_exponent"])

    for no, ln in content[1:]:
        word, _, rest = ln.strip().partition(" ")
        rest = rest.strip()
        if word == "option":
            continue
        if word == "model":
            b.name = rest
        elif word == "unknown":
            b.add_unknown(rest, no)
        elif word == "state":
            b.add_state(rest, no)
        elif word == "ode":
            b.add_ode(rest, no)
        elif word == "constraint":
            b.add_constraint(rest, no)
        elif word == "derive":
            b.add_derive(rest, no)
        elif word == "event":
            b.add_event(rest, no)
        elif word == "stl":
            if b.stl is not None:
                raise DuplicateIdError("stl given twice", no, 1)
            b.stl = rest
        elif word == "derive-steady-state":
            b.derive_ss = True
        else:
            raise ModelSyntaxError(f"unknown directive {word!r}", no, 1)
    return b.build()


def load_model(path: str) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read(), path)


# -------------------------------------------------------------------- printing


def _float_lit(x: float) -> str:
    return repr(float(x))


def model_to_text(m: Model) -> str:
    """Render back to model-file text; parse_model(model_to_text(m)) == m."""
    out = [FORMAT_HEADER, ""]
    out.append(f"model {m.name}")
    for key in m.options:
        out.append(f"option {key} {m.options[key]}")
    out.append("")
    for u in m.unknowns:
        line = f"unknown {u.name} in [{_float_lit(u.domain.lo)}, {_float_lit(u.domain.hi)}]"
        line += f" scale {u.scale}"
        if u.tags:
            line += " tags " + ",".join(sorted(u.tags))
        out.append(line)
    out.append("")
    for s in m.states:
        out.append(f"state {s}")
    out.append("")
    tag_map = dict(m.ode_tags)
    for s, e in m.odes:
        line = f"ode {s} = {to_text(e)}"
        if tag_map.get(s):
            line += " tags " + ",".join(sorted(tag_map[s]))
        out.append(line)
    out.append("")
    generated = {f"ss_{s}" for s in m.states} if m.derive_steady_state else set()
    by_id = {c.cid: c for c in m.constraints}
    skip: set[str] = set()
    for c in m.constraints:
        if (c.cid in generated and "steady-state" in c.tags) or c.cid in skip:
            continue
        parent_id = c.cid
        body = c.text()
        # re-merge membership pairs produced by 'expr in [a, b]'
        if c.cid.endswith(":lo") and c.rel == ">=" and isinstance(c.rhs, Const):
            sib = by_id.get(c.cid[:-3] + ":hi")
            if sib is not None and sib.rel == "<=" and isinstance(sib.rhs, Const) and sib.lhs == c.lhs:
                parent_id = c.cid[:-3]
                body = f"{to_text(c.lhs)} in [{_float_lit(c.rhs.value)}, {_float_lit(sib.rhs.value)}]"
                skip.add(sib.cid)
        line = f"constraint {parent_id}: {body}"
        if c.tags:
            line += " tags " + ",".join(sorted(c.tags))
        out.append(line)
        for child in c.derived:
            out.append(f"derive {parent_id} -> {child.cid}: {child.text()}")
    out.append("")
    for ev in m.events:
        assigns = ", ".join(f"{n} = {to_text(e)}" for n, e in ev.assignments)
        out.append(f"event {ev.label} at {to_text(ev.time)}: {assigns}")
    if m.stl is not None:
        out.append(f"stl {m.stl}")
    if m.derive_steady_state:
        out.append("derive-steady-state")
    text = "\n".join(out) + "\n"
    while "\n\n\n" in text:
        text = text.replace("\n\n\n", "\n\n")
    return text
