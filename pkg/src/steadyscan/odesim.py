"""Time-domain simulation of a parameterized model.

``simulate`` integrates the declared ODEs from an initial state with
adaptive error control, applying perturbation events by stopping the
integrator at the event time exactly, rewriting the affected parameters,
and restarting.  The result is a ``Trace``: the accepted integration
steps plus the event log, writable as CSV or JSON and consumed by the
temporal-logic monitor.  ``stability_check`` classifies a steady state
through the eigenvalues of a finite-difference Jacobian.

Right-hand sides are compiled to plain Python expressions once per model;
the expression-tree walker is far too slow to sit inside an integrator
loop.  Compiled evaluation matches ``eval_point`` except that a division
by exact zero surfaces as an error instead of a signed infinity.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import RK45, solve_ivp

from .expr import Bin, Call, Const, Expr, MissingValueError, Neg, Ref, _pow_pt, eval_point, sig_plus_point
from .modelfile import Event, Model

# negative values smaller than this are integrator noise and clamp silently
CLAMP_QUIET = 1e-30
DEFAULT_RTOL = 1e-7
DEFAULT_ATOL = 1e-15


STABLE_EIG_BAND = 1e-12


class SimulationError(RuntimeError):
    """Integration failed (step-size underflow even on the stiff fallback)."""


class NumericModelError(ArithmeticError):
    """A right-hand side or Jacobian produced a non-finite value."""

    def __init__(self, message: str, state: str | None = None):
        super().__init__(message)
        self.state = state


# --------------------------------------------------------------------- traces


@dataclass(frozen=True, eq=False)
class Trace:
    """Sampled trajectory: one row of ``values`` per entry of ``times``."""

    names: tuple[str, ...]
    times: np.ndarray
    values: np.ndarray
    events: tuple[tuple[float, str], ...] = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(t), len(self.names)):
            raise ValueError(f"values shape {v.shape} does not match {len(t)} times x {len(self.names)} names")
        if len(t) == 0:
            raise ValueError("a trace needs at least one sample")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ValueError("trace times and values must be finite")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("trace times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def signal(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"trace has no signal {name!r}") from None

    def initial(self, name: str) -> float:
        return float(self.signal(name)[0])

    def at(self, t: float) -> np.ndarray:
        """Piecewise-linear interpolation of the full state vector."""
        out = np.empty(len(self.names))
        for j in range(len(self.names)):
            out[j] = np.interp(t, self.times, self.values[:, j])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time," + ",".join(self.names) + "\n")
        for t, row in zip(self.times, self.values):
            buf.write(repr(float(t)) + "," + ",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "Trace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty trace file")
        header = lines[0].split(",")
        if header[:1] != ["time"]:
            raise ValueError("trace CSV must start with a 'time' column")
        names = tuple(h.strip() for h in header[1:])
        rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
        arr = np.asarray(rows, dtype=float)
        return Trace(names, arr[:, 0], arr[:, 1:])

    def to_json(self) -> str:
        return json.dumps(
            {
                "names": list(self.names),
                "times": self.times.tolist(),
                "values": self.values.tolist(),
                "events": [[t, label] for t, label in self.events],
            }
        )

    @staticmethod
    def from_json(text: str) -> "Trace":
        raw = json.loads(text)
        return Trace(
            tuple(raw["names"]),
            np.asarray(raw["times"], dtype=float),
            np.asarray(raw["values"], dtype=float),
            tuple((float(t), str(label)) for t, label in raw.get("events", [])),
        )


# -------------------------------------------------------- compiled right sides


def _emit(e: Expr, slot: Mapping[str, str]) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Ref):
        return slot[e.name]
    if isinstance(e, Neg):
        return f"(-{_emit(e.arg, slot)})"
    if isinstance(e, Bin):
        if e.op == "**":
            return f"_pow({_emit(e.left, slot)}, {_emit(e.right, slot)})"
        return f"({_emit(e.left, slot)} {e.op} {_emit(e.right, slot)})"
    if isinstance(e, Call):
        args = ", ".join(_emit(a, slot) for a in e.args)
        fn = {"abs": "abs", "min": "min", "max": "max", "sig+": "_sig"}.get(e.fn)
        if fn is None:
            raise ValueError(f"cannot compile call to {e.fn!r}")
        return f"{fn}({args})"
    raise TypeError(f"cannot compile node {e!r}")


@dataclass(frozen=True, eq=False)
class CompiledRhs:
    """``f(t, y, p) -> dy/dt`` plus the parameter layout it expects."""

    states: tuple[str, ...]
    params: tuple[str, ...]
    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray]

    def param_vector(self, values: Mapping[str, float]) -> np.ndarray:
        out = np.empty(len(self.params))
        for j, name in enumerate(self.params):
            try:
                out[j] = values[name]
            except KeyError:
                raise MissingValueError(name) from None
        return out


# keyed by object identity with the model kept alive, since Model holds a
# dict and cannot be hashed; bounded so throwaway models cannot pile up
_COMPILED: dict[int, tuple[Model, CompiledRhs]] = {}


def compile_rhs(m: Model) -> CompiledRhs:
    got = _COMPILED.get(id(m))
    if got is not None and got[0] is m:
        return got[1]
    states = m.states
    state_set = set(states)
    referenced: list[str] = []
    seen = set(state_set)
    for u in m.unknowns:
        if u.name not in seen:
            referenced.append(u.name)
            seen.add(u.name)
    slot = {n: f"y[{i}]" for i, n in enumerate(states)}
    slot.update({n: f"p[{j}]" for j, n in enumerate(referenced)})
    lines = ["def _rhs(t, y, p, _pow=_pow, _sig=_sig, _empty=_empty):", "    out = _empty(%d)" % len(states)]
    for i, (_, expr) in enumerate(m.odes):
        lines.append(f"    out[{i}] = {_emit(expr, slot)}")
    lines.append("    return out")
    ns = {"_pow": _pow_pt, "_sig": sig_plus_point, "_empty": np.empty}
    exec(compile("\n".join(lines), f"<rhs:{m.name}>", "exec"), ns)
    out = CompiledRhs(states, tuple(referenced), ns["_rhs"])
    if len(_COMPILED) >= 16:
        _COMPILED.pop(next(iter(_COMPILED)))
    _COMPILED[id(m)] = (m, out)
    return out


def rhs(m: Model, state: Sequence[float] | Mapping[str, float], params: Mapping[str, float]) -> np.ndarray:
    """One right-hand-side evaluation with finiteness attribution."""
    c = compile_rhs(m)
    y = _state_vector(c.states, state)
    p = c.param_vector(params)
    try:
        out = c.f(0.0, y, p)
    except ArithmeticError as exc:
        raise NumericModelError(f"right-hand side failed: {exc}") from exc
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        name = c.states[bad[0]]
        raise NumericModelError(f"non-finite derivative for state {name}", state=name)
    return out


def _state_vector(states: tuple[str, ...], init: Sequence[float] | Mapping[str, float]) -> np.ndarray:
    if isinstance(init, Mapping):
        out = np.empty(len(states))
        for i, n in enumerate(states):
            try:
                out[i] = init[n]
            except KeyError:
                raise MissingValueError(n) from None
        return out
    arr = np.asarray(init, dtype=float)
    if arr.shape != (len(states),):
        raise ValueError(f"initial state has shape {arr.shape}, expected ({len(states)},)")
    return arr


# ----------------------------------------------------------------- simulation


def _event_schedule(events: Sequence[Event], values: Mapping[str, float], t_end: float) -> list[tuple[float, Event]]:
    out = []
    for ev in events:
        t = eval_point(ev.time, values)
        if not math.isfinite(t) or t < 0.0:
            raise ValueError(f"event {ev.label!r} has invalid time {t!r}")
        if t <= t_end:
            out.append((t, ev))
    out.sort(key=lambda te: te[0])
    return out


# accepted explicit steps per segment before stiffness is declared; a clean
# run of the full builtin model takes a few thousand
STIFF_STEP_BUDGET = 10_000


def _integrate(
    f, span: tuple[float, float], y0: np.ndarray, p: np.ndarray, rtol: float, atol: float
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate one event-free segment; returns (times, states-by-row).

    Starts on an explicit embedded pair and hands over to a stiff-capable
    implicit method when the pair either underflows its step size or blows
    through the step budget, which is how stiffness actually presents at
    these tolerances: a grind of tiny accepted steps, not an outright
    failure.
    """
    fun = lambda t, y: f(t, y, p)  # noqa: E731
    stepper = RK45(fun, span[0], y0, span[1], rtol=rtol, atol=atol)
    ts, ys = [span[0]], [y0.copy()]
    stiff = False
    while stepper.status == "running":
        if len(ts) > STIFF_STEP_BUDGET:
            stiff = True
            break
        try:
            stepper.step()
        except (ArithmeticError, ValueError):
            stiff = True
            break
        if stepper.status == "failed":
            stiff = True
            break
        ts.append(stepper.t)
        ys.append(stepper.y.copy())
    if not stiff:
        return np.asarray(ts), np.asarray(ys)
    sol = solve_ivp(f, (ts[-1], span[1]), ys[-1], args=(p,), method="LSODA", rtol=rtol, atol=atol)
    if not sol.success:
        # extreme dynamic range can defeat LSODA's error test; the fully
        # implicit Radau pair is slower but survives it
        sol = solve_ivp(f, (ts[-1], span[1]), ys[-1], args=(p,), method="Radau", rtol=rtol, atol=atol)
    if not sol.success:
        raise SimulationError(f"integration failed on [{span[0]:g}, {span[1]:g}]: {sol.message}")
    return np.concatenate([np.asarray(ts), sol.t[1:]]), np.vstack([np.asarray(ys), sol.y.T[1:]])


def simulate(
    m: Model,
    params: Mapping[str, float],
    init: Sequence[float] | Mapping[str, float],
    t_end: float | None = None,
    events: Sequence[Event] | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trace:
    """Integrate the model ODEs from ``init``, applying perturbation events.

    Each event is handled exactly: the integrator runs up to the event
    time, the event's assignments are evaluated and written into the
    parameter vector, and integration restarts from the same state.  The
    trace records every accepted step and the (time, label) event log.
    ``t_end`` falls back to the model's ``t_end`` option.
    """
    c = compile_rhs(m)
    if t_end is None:
        t_end = m.option_float("t_end", 0.0)
    if not math.isfinite(t_end) or t_end < 0.0:
        raise ValueError(f"t_end must be finite and nonnegative, got {t_end!r}")
    y0 = _state_vector(c.states, init)
    if not np.all(np.isfinite(y0)) or np.any(y0 < 0.0):
        raise ValueError("initial state must be finite and nonnegative")
    p = c.param_vector(params)
    if t_end == 0.0:
        return Trace(c.states, np.array([0.0]), y0.reshape(1, -1))

    live = dict(params)
    schedule = _event_schedule(m.events if events is None else events, live, t_end)
    times: list[np.ndarray] = []
    rows: list[np.ndarray] = []
    applied: list[tuple[float, str]] = []
    t, y = 0.0, y0
    pidx = {n: j for j, n in enumerate(c.params)}

    def run_segment(upto: float) -> None:
        nonlocal t, y
        if upto <= t:
            return
        try:
            seg_t, seg_y = _integrate(c.f, (t, upto), y, p, rtol, atol)
        except ArithmeticError as exc:
            raise NumericModelError(f"right-hand side failed at t>={t:g}: {exc}") from exc
        skip = 1 if times and seg_t[0] == t else 0
        times.append(seg_t[skip:])
        rows.append(seg_y[skip:])
        t, y = float(seg_t[-1]), seg_y[-1].copy()

    if not times:
        times.append(np.array([0.0]))
        rows.append(y0.reshape(1, -1))
    for te, ev in schedule:
        run_segment(te)
        for name, expr in ev.assignments:
            value = eval_point(expr, live)
            live[name] = value
            if name in pidx:
                p[pidx[name]] = value
        applied.append((te, ev.label))
    run_segment(t_end)

    all_t = np.concatenate(times)
    all_v = np.vstack(rows)
    keep = np.concatenate(([True], np.diff(all_t) > 0.0))
    all_t, all_v = all_t[keep], all_v[keep]
    if not np.all(np.isfinite(all_v)):
        raise NumericModelError("integration produced non-finite state values")
    worst = all_v.min()
    if worst < 0.0:
        if worst < -CLAMP_QUIET:
            warnings.warn(
                f"clamped negative concentrations to zero (most negative {worst:.3e})",
                RuntimeWarning,
                stacklevel=2,
            )
        all_v = np.maximum(all_v, 0.0)
    return Trace(c.states, all_t, all_v, tuple(applied))


# ------------------------------------------------------------------ stability


@dataclass(frozen=True, eq=False)
class StabilityReport:
    verdict: str  # stable | unstable | marginal
    max_real_part: float
    eigenvalues: np.ndarray

    @property
    def is_stable(self) -> bool:
        return self.verdict == "stable"


def jacobian(m: Model, params: Mapping[str, float], steady: Sequence[float] | Mapping[str, float]) -> np.ndarray:
    """Central finite-difference Jacobian of the right-hand side."""
    c = compile_rhs(m)
    y = _state_vector(c.states, steady)
    p = c.param_vector(params)
    n = len(y)
    J = np.empty((n, n))
    for k in range(n):
        h = max(1e-6 * abs(y[k]), 1e-18)
        up, dn = y.copy(), y.copy()
        up[k] += h
        dn[k] -= h
        try:
            J[:, k] = (c.f(0.0, up, p) - c.f(0.0, dn, p)) / (2.0 * h)
        except ArithmeticError as exc:
            raise NumericModelError(f"Jacobian column for {c.states[k]} failed: {exc}", state=c.states[k]) from exc
    if not np.all(np.isfinite(J)):
        bad = c.states[int(np.argwhere(~np.isfinite(J))[0][1])]
        raise NumericModelError(f"non-finite Jacobian entries in column {bad}", state=bad)
    return J


def stability_check(
    m: Model, params: Mapping[str, float], steady: Sequence[float] | Mapping[str, float]
) -> StabilityReport:
    """Classify a steady state by linearization.

    Stable means every eigenvalue real part is below the negative edge of
    the +/-1e-12 dead band; marginal means the largest real part falls
    inside the band, where the finite-difference linearization cannot
    honestly tell decay from neutrality.
    """
    J = jacobian(m, params, steady)
    try:
        eig = np.linalg.eigvals(J)
    except np.linalg.LinAlgError as exc:
        raise NumericModelError(f"eigenvalue computation failed: {exc}") from exc
    mr = float(np.max(eig.real))
    if mr < -STABLE_EIG_BAND:
        verdict = "stable"
    elif mr <= STABLE_EIG_BAND:
        verdict = "marginal"
    else:
        verdict = "unstable"
    return StabilityReport(verdict, mr, eig)
