"""Command-line front end.

Subcommands compose the workflow: contract a model's search space, pave
it into a box union, explain an inconsistency, sample steady states,
simulate one under its perturbation events, and check the trace against
a temporal-logic spec.  ``pipeline`` runs the whole chain and stops with
the conflict report if propagation proves the model inconsistent.

Exit codes: 0 success, 1 usage or unreadable input, 2 unparseable or
numerically unusable content, 3 model proven inconsistent (conflict
report emitted), 4 sampling budget exhausted before the target count.

Settings resolve flags first, then ``STEADYSCAN_<NAME>`` environment
variables, then model-file options, then built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .explain import ConflictReport, min_conflict_sets, render_report
from .expr import ExprSyntaxError
from .intervals import Box, BoxUnion
from .modelfile import Model, load_model
from .odesim import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    NumericModelError,
    SimulationError,
    Trace,
    simulate,
    stability_check,
)
from .propagate import DEFAULT_TOL, pave, propagate_fixpoint_ex
from .sampler import Solution, sample_steady_states
from .stl import StlError, parse_stl, satisfies

OK, USAGE, PARSE, INCONSISTENT, EXHAUSTED = 0, 1, 2, 3, 4


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    # bad flags are a usage problem (exit 1), not a parse problem (exit 2)
    def error(self, message: str):  # noqa: D102
        self.print_usage(sys.stderr)
        raise _UsageError(message)


# ------------------------------------------------------------------- settings


def _setting(flag, env: str, m: Model | None, cast: Callable, default):
    """Layered lookup: explicit flag, environment, model option, default."""
    if flag is not None:
        return flag
    raw = os.environ.get(f"STEADYSCAN_{env}")
    if raw is not None:
        try:
            return cast(raw)
        except ValueError:
            raise _UsageError(f"STEADYSCAN_{env}={raw!r} is not a valid {cast.__name__}") from None
    if m is not None:
        raw = m.options.get(env.lower())
        if raw is not None:
            return cast(raw)
    return default


def _resolve_model(name: str) -> Model:
    p = Path(name)
    if p.exists():
        return load_model(str(p))
    if "/" not in name and not name.endswith(".model"):
        builtin = resources.files("steadyscan").joinpath("models", f"{name}.model")
        if builtin.is_file():
            return load_model(str(builtin))
    raise FileNotFoundError(f"no model file or built-in model named {name!r}")


def _write(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


# ----------------------------------------------------------------- subcommands


def _print_box(box: Box) -> None:
    width = max((len(n) for n in box.names), default=0)
    for name, iv in zip(box.names, box.intervals):
        print(f"  {name:<{width}}  [{iv.lo!r}, {iv.hi!r}]")


def _emit_conflict_report(m: Model, box: Box, tol: float, json_path: str | None) -> ConflictReport:
    report = min_conflict_sets(m.constraints, box, tol=tol)
    print(render_report(report))
    if json_path:
        _write(json_path, report.to_json())
        print(f"conflict report written to {json_path}")
    return report


def cmd_contract(args) -> int:
    m = _resolve_model(args.model)
    tol = _setting(args.tol, "TOL", m, float, DEFAULT_TOL)
    box, culprit = propagate_fixpoint_ex(m.constraints, m.domain_box(), tol)
    if box.is_empty:
        print(f"model {m.name}: inconsistent (propagation emptied {culprit})")
        _emit_conflict_report(m, m.domain_box(), tol, args.json)
        return INCONSISTENT
    print(f"model {m.name}: contracted box")
    _print_box(box)
    if args.json:
        _write(args.json, json.dumps(box.to_record(), indent=2))
    return OK


def cmd_pave(args) -> int:
    m = _resolve_model(args.model)
    tol = _setting(args.tol, "TOL", m, float, DEFAULT_TOL)
    precision = _setting(args.precision, "PRECISION", m, float, 2.0)
    max_boxes = _setting(args.max_boxes, "MAX_BOXES", m, int, 64)
    jobs = _setting(args.jobs, "JOBS", m, int, 1)
    union = pave(m.constraints, m.domain_box(), precision, max_boxes, tol, jobs)
    if not union.boxes:
        print(f"model {m.name}: inconsistent (empty paving)")
        _emit_conflict_report(m, m.domain_box(), tol, None)
        return INCONSISTENT
    text = union.to_jsonl()
    if args.out:
        _write(args.out, text)
        print(f"{len(union.boxes)} boxes written to {args.out}")
    else:
        sys.stdout.write(text)
    return OK


def cmd_explain(args) -> int:
    m = _resolve_model(args.model)
    tol = _setting(args.tol, "TOL", m, float, DEFAULT_TOL)
    report = _emit_conflict_report(m, m.domain_box(), tol, args.json)
    return INCONSISTENT if report.inconsistent else OK


def _sample(m: Model, union: BoxUnion, args) -> tuple[list[Solution], dict, int]:
    target = _setting(args.target, "TARGET", m, int, 100)
    budget = _setting(args.budget, "BUDGET", m, int, max(20 * target, 1000))
    jobs = _setting(args.jobs, "JOBS", m, int, 1)
    tol = _setting(args.tol, "TOL", m, float, DEFAULT_TOL)
    sols, stats = sample_steady_states(m, union, target=target, budget=budget, seed=args.seed, jobs=jobs, tol=tol)
    payload = asdict(stats)
    payload["target"] = target
    payload["budget"] = budget
    payload["seed"] = args.seed
    return sols, payload, target


def _write_solutions(sols: list[Solution], out: str | None, stats: dict, stats_path: str | None) -> None:
    text = "".join(s.to_json_line() + "\n" for s in sols)
    if out:
        _write(out, text)
        print(f"{len(sols)} solutions written to {out}")
    else:
        sys.stdout.write(text)
    if stats_path:
        _write(stats_path, json.dumps(stats, indent=2, sort_keys=True))


def cmd_sample(args) -> int:
    m = _resolve_model(args.model)
    tol = _setting(args.tol, "TOL", m, float, DEFAULT_TOL)
    if args.boxes:
        union = BoxUnion.from_jsonl(Path(args.boxes).read_text())
    else:
        precision = _setting(args.precision, "PRECISION", m, float, 2.0)
        max_boxes = _setting(args.max_boxes, "MAX_BOXES", m, int, 64)
        union = pave(m.constraints, m.domain_box(), precision, max_boxes, tol)
    if not union.boxes:
        print(f"model {m.name}: inconsistent (empty paving)")
        _emit_conflict_report(m, m.domain_box(), tol, None)
        return INCONSISTENT
    sols, stats, target = _sample(m, union, args)
    _write_solutions(sols, args.out, stats, args.stats)
    if len(sols) < target:
        print(f"budget exhausted: {len(sols)}/{target} solutions", file=sys.stderr)
        return EXHAUSTED
    return OK


def _trace_svg(tr: Trace, path: str | Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(9.0, 5.0))
    for j, name in enumerate(tr.names):
        col = np.where(tr.values[:, j] > 0.0, tr.values[:, j], np.nan)
        ax.plot(tr.times, col, linewidth=1.0, label=name)
    ax.set_yscale("log")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("concentration [M]")
    ax.set_title(title)
    for te, label in tr.events:
        ax.axvline(te, color="black", linestyle=":", linewidth=0.8)
        ax.annotate(label, (te, ax.get_ylim()[1]), fontsize=7, ha="right", va="top")
    ax.legend(fontsize=7, ncol=3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _load_solutions(path: str) -> list[Solution]:
    return [Solution.from_json_line(line) for line in Path(path).read_text().splitlines() if line.strip()]


def _initial_state(m: Model, sol: Solution) -> dict[str, float]:
    return {s: sol.assignment.values[f"{s}^eq"] for s in m.states}


def cmd_simulate(args) -> int:
    m = _resolve_model(args.model)
    sols = _load_solutions(args.solutions)
    if not sols:
        raise _UsageError(f"{args.solutions} holds no solutions")
    if not 0 <= args.index < len(sols):
        raise _UsageError(f"--index {args.index} out of range (0..{len(sols) - 1})")
    sol = sols[args.index]
    rtol = _setting(args.rtol, "RTOL", m, float, DEFAULT_RTOL)
    atol = _setting(args.atol, "ATOL", m, float, DEFAULT_ATOL)
    t_end = _setting(args.t_end, "T_END", m, float, None)
    if t_end is None:
        raise _UsageError("no --t-end given and the model sets no t_end option")
    params = sol.assignment.values
    report = stability_check(m, params, _initial_state(m, sol))
    print(f"steady state {args.index}: {report.verdict} (max Re(eig) = {report.max_real_part:.3e})")
    tr = simulate(m, params, _initial_state(m, sol), t_end=t_end, rtol=rtol, atol=atol)
    out = Path(args.out_dir)
    stem = f"trace_{args.index}"
    _write(out / f"{stem}.csv", tr.to_csv())
    _write(out / f"{stem}.json", tr.to_json())
    _trace_svg(tr, out / f"{stem}.svg", f"{m.name}: solution {args.index}")
    for te, label in tr.events:
        print(f"event {label!r} applied at t = {te:g} s")
    print(f"trace ({len(tr.times)} points) written to {out}/{stem}.csv/.json/.svg")
    return OK


def cmd_check(args) -> int:
    tr = Trace.from_csv(Path(args.trace).read_text())
    if args.stl:
        text = Path(args.stl).read_text().strip()
        hill = 4.0
    elif args.model:
        m = _resolve_model(args.model)
        if not m.stl:
            raise _UsageError(f"model {m.name} embeds no temporal-logic spec")
        text = m.stl
        hill = m.option_float("hill_exponent", 4.0)
    else:
        raise _UsageError("give --stl FILE or a model with an embedded spec")
    formula = parse_stl(text, tr.names, hill_exponent=hill)
    verdict = satisfies(formula, tr)
    flag = " (marginal)" if verdict.marginal else ""
    print(f"satisfied: {verdict.satisfied}{flag}")
    print(f"robustness: {verdict.robustness!r}")
    return OK


def cmd_pipeline(args) -> int:
    m = _resolve_model(args.model)
    out = Path(args.out_dir)
    tol = _setting(args.tol, "TOL", m, float, DEFAULT_TOL)

    box, culprit = propagate_fixpoint_ex(m.constraints, m.domain_box(), tol)
    if box.is_empty:
        print(f"model {m.name}: inconsistent (propagation emptied {culprit})")
        _emit_conflict_report(m, m.domain_box(), tol, str(out / "conflict_report.json"))
        return INCONSISTENT
    print("[1/5] contracted box:")
    _print_box(box)

    precision = _setting(args.precision, "PRECISION", m, float, 2.0)
    max_boxes = _setting(args.max_boxes, "MAX_BOXES", m, int, 64)
    jobs = _setting(args.jobs, "JOBS", m, int, 1)
    union = pave(m.constraints, m.domain_box(), precision, max_boxes, tol, jobs)
    if not union.boxes:
        print(f"model {m.name}: inconsistent (empty paving)")
        _emit_conflict_report(m, m.domain_box(), tol, str(out / "conflict_report.json"))
        return INCONSISTENT
    _write(out / "boxes.jsonl", union.to_jsonl())
    print(f"[2/5] paving: {len(union.boxes)} boxes -> {out}/boxes.jsonl")

    sols, stats, target = _sample(m, union, args)
    _write_solutions(sols, str(out / "solutions.jsonl"), stats, str(out / "stats.json"))
    print(f"[3/5] sampling: {len(sols)}/{target} solutions in {stats['wall_time']:.1f} s")
    if len(sols) < target:
        print(f"budget exhausted: {len(sols)}/{target} solutions", file=sys.stderr)
        return EXHAUSTED
    if not m.states:
        print("[4/5] no dynamics declared; done")
        return OK

    pick, verdict = 0, None
    for i, s in enumerate(sols[:20]):
        report = stability_check(m, s.assignment.values, _initial_state(m, s))
        if report.verdict == "stable":
            pick, verdict = i, report
            break
    if verdict is None:
        print("[4/5] no stable steady state in the first 20 solutions; simulating solution 0")
    else:
        print(f"[4/5] solution {pick} is {verdict.verdict} (max Re(eig) = {verdict.max_real_part:.3e})")
    sol = sols[pick]
    t_end = _setting(args.t_end, "T_END", m, float, None)
    if t_end is None:
        raise _UsageError("no --t-end given and the model sets no t_end option")
    tr = simulate(m, sol.assignment.values, _initial_state(m, sol), t_end=t_end)
    _write(out / "trace.csv", tr.to_csv())
    _write(out / "trace.json", tr.to_json())
    _trace_svg(tr, out / "trace.svg", f"{m.name}: solution {pick}")
    print(f"     trace ({len(tr.times)} points) -> {out}/trace.csv/.json/.svg")

    if m.stl:
        formula = parse_stl(m.stl, m.states, hill_exponent=m.option_float("hill_exponent", 4.0))
        v = satisfies(formula, tr)
        flag = " (marginal)" if v.marginal else ""
        print(f"[5/5] spec satisfied: {v.satisfied}{flag}, robustness {v.robustness!r}")
    else:
        print("[5/5] model embeds no temporal-logic spec; done")
    return OK


# --------------------------------------------------------------------- parser


def _add_model_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("model", help="model file path, or a built-in model name like iron_v2")


def _add_tol(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None, help="propagation convergence tolerance")


def _add_pave_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--precision", type=float, default=None, help="target box width as a fraction of the domain")
    p.add_argument("--max-boxes", type=int, default=None, help="paving size cap")


def _add_sample_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, required=True, help="random seed (required: runs must be replayable)")
    p.add_argument("--target", type=int, default=None, help="number of steady states to collect")
    p.add_argument("--budget", type=int, default=None, help="attempt budget")
    p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="steadyscan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("contract", help="propagate constraints and print the contracted box")
    _add_model_arg(p)
    _add_tol(p)
    p.add_argument("--json", default=None, help="also write the box (or conflict report) as JSON")
    p.set_defaults(fn=cmd_contract)

    p = sub.add_parser("pave", help="cover the feasible set with a union of boxes")
    _add_model_arg(p)
    _add_tol(p)
    _add_pave_args(p)
    p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    p.add_argument("--out", default=None, help="boxes JSONL path (default: stdout)")
    p.set_defaults(fn=cmd_pave)

    p = sub.add_parser("explain", help="diagnose an inconsistent model with minimal conflict sets")
    _add_model_arg(p)
    _add_tol(p)
    p.add_argument("--json", default=None, help="conflict report JSON path")
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("sample", help="draw validated steady states")
    _add_model_arg(p)
    _add_tol(p)
    _add_pave_args(p)
    _add_sample_args(p)
    p.add_argument("--boxes", default=None, help="reuse a paving from this JSONL file")
    p.add_argument("--out", default=None, help="solutions JSONL path (default: stdout)")
    p.add_argument("--stats", default=None, help="search statistics JSON path")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("simulate", help="integrate one sampled steady state under the model's events")
    _add_model_arg(p)
    p.add_argument("--solutions", required=True, help="solutions JSONL from sample")
    p.add_argument("--index", type=int, default=0, help="which solution to simulate")
    p.add_argument("--t-end", type=float, default=None, help="end time in seconds")
    p.add_argument("--rtol", type=float, default=None)
    p.add_argument("--atol", type=float, default=None)
    p.add_argument("--out-dir", default=".", help="directory for trace CSV/JSON/SVG")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("check", help="evaluate a temporal-logic spec on a trace")
    p.add_argument("model", nargs="?", default=None, help="model whose embedded spec to use")
    p.add_argument("--trace", required=True, help="trace CSV from simulate")
    p.add_argument("--stl", default=None, help="spec file (overrides the model's embedded spec)")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("pipeline", help="contract, pave, sample, simulate, and check in one run")
    _add_model_arg(p)
    _add_tol(p)
    _add_pave_args(p)
    _add_sample_args(p)
    p.add_argument("--t-end", type=float, default=None, help="simulation end time in seconds")
    p.add_argument("--out-dir", default="steadyscan_out", help="artifact directory")
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(f"steadyscan: {e}", file=sys.stderr)
        return USAGE
    try:
        return args.fn(args)
    except _UsageError as e:
        print(f"steadyscan: {e}", file=sys.stderr)
        return USAGE
    except FileNotFoundError as e:
        print(f"steadyscan: {e}", file=sys.stderr)
        return USAGE
    except (ExprSyntaxError, StlError, SimulationError, NumericModelError, json.JSONDecodeError, ValueError) as e:
        print(f"steadyscan: {e}", file=sys.stderr)
        return PARSE


if __name__ == "__main__":
    sys.exit(main())
