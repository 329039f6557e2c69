"""Inconsistency diagnosis: smallest constraint-removal repairs.

When ``propagate_fixpoint`` proves a system empty, ``min_conflict_sets``
searches for the smallest sets of constraints whose removal restores a
non-empty contraction.  Candidates are probed level-wise by size, so the
report contains exactly the repairs of minimum cardinality (all of them,
up to ``max_sets``).  ``difficulty_ranking`` orders constraints by how
often they were violated, which is how a modeller spots the suspect
constraint to relax.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .intervals import Box
from .modelfile import Constraint
from .propagate import DEFAULT_TOL, propagate_fixpoint_ex

DEFAULT_MAX_SETS = 16
DEFAULT_TEST_BUDGET = 20_000


@dataclass(frozen=True)
class ConflictReport:
    """Diagnosis of an inconsistent constraint system.

    ``minimal_sets`` holds the minimum-cardinality removal sets, sorted by
    size then lexicographic ids.  ``stats`` counts, per constraint, how many
    candidate subsystems it appeared in (checked) and how often its revision
    emptied the box (violated).  ``truncated`` flags an enumeration cut
    short by ``max_sets`` or the test budget.
    """

    inconsistent: bool
    minimal_sets: tuple[frozenset[str], ...]
    stats: dict[str, dict[str, int]] = field(default_factory=dict)
    truncated: bool = False
    tests_run: int = 0

    def to_json(self, indent: int | None = 2) -> str:
        payload = {
            "inconsistent": self.inconsistent,
            "minimal_sets": [sorted(s) for s in self.minimal_sets],
            "stats": self.stats,
            "truncated": self.truncated,
            "tests_run": self.tests_run,
        }
        return json.dumps(payload, indent=indent)

    @staticmethod
    def from_json(text: str) -> "ConflictReport":
        raw = json.loads(text)
        return ConflictReport(
            inconsistent=raw["inconsistent"],
            minimal_sets=tuple(frozenset(s) for s in raw["minimal_sets"]),
            stats=raw.get("stats", {}),
            truncated=raw.get("truncated", False),
            tests_run=raw.get("tests_run", 0),
        )


def _sorted_sets(found: list[frozenset[str]]) -> tuple[frozenset[str], ...]:
    return tuple(sorted(found, key=lambda s: (len(s), tuple(sorted(s)))))


def min_conflict_sets(
    cs: Sequence[Constraint],
    box: Box,
    max_sets: int = DEFAULT_MAX_SETS,
    tol: float = DEFAULT_TOL,
    test_budget: int = DEFAULT_TEST_BUDGET,
) -> ConflictReport:
    """Find all minimum-cardinality removal sets restoring consistency.

    Probes removal candidates in nondecreasing size; the first size that
    yields any repair is exhausted (up to ``max_sets``) and the search
    stops there, so every reported set is irreducible by construction.
    A consistent input returns an empty, non-inconsistent report.
    """
    stats: dict[str, dict[str, int]] = {c.cid: {"checked": 0, "violated": 0} for c in cs}
    tests = 0

    def run(subset: Sequence[Constraint]) -> bool:
        nonlocal tests
        tests += 1
        out, culprit = propagate_fixpoint_ex(subset, box, tol)
        for c in subset:
            stats[c.cid]["checked"] += 1
        if culprit is not None:
            stats[culprit]["violated"] += 1
        return not out.is_empty

    if run(cs):
        return ConflictReport(False, (), stats, False, tests)

    ids = [c.cid for c in cs]
    by_id = {c.cid: c for c in cs}
    found: list[frozenset[str]] = []
    truncated = False
    for size in range(1, len(ids) + 1):
        for combo in itertools.combinations(ids, size):
            if tests >= test_budget:
                truncated = True
                break
            removed = set(combo)
            rest = [by_id[i] for i in ids if i not in removed]
            if run(rest):
                found.append(frozenset(combo))
                if len(found) >= max_sets:
                    truncated = truncated or _more_at_size(ids, size, found, by_id, box, tol)
                    break
        if found or truncated:
            break
    return ConflictReport(True, _sorted_sets(found), stats, truncated, tests)


def _more_at_size(
    ids: list[str],
    size: int,
    found: list[frozenset[str]],
    by_id: dict[str, Constraint],
    box: Box,
    tol: float,
) -> bool:
    # max_sets was hit mid-level: peek whether another repair of this size exists
    seen = set(map(frozenset, found))
    for combo in itertools.combinations(ids, size):
        fs = frozenset(combo)
        if fs in seen:
            continue
        rest = [by_id[i] for i in ids if i not in fs]
        out, _ = propagate_fixpoint_ex(rest, box, tol)
        if not out.is_empty:
            return True
    return False


# ------------------------------------------------------------------- ranking


def difficulty_table(
    stats: Mapping[str, Mapping[str, int]],
) -> list[tuple[str, int, int, float | None]]:
    """Rows (id, checked, violated, rate) in difficulty order.

    Rate is violated/checked, descending; ties broken by checked count
    descending, then id.  Never-checked constraints sort last with rate
    None, which renderers show as unknown.
    """
    rows = []
    for cid, c in stats.items():
        checked = int(c.get("checked", 0))
        violated = int(c.get("violated", 0))
        rate = (violated / checked) if checked > 0 else None
        rows.append((cid, checked, violated, rate))
    rows.sort(key=lambda r: (r[3] is None, -(r[3] or 0.0), -r[1], r[0]))
    return rows


def difficulty_ranking(stats: Mapping[str, Mapping[str, int]]) -> list[str]:
    """Constraint ids hardest-first by observed violation rate."""
    return [cid for cid, _, _, _ in difficulty_table(stats)]


def render_report(report: ConflictReport) -> str:
    """Human-readable rendering of a ConflictReport for terminal output."""
    lines = []
    if not report.inconsistent:
        lines.append("system is consistent: no constraints need to be lifted")
    else:
        lines.append("system is inconsistent")
        if report.minimal_sets:
            lines.append(f"smallest repairs ({len(report.minimal_sets)} found, size {len(report.minimal_sets[0])}):")
            for s in report.minimal_sets:
                lines.append("  lift {" + ", ".join(sorted(s)) + "}")
        else:
            lines.append("no repair found within budget")
        if report.truncated:
            lines.append("note: enumeration truncated (max_sets or test budget reached)")
    rows = difficulty_table(report.stats)
    if rows:
        lines.append("")
        lines.append(f"{'constraint':<28} {'checked':>8} {'violated':>9} {'rate':>8}")
        for cid, checked, violated, rate in rows:
            shown = f"{rate:.3f}" if rate is not None else "unknown"
            lines.append(f"{cid:<28} {checked:>8} {violated:>9} {shown:>8}")
    return "\n".join(lines) + "\n"
