"""Model-file format: directives, normalization, and error positions."""

import pytest

from steadyscan.expr import Const, to_text
from steadyscan.modelfile import (
    DuplicateIdError,
    ModelSyntaxError,
    UndeclaredNameError,
    model_to_text,
    parse_model,
)

TOY = """modelfile v1
model toy
unknown a in [0.0, 2.0]
unknown b in [1.0, 4.0] scale log tags data,reliability:low
state S
ode S = a - b * S
constraint band: a + b in [1.0, 3.0]
constraint ord: a < b
derive band -> cap_a: a < 3.0
event kick at 5.0: a = 0.0
stl always[0, 10] (S > 0)
option t_end 10
"""


def test_toy_parses():
    m = parse_model(TOY)
    assert m.name == "toy"
    assert [u.name for u in m.unknowns] == ["a", "b"]
    assert m.unknowns[1].scale == "log"
    assert m.unknowns[1].tags == frozenset({"data", "reliability:low"})
    assert m.states == ("S",)
    assert to_text(m.odes["S"]) == "a - b * S"
    assert m.stl == "always[0, 10] (S > 0)"
    assert m.options["t_end"] == "10"
    assert m.events[0].label == "kick"
    assert m.events[0].assignments == (("a", Const(0.0)),)


def test_membership_normalizes_to_bound_pair():
    m = parse_model(TOY)
    cids = [(c.cid, c.rel) for c in m.constraints]
    assert ("band:lo", ">=") in cids
    assert ("band:hi", "<=") in cids
    assert ("ord", "<") in cids


def test_derive_attaches_redundant_child():
    m = parse_model(TOY)
    parent = next(c for c in m.constraints if c.cid.startswith("band"))
    (child,) = parent.derived
    assert child.cid == "cap_a"
    assert child.is_redundant
    assert child.rel == "<" and child.rhs == Const(3.0)


def test_domain_box_matches_declarations():
    box = parse_model(TOY).domain_box()
    assert box["a"].lo == 0.0 and box["a"].hi == 2.0
    assert box["b"].lo == 1.0 and box["b"].hi == 4.0


def test_round_trip_through_text():
    m = parse_model(TOY)
    again = parse_model(model_to_text(m))
    assert again.unknowns == m.unknowns
    assert [c.cid for c in again.constraints] == [c.cid for c in m.constraints]
    assert again.stl == m.stl and again.options == m.options


def test_derive_steady_state_substitutes_eq_names():
    text = """modelfile v1
unknown k in [0.1, 1.0]
unknown S^eq in [0.0, 10.0]
state S
ode S = 1.0 - k * S
derive-steady-state
"""
    m = parse_model(text)
    ss = next(c for c in m.constraints if c.cid == "ss_S")
    assert "steady-state" in ss.tags
    assert ss.rel == "=" and ss.rhs == Const(0.0)
    assert to_text(ss.lhs) == "1.0 - k * S^eq"


BAD_CASES = [
    ("unknown a in [0.0, 2.0]", ModelSyntaxError),  # missing header
    ("modelfile v1\nwat a in [0, 1]", ModelSyntaxError),
    ("modelfile v1\nunknown a in [2.0, 1.0]", ModelSyntaxError),
    ("modelfile v1\nunknown a in [0.0, 1.0]\nunknown a in [0.0, 1.0]", DuplicateIdError),
    ("modelfile v1\nunknown a in [-1.0, 1.0] scale log", ModelSyntaxError),
    ("modelfile v1\nunknown a in [0.0, 1.0]\nconstraint c: a < b", UndeclaredNameError),
    ("modelfile v1\nstate S\nstate S", DuplicateIdError),
    ("modelfile v1\nunknown a in [0.0, 1.0]\nstate S\node S = a\node S = a", DuplicateIdError),
    ("modelfile v1\nstate S\node T = 1.0", UndeclaredNameError),
    ("modelfile v1\nunknown a in [0.0, 1.0]\nconstraint c: a < 1\nconstraint c: a < 2", DuplicateIdError),
    ("modelfile v1\nunknown a in [0.0, 1.0]\nevent e at 1.0: z = 0.0", UndeclaredNameError),
    ("modelfile v1\nunknown a in [0.0, 1.0]\nderive x -> y: a in [0.0, 1.0]", ModelSyntaxError),
    ("modelfile v1\nstl a\nstl b", DuplicateIdError),
    ("modelfile v1\noption t_end", ModelSyntaxError),
]


@pytest.mark.parametrize("text,err", BAD_CASES)
def test_rejects_malformed(text, err):
    with pytest.raises(err):
        parse_model(text)


def test_error_carries_line_number():
    with pytest.raises(ModelSyntaxError) as e:
        parse_model("modelfile v1\nmodel t\nunknown a in [0.0 1.0]")
    assert e.value.line == 3


def test_comments_and_blank_lines_ignored():
    m = parse_model("modelfile v1\n\n# a comment\nmodel c  # trailing\nunknown a in [0.0, 1.0]\n")
    assert m.name == "c"
    assert len(m.unknowns) == 1
