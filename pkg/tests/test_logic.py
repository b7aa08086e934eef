import pytest

from reprel.logic import (
    atom, format_state, goal_satisfied, holds, is_variable, neg, pos, query, substitute, unify,
)


def test_is_variable():
    assert is_variable("P") and is_variable("L")
    assert not is_variable("p1") and not is_variable("l03")


@pytest.mark.parametrize("lit, theta, expected", [
    (pos("at", "P", "L"), {"P": "p1"}, pos("at", "p1", "L")),
    (pos("at", "p1", "l03"), {}, pos("at", "p1", "l03")),
    (neg("in-taxi", "P"), {"P": "p2"}, neg("in-taxi", "p2")),
])
def test_substitute(lit, theta, expected):
    assert substitute(lit, theta) == expected


def test_unify():
    assert unify(pos("at", "P", "L"), pos("at", "p1", "l03")) == {"P": "p1", "L": "l03"}
    assert unify(pos("at", "P", "l03"), pos("at", "p1", "l44")) is None
    assert unify(pos("taxi-at", "L"), pos("at", "p1", "l03")) is None


def test_unify_repeated_variable_must_agree():
    assert unify(pos("at", "X", "X"), pos("at", "a", "b")) is None
    assert unify(pos("at", "X", "X"), pos("at", "a", "a")) == {"X": "a"}


def test_unify_polarity_mismatch():
    assert unify(neg("at", "P", "L"), pos("at", "p1", "l03")) is None


def test_holds_closed_world():
    s = frozenset([atom("at", "p1", "l03")])
    assert holds(s, pos("at", "p1", "l03"))
    assert holds(s, neg("in-taxi", "p1"))
    assert not holds(frozenset(), pos("at", "p1", "l03"))


def test_holds_rejects_non_ground():
    with pytest.raises(ValueError):
        holds(frozenset(), pos("at", "P", "l03"))


def test_goal_satisfied():
    s = frozenset([atom("at", "p1", "l40"), atom("dest", "p1", "l40")])
    assert goal_satisfied(s, {pos("at", "p1", "l40")})
    assert not goal_satisfied(frozenset([atom("in-taxi", "p1")]), {pos("at", "p1", "l40")})
    assert goal_satisfied(frozenset([atom("in-taxi", "p1")]), set())


def test_query_joins_and_negation():
    s = frozenset([atom("at", "p1", "l03"), atom("dest", "p1", "l03"), atom("at", "p2", "l11"), atom("dest", "p2", "l00")])
    assert query(s, [pos("at", "P", "L"), pos("dest", "P", "L")]) == {"P": "p1", "L": "l03"}
    assert query(s, [pos("at", "p2", "L"), pos("dest", "p2", "L")]) is None
    assert query(s, [pos("at", "P", "L"), neg("dest", "P", "L")]) == {"P": "p2", "L": "l11"}


def test_format_state_sorted():
    s = frozenset([atom("taxi-at", "l00"), atom("at", "p1", "l03")])
    assert format_state(s) == "{at(p1,l03), taxi-at(l00)}"
