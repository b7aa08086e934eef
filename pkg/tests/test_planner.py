import pytest

from reprel.logic import atom, pos
from reprel.planner import (
    OperatorSyntaxError, PlanningError, SubtaskOperator, applicable, apply, format_plan,
    parse_operators, plan, plan_for_state,
)


def fs(*facts):
    return frozenset(atom(*f) for f in facts)


def ops_by_name(operators):
    return {op.name: op for op in operators}


def test_applicable_examples(operators):
    ops = ops_by_name(operators)
    assert applicable(ops["pickup"].ground(("p1",)), fs(("at", "p1", "l03")))
    assert not applicable(ops["pickup"].ground(("p1",)), fs(("in-taxi", "p1"), ("occupied",)))
    assert not applicable(ops["drop"].ground(("p1",)), fs(("at", "p1", "l03")))


def test_apply_declared_effects(operators):
    ops = ops_by_name(operators)
    assert apply(ops["pickup"].ground(("p1",)), fs(("at", "p1", "l03"))) == fs(
        ("at", "p1", "l03"), ("in-taxi", "p1"), ("occupied",))
    after = apply(ops["drop"].ground(("p1",)), fs(("in-taxi", "p1"), ("occupied",), ("dest", "p1", "l40")))
    assert after == fs(("dest", "p1", "l40"), ("delivered", "p1"))


def test_apply_rejects_inapplicable(operators):
    with pytest.raises(PlanningError):
        apply(ops_by_name(operators)["drop"].ground(("p1",)), frozenset())


def test_plan_task1(operators):
    steps = plan(fs(("dest", "p1", "l40")), {pos("delivered", "p1")}, operators, ["p1"])
    assert [str(s) for s in steps] == ["pickup(p1)", "drop(p1)"]


def test_plan_task2_lexicographic(operators):
    steps = plan(frozenset(), {pos("delivered", "p1"), pos("delivered", "p2")}, operators, ["p2", "p1"])
    assert [str(s) for s in steps] == ["pickup(p1)", "drop(p1)", "pickup(p2)", "drop(p2)"]


def test_plan_goal_already_true(operators):
    assert plan(fs(("delivered", "p1")), {pos("delivered", "p1")}, operators, ["p1"]) == []


def test_plan_is_sound(operators):
    start = fs(("in-taxi", "p2"), ("occupied",))
    goal = {pos("delivered", "p1"), pos("delivered", "p2")}
    steps = plan(start, goal, operators, ["p1", "p2"])
    assert [str(s) for s in steps] == ["drop(p2)", "pickup(p1)", "drop(p1)"]
    ops = ops_by_name(operators)
    s = start
    for step in steps:
        s = apply(ops[step.predicate].ground(step.args), s)
    assert all(lit.atom in s for lit in goal)


def test_plan_unreachable(operators):
    with pytest.raises(PlanningError):
        plan(frozenset(), {pos("delivered", "p3")}, operators, ["p1"])


def test_plan_node_budget(operators):
    goal = {pos("delivered", f"p{i}") for i in range(4)}
    with pytest.raises(PlanningError, match="budget"):
        plan(frozenset(), goal, operators, [f"p{i}" for i in range(4)], node_budget=5)


def test_plan_for_env_state(task1, task2, operators):
    assert format_plan(plan_for_state(task1, task1.reset(3), operators)) == "pickup(p1)\ndrop(p1)\n"
    assert len(plan_for_state(task2, task2.reset(3), operators)) == 4


def test_termination_conditions(operators):
    ops = ops_by_name(operators)
    assert ops["pickup"].terminated(fs(("in-taxi", "p1")), ("p1",))
    assert ops["drop"].terminated(fs(("at", "p1", "l00"), ("dest", "p1", "l00")), ("p1",))
    assert not ops["drop"].terminated(fs(("at", "p1", "l01"), ("dest", "p1", "l00")), ("p1",))


@pytest.mark.parametrize("text", [
    "operator pickup(P)\n  pre in-taxi(P\nend\n",
    "operator pickup(P)\n  add in-taxi(Q)\nend\n",
    "operator pickup(P)\n  pre in-taxi(P)\n",
    "pre in-taxi(P)\n",
    "operator pickup(P)\n  bogus x\nend\n",
])
def test_operator_syntax_errors(text):
    with pytest.raises(OperatorSyntaxError):
        parse_operators(text)


def test_undeclared_variable_rejected():
    with pytest.raises(OperatorSyntaxError):
        SubtaskOperator("go", ("P",), frozenset([pos("at", "P", "L")]), frozenset(), frozenset())
