"""Forward breadth-first planner over STRIPS-style sub-task operators.

Operator files look like::

    operator pickup(P)
      pre ~in-taxi(P), ~occupied, ~delivered(P)
      add in-taxi(P), occupied
      del
      term in-taxi(P)
    end

``term`` is not used for planning; it is the termination condition of the
RL option that executes the sub-task, evaluated on ground states.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .dfoci import DfociSyntaxError, Special, parse_statement
from .logic import Atom, goal_satisfied, holds, query, substitute, substitute_atom

NODE_BUDGET = 10**6


class PlanningError(RuntimeError):
    pass


class OperatorSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class SubtaskOperator:
    name: str
    params: tuple
    preconditions: frozenset
    add: frozenset
    delete: frozenset
    termination: tuple = ()

    def __post_init__(self):
        declared = set(self.params)
        used = set()
        for lit in self.preconditions:
            used.update(lit.atom.variables())
        for a in itertools.chain(self.add, self.delete):
            used.update(a.variables())
        if not used <= declared:
            raise OperatorSyntaxError(f"operator {self.name}: undeclared variables {sorted(used - declared)}")

    def ground(self, args: tuple) -> "GroundOperator":
        if len(args) != len(self.params):
            raise ValueError(f"{self.name} takes {len(self.params)} arguments")
        theta = dict(zip(self.params, args))
        return GroundOperator(
            step=Atom(self.name, tuple(args)),
            preconditions=frozenset(substitute(l, theta) for l in self.preconditions),
            add=frozenset(substitute_atom(a, theta) for a in self.add),
            delete=frozenset(substitute_atom(a, theta) for a in self.delete),
        )

    def termination_for(self, args: tuple) -> tuple:
        theta = dict(zip(self.params, args))
        return tuple(substitute(l, theta) for l in self.termination)

    def terminated(self, state, args: tuple) -> bool:
        return query(state, self.termination_for(args)) is not None


@dataclass(frozen=True)
class GroundOperator:
    step: Atom
    preconditions: frozenset
    add: frozenset
    delete: frozenset


def applicable(op: GroundOperator, state) -> bool:
    return all(holds(state, lit) for lit in op.preconditions)


def apply(op: GroundOperator, state) -> frozenset:
    if not applicable(op, state):
        raise PlanningError(f"{op.step} is not applicable")
    return (frozenset(state) - op.delete) | op.add


def ground_all(operators: Iterable[SubtaskOperator], objects: Iterable[str]) -> list:
    """Every grounding of every operator, sorted by the printed step name."""
    objs = sorted(objects)
    out = []
    for op in operators:
        for args in itertools.product(objs, repeat=len(op.params)):
            out.append(op.ground(args))
    return sorted(out, key=lambda g: str(g.step))


def plan(initial, goal, operators, objects, node_budget: int = NODE_BUDGET) -> list:
    """Shortest sequence of ground sub-task steps reaching ``goal``.

    Successors are expanded in lexicographic order of step names, so among
    shortest plans the lexicographically smallest one is returned.
    """
    start = frozenset(initial)
    if goal_satisfied(start, goal):
        return []
    grounded = ground_all(operators, objects)
    parent = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for op in grounded:
            if not applicable(op, s):
                continue
            nxt = (s - op.delete) | op.add
            if nxt in parent:
                continue
            parent[nxt] = (s, op.step)
            if goal_satisfied(nxt, goal):
                steps = []
                node = nxt
                while parent[node] is not None:
                    node, step = parent[node]
                    steps.append(step)
                return steps[::-1]
            if len(parent) >= node_budget:
                raise PlanningError(f"node budget of {node_budget} exhausted")
            queue.append(nxt)
    raise PlanningError("goal unreachable")


def parse_operators(text: str) -> list:
    def literals(body: str, lineno: int) -> list:
        out = []
        for part in _split_top(body):
            try:
                (item,) = parse_statement("{" + part + "} -> R").antecedent
            except (DfociSyntaxError, ValueError) as exc:
                raise OperatorSyntaxError(f"line {lineno}: bad literal {part!r}: {exc}") from None
            if isinstance(item, Special):
                raise OperatorSyntaxError(f"line {lineno}: reserved name {item} in operator")
            out.append(item)
        return out

    ops = []
    current: Optional[dict] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        if word == "operator":
            if current is not None:
                raise OperatorSyntaxError(f"line {lineno}: missing 'end'")
            try:
                head = parse_statement(rest.strip() + ": {A} -> R").subtask
            except DfociSyntaxError as exc:
                raise OperatorSyntaxError(f"line {lineno}: bad operator head: {exc}") from None
            current = {"name": head.predicate, "params": head.args, "pre": [], "add": [], "del": [], "term": []}
        elif word in ("pre", "add", "del", "term"):
            if current is None:
                raise OperatorSyntaxError(f"line {lineno}: {word!r} outside an operator")
            lits = literals(rest, lineno)
            if word in ("add", "del") and any(not l.positive for l in lits):
                raise OperatorSyntaxError(f"line {lineno}: effects must be positive atoms")
            current[word].extend(lits)
        elif word == "end":
            if current is None:
                raise OperatorSyntaxError(f"line {lineno}: 'end' without operator")
            ops.append(
                SubtaskOperator(
                    name=current["name"],
                    params=current["params"],
                    preconditions=frozenset(current["pre"]),
                    add=frozenset(l.atom for l in current["add"]),
                    delete=frozenset(l.atom for l in current["del"]),
                    termination=tuple(current["term"]),
                )
            )
            current = None
        else:
            raise OperatorSyntaxError(f"line {lineno}: unknown keyword {word!r}")
    if current is not None:
        raise OperatorSyntaxError("unterminated operator block")
    return ops


def _split_top(body: str) -> list:
    parts, depth, buf = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return [p.strip() for p in parts if p.strip()]


def load_operators(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_operators(fh.read())


def format_plan(steps) -> str:
    return "".join(f"{s}\n" for s in steps)


def plan_for_state(env, state, operators) -> list:
    """Plan from a ground environment state using the env's planning projection."""
    abstract = env.planning_state(state)
    goal = env.planning_goal(env.goal(state), state)
    return plan(abstract, goal, operators, env.instance.passenger_names)
