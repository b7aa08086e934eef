"""Relational vocabulary shared by the whole package.

Terms are plain strings: a name starting with an uppercase letter is a
variable, anything else (lowercase or digit first) is a constant. States are
frozensets of ground atoms evaluated under the closed-world assumption.
"""
from __future__ import annotations

from typing import Iterable, Mapping, NamedTuple, Optional

Term = str
Substitution = Mapping[str, Term]


def is_variable(term: Term) -> bool:
    return term[:1].isupper()


class Atom(NamedTuple):
    predicate: str
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(self.args)})"

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(t) for t in self.args)

    def variables(self) -> tuple:
        return tuple(t for t in self.args if is_variable(t))


class Literal(NamedTuple):
    atom: Atom
    positive: bool = True

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"~{self.atom}"

    @property
    def is_ground(self) -> bool:
        return self.atom.is_ground

    @property
    def predicate(self) -> str:
        return self.atom.predicate

    @property
    def args(self) -> tuple:
        return self.atom.args

    def negate(self) -> "Literal":
        return Literal(self.atom, not self.positive)


State = frozenset  # frozenset[Atom], all ground
Goal = frozenset  # frozenset[Literal], all ground


def atom(predicate: str, *args: Term) -> Atom:
    return Atom(predicate, tuple(args))


def pos(predicate: str, *args: Term) -> Literal:
    return Literal(Atom(predicate, tuple(args)), True)


def neg(predicate: str, *args: Term) -> Literal:
    return Literal(Atom(predicate, tuple(args)), False)


def substitute_atom(a: Atom, theta: Substitution) -> Atom:
    if not theta:
        return a
    return Atom(a.predicate, tuple(theta.get(t, t) if is_variable(t) else t for t in a.args))


def substitute(lit: Literal, theta: Substitution) -> Literal:
    """Replace every variable bound in ``theta``; unbound variables pass through."""
    return Literal(substitute_atom(lit.atom, theta), lit.positive)


def unify_atom(pattern: Atom, ground: Atom, theta: Optional[Substitution] = None) -> Optional[dict]:
    if pattern.predicate != ground.predicate or len(pattern.args) != len(ground.args):
        return None
    out = dict(theta) if theta else {}
    for p, g in zip(pattern.args, ground.args):
        if is_variable(p):
            bound = out.get(p)
            if bound is None:
                out[p] = g
            elif bound != g:
                return None
        elif p != g:
            return None
    return out


def unify(pattern: Literal, ground: Literal) -> Optional[dict]:
    """Match a (possibly first-order) literal against a ground literal.

    Returns the unique substitution making ``pattern`` equal to ``ground``, or
    None when predicate, arity, polarity or a constant position disagree.
    """
    if pattern.positive != ground.positive:
        return None
    return unify_atom(pattern.atom, ground.atom)


def holds(state: State, lit: Literal) -> bool:
    if not lit.is_ground:
        raise ValueError(f"holds() needs a ground literal, got {lit}")
    return (lit.atom in state) == lit.positive


def goal_satisfied(state: State, goal: Iterable[Literal]) -> bool:
    return all(holds(state, lit) for lit in goal)


def query(state: State, literals: Iterable[Literal], theta: Optional[Substitution] = None) -> Optional[dict]:
    """Find one substitution satisfying a conjunction of literals in ``state``.

    Positive literals are matched against facts by backtracking; negative
    literals are checked once all their variables are bound (negation as
    failure). Returns None if the conjunction cannot be satisfied.
    """
    lits = sorted(literals, key=lambda l: not l.positive)
    return _query(state, lits, dict(theta) if theta else {})


def _query(state, lits, theta):
    if not lits:
        return theta
    first, rest = lits[0], lits[1:]
    lit = substitute(first, theta)
    if lit.positive:
        for fact in state:
            if fact.predicate != lit.predicate:
                continue
            ext = unify_atom(lit.atom, fact, theta)
            if ext is not None:
                found = _query(state, rest, ext)
                if found is not None:
                    return found
        return None
    if not lit.is_ground:
        raise ValueError(f"negative literal {lit} has unbound variables")
    return _query(state, rest, theta) if lit.atom not in state else None


def format_state(state: Iterable[Atom]) -> str:
    return "{" + ", ".join(sorted(str(a) for a in state)) + "}"
