"""Sub-task state abstractions derived from influence statements.

The relevant literals for a sub-task are collected backwards from the reward
nodes ``R`` and ``Ro``: whenever a statement's consequent matches something
already relevant, its antecedents become relevant too. Matching is done on
argument roles (sub-task parameter, constant, or free variable) so the result
does not depend on any particular problem instance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dfoci import DFociStatement, DfociValidationError, DomainDecl, Special, validate
from .logic import Atom, Literal, Substitution, is_variable, substitute_atom, unify_atom

FIXPOINT = "fixpoint"


class UnknownSubtaskError(KeyError):
    pass


@dataclass(frozen=True)
class AbstractionSchema:
    subtask: Atom
    relevant_templates: frozenset
    include_action: bool
    depth_used: Union[int, str]

    @property
    def params(self) -> tuple:
        return self.subtask.args

    def render(self) -> str:
        """Canonical text block: header line, then one template per line."""
        lines = [f"subtask {self.subtask}", f"depth {self.depth_used}", f"action {str(self.include_action).lower()}"]
        lines += sorted(str(t) for t in self.relevant_templates)
        return "\n".join(lines) + "\n"

    def sorted_templates(self) -> list:
        return sorted(self.relevant_templates, key=lambda t: (t.predicate, t.args))


@dataclass(frozen=True)
class AbstractState:
    facts: tuple  # sorted ground atoms over canonical constants

    @property
    def key(self) -> str:
        return "{" + ",".join(str(a) for a in self.facts) + "}"

    def __str__(self) -> str:
        return self.key


# Roles: ("p", k) sub-task parameter k, ("c", name) constant, ("x", name)
# statement-local free variable. Normalized templates use ("v", i) for the
# i-th distinct free variable so that alpha-variants coincide.


def _roles(args: tuple, params: dict) -> tuple:
    out = []
    for t in args:
        if t in params:
            out.append(("p", params[t]))
        elif is_variable(t):
            out.append(("x", t))
        else:
            out.append(("c", t))
    return tuple(out)


def _match(stmt_args: tuple, tmpl_args: tuple) -> Optional[dict]:
    binding: dict = {}
    for s, t in zip(stmt_args, tmpl_args):
        if s[0] == "p":
            if t[0] == "p" and t[1] != s[1]:
                return None
        elif s[0] == "c":
            if t[0] == "c" and t[1] != s[1]:
                return None
        else:
            eff = t if t[0] in "pc" else None
            if s[1] not in binding or binding[s[1]] is None:
                binding[s[1]] = eff
            elif eff is not None:
                b = binding[s[1]]
                if b[0] == eff[0] and b[1] != eff[1]:
                    return None
    return binding


def _normalize(predicate: str, roles: tuple) -> tuple:
    """Return (key, display_names) with free variables numbered by first occurrence."""
    order: dict = {}
    key_args = []
    names = []
    for r in roles:
        if r[0] == "x":
            idx = order.setdefault(r[1], len(order))
            key_args.append(("v", idx))
            names.append(r[1])
        else:
            key_args.append(r)
            names.append(None)
    return (predicate, tuple(key_args)), tuple(names)


def _display(key: tuple, names: tuple, params: tuple) -> Literal:
    predicate, args = key
    used = set(params)
    chosen: dict = {}
    out = []
    for role, name in zip(args, names):
        if role[0] == "p":
            out.append(params[role[1]])
        elif role[0] == "c":
            out.append(role[1])
        else:
            if role[1] not in chosen:
                candidate = name
                n = 1
                while candidate in used:
                    candidate = f"{name}{n}"
                    n += 1
                chosen[role[1]] = candidate
                used.add(candidate)
            out.append(chosen[role[1]])
    return Literal(Atom(predicate, tuple(out)), True)


def _head_params(decl: DomainDecl, subtask: str) -> tuple:
    heads = sorted(
        s.subtask.args for s in decl.statements if s.subtask is not None and s.subtask.predicate == subtask
    )
    if heads:
        return heads[0]
    n = decl.subtasks[subtask]
    return ("P",) if n == 1 else tuple(f"P{i + 1}" for i in range(n))


def relevant_closure(decl: DomainDecl, subtask: str, depth: Union[int, str, None] = FIXPOINT) -> AbstractionSchema:
    """Collect every literal that transitively influences ``R`` or ``Ro`` for ``subtask``.

    ``depth`` bounds the number of backward sweeps; ``"fixpoint"`` (or None)
    runs until nothing new is added. Only statements whose head names
    ``subtask`` and statements without a head take part.
    """
    diags = validate(decl)
    if diags:
        raise DfociValidationError(diags)
    if subtask not in decl.subtasks:
        raise UnknownSubtaskError(subtask)
    if depth is None:
        depth = FIXPOINT
    if depth != FIXPOINT and (not isinstance(depth, int) or depth < 0):
        raise ValueError(f"depth must be a non-negative int or {FIXPOINT!r}, got {depth!r}")

    params = _head_params(decl, subtask)
    compiled = []
    for stmt in decl.statements:
        if stmt.subtask is not None and stmt.subtask.predicate != subtask:
            continue
        pmap = {v: k for k, v in enumerate(stmt.subtask.args)} if stmt.subtask is not None else {}
        compiled.append((stmt, pmap))

    specials = {Special.TASK_REWARD, Special.OPTION_REWARD}
    templates: dict = {}  # normalized key -> display literal

    def fire(stmt: DFociStatement, pmap: dict, binding: dict, new_specials: set, new_templates: dict):
        for item in stmt.antecedent:
            if isinstance(item, Special):
                new_specials.add(item)
                continue
            roles = tuple(
                (binding.get(r[1]) or r) if r[0] == "x" else r for r in _roles(item.args, pmap)
            )
            key, names = _normalize(item.predicate, roles)
            lit = _display(key, names, params)
            prev = new_templates.get(key)
            if prev is None or str(lit) < str(prev):
                new_templates[key] = lit

    sweeps = 0
    stable = False
    while depth == FIXPOINT or sweeps < depth:
        new_specials = set(specials)
        new_templates = dict(templates)
        for stmt, pmap in compiled:
            cons = stmt.consequent
            if isinstance(cons, Special):
                if cons in specials:
                    fire(stmt, pmap, {}, new_specials, new_templates)
                continue
            cons_roles = _roles(cons.args, pmap)
            for (pred, targs) in list(templates):
                if pred != cons.predicate or len(targs) != len(cons_roles):
                    continue
                binding = _match(cons_roles, targs)
                if binding is not None:
                    fire(stmt, pmap, binding, new_specials, new_templates)
        sweeps += 1
        if new_specials == specials and new_templates.keys() == templates.keys():
            templates = new_templates
            stable = True
            break
        specials, templates = new_specials, new_templates

    used: Union[int, str] = FIXPOINT if stable else sweeps
    return AbstractionSchema(
        subtask=Atom(subtask, params),
        relevant_templates=frozenset(templates.values()),
        include_action=Special.ACTION in specials,
        depth_used=used,
    )


def _check_grounding(schema: AbstractionSchema, grounding: Substitution) -> None:
    missing = [p for p in schema.params if p not in grounding]
    extra = [v for v in grounding if v not in schema.params]
    if missing or extra:
        raise ValueError(
            f"grounding for {schema.subtask} must bind exactly {list(schema.params)}; "
            f"missing {missing}, unexpected {extra}"
        )
    for v, c in grounding.items():
        if is_variable(c):
            raise ValueError(f"grounding binds {v} to non-constant {c!r}")


def _patterns(schema: AbstractionSchema, grounding: Substitution) -> dict:
    by_pred: dict = {}
    for t in schema.relevant_templates:
        by_pred.setdefault(t.predicate, []).append(substitute_atom(t.atom, grounding))
    return by_pred


def _relevant(fact: Atom, patterns: dict) -> bool:
    return any(unify_atom(p, fact) is not None for p in patterns.get(fact.predicate, ()))


def abstract_state(schema: AbstractionSchema, state: Iterable[Atom], grounding: Substitution) -> AbstractState:
    """Project ``state`` onto the schema and rename parameter constants to ``argK``."""
    _check_grounding(schema, grounding)
    patterns = _patterns(schema, grounding)
    rename = {grounding[p]: f"arg{k}" for k, p in enumerate(schema.params)}
    kept = (
        Atom(f.predicate, tuple(rename.get(t, t) for t in f.args))
        for f in state
        if _relevant(f, patterns)
    )
    return AbstractState(tuple(sorted(kept)))


def partition(schema: AbstractionSchema, atoms: Iterable[Atom], grounding: Substitution) -> tuple:
    """Split an atom universe into relevant (X) and irrelevant (Y) atoms."""
    _check_grounding(schema, grounding)
    patterns = _patterns(schema, grounding)
    x, y = set(), set()
    for a in atoms:
        (x if _relevant(a, patterns) else y).add(a)
    return frozenset(x), frozenset(y)


class RelevanceAbstraction(BaseEstimator):
    """Estimator-style wrapper: ``fit`` derives the schema, ``transform`` projects states.

    Parameters
    ----------
    subtask : str
        Name of the sub-task whose abstraction is derived.
    depth : int or "fixpoint"
        Number of backward closure sweeps.
    """

    def __init__(self, subtask: str = "", depth: Union[int, str] = FIXPOINT):
        self.subtask = subtask
        self.depth = depth

    def fit(self, decl: DomainDecl, y=None):
        self.schema_ = relevant_closure(decl, self.subtask, self.depth)
        self._cache = {}
        return self

    def abstract(self, state, grounding: Substitution) -> AbstractState:
        check_is_fitted(self, "schema_")
        key = (state, tuple(sorted(grounding.items())))
        out = self._cache.get(key)
        if out is None:
            out = self._cache[key] = abstract_state(self.schema_, state, grounding)
        return out

    def transform(self, states, grounding: Substitution) -> list:
        return [self.abstract(s, grounding) for s in states]

    def partition(self, atoms, grounding: Substitution) -> tuple:
        check_is_fitted(self, "schema_")
        return partition(self.schema_, atoms, grounding)
