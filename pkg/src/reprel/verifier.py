"""Exhaustive checks of abstraction safety on small enumerated instances.

Two checks are provided. ``check_factorization`` tests the irrelevance
conditions directly: grouping states by their relevant-atom projection, the
projected successor and the reward must not depend on the dropped atoms.
``check_value_equivalence`` builds the quotient MDP over abstract states and
compares optimal values against the ground MDP.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .abstraction import AbstractionSchema, abstract_state, partition, relevant_closure
from .logic import format_state
from .planner import applicable
from .taxi import ACTIONS, DELIVERY_BONUS

VI_TOL = 1e-10
EQUIV_TOL = 1e-8


@dataclass
class GroundMdp:
    """Finite deterministic MDP with transitions ``(i, a) -> (j, reward, done)``."""

    states: list
    actions: tuple
    transition: dict
    gamma: float
    atoms: frozenset = frozenset()

    def __post_init__(self):
        n = len(self.states)
        for i in range(n):
            for a in self.actions:
                if (i, a) not in self.transition:
                    raise ValueError(f"transition missing for state {i}, action {a}")
                j, r, _ = self.transition[(i, a)]
                if not 0 <= j < n or not np.isfinite(r):
                    raise ValueError(f"bad transition from state {i} under {a}")

    def arrays(self):
        n, m = len(self.states), len(self.actions)
        nxt = np.empty((n, m), dtype=np.int64)
        rew = np.empty((n, m))
        done = np.empty((n, m), dtype=bool)
        for (i, a), (j, r, d) in self.transition.items():
            k = self.actions.index(a)
            nxt[i, k], rew[i, k], done[i, k] = j, r, d
        return nxt, rew, done


@dataclass
class ValueTable:
    values: np.ndarray
    residual: float
    sweeps: int
    residual_history: list = field(default_factory=list)

    def __getitem__(self, i):
        return self.values[i]


def value_iteration(mdp: GroundMdp, tol: float = VI_TOL, max_sweeps: int = 1_000_000) -> ValueTable:
    """Synchronous Bellman sweeps from zero until the sup-norm residual is below ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    nxt, rew, done = mdp.arrays()
    cont = mdp.gamma * ~done
    v = np.zeros(len(mdp.states))
    history = []
    for sweep in range(1, max_sweeps + 1):
        new = (rew + cont * v[nxt]).max(axis=1) if len(v) else v
        residual = float(np.max(np.abs(new - v))) if len(v) else 0.0
        history.append(residual)
        v = new
        if residual < tol:
            return ValueTable(v, residual, sweep, history)
    raise RuntimeError(f"value iteration did not reach {tol} in {max_sweeps} sweeps")


def q_values(mdp: GroundMdp, values) -> np.ndarray:
    nxt, rew, done = mdp.arrays()
    return rew + mdp.gamma * ~done * np.asarray(values)[nxt]


# -- building MDPs from the environment ---------------------------------------


def ground_mdp(env) -> GroundMdp:
    """The fully instantiated MDP of an environment's instance."""
    enum = env.enumerate()
    return GroundMdp(
        states=enum.states,
        actions=tuple(env.spec.actions),
        transition=dict(enum.transitions),
        gamma=env.spec.gamma,
        atoms=env.instance.atom_universe(),
    )


def phase_mdp(env, operator, args: tuple, bonus: float = DELIVERY_BONUS) -> GroundMdp:
    """Sub-MDP in which the option for ``operator(args)`` is running.

    States are those reachable from the option's initiation set (ground
    states whose planning projection satisfies the operator's preconditions)
    without passing through its termination condition. The reward is the
    option reward: environment reward plus ``bonus`` when the termination
    condition becomes true. Terminated and goal states are absorbing.
    """
    enum = env.enumerate()
    gop = operator.ground(args)

    def is_end(i):
        s = enum.states[i]
        return i in enum.terminal or operator.terminated(s, args)

    start = [
        i for i, s in enumerate(enum.states)
        if not is_end(i) and applicable(gop, env.planning_state(s))
    ]
    index = {}
    order = []
    for i in start:
        index[i] = len(order)
        order.append(i)
    transition = {}
    k = 0
    while k < len(order):
        i = order[k]
        k += 1
        if is_end(i):
            for a in ACTIONS:
                transition[(index[i], a)] = (index[i], 0.0, True)
            continue
        for a in ACTIONS:
            j, r, done = enum.transitions[(i, a)]
            if j not in index:
                index[j] = len(order)
                order.append(j)
            ends = operator.terminated(enum.states[j], args)
            transition[(index[i], a)] = (index[j], r + (bonus if ends else 0.0), done or ends)
    return GroundMdp(
        states=[enum.states[i] for i in order],
        actions=tuple(ACTIONS),
        transition=transition,
        gamma=env.spec.gamma,
        atoms=env.instance.atom_universe(),
    )


# -- factorization check ----------------------------------------------------------


@dataclass
class Violation:
    state: int
    witness: int
    action: str
    detail: str

    def render(self, mdp: GroundMdp) -> str:
        return (
            f"action={self.action} state={format_state(mdp.states[self.state])} "
            f"witness={format_state(mdp.states[self.witness])} {self.detail}"
        )


@dataclass
class FactorizationReport:
    passed: bool
    groups: int
    violations: list

    def lines(self, mdp: GroundMdp, limit: int = 5) -> list:
        return [v.render(mdp) for v in self.violations[:limit]]


def check_factorization(mdp: GroundMdp, X, Y) -> FactorizationReport:
    """Verify that successors' X-part and rewards depend only on (X-part, action).

    In a deterministic MDP this is exactly the product form of the transition
    probabilities plus reward independence from Y.
    """
    X, Y = frozenset(X), frozenset(Y)
    if X & Y:
        raise ValueError("X and Y overlap")
    if mdp.atoms and (X | Y) != mdp.atoms:
        raise ValueError("X and Y do not cover the instance's atoms")
    project = [s & X for s in mdp.states]
    groups: dict = {}
    for i, p in enumerate(project):
        groups.setdefault(p, []).append(i)
    violations = []
    for members in groups.values():
        rep = members[0]
        for a in mdp.actions:
            j0, r0, d0 = mdp.transition[(rep, a)]
            for i in members[1:]:
                j, r, d = mdp.transition[(i, a)]
                if project[j] != project[j0]:
                    violations.append(Violation(i, rep, a, "relevant successor differs"))
                elif r != r0:
                    violations.append(Violation(i, rep, a, f"reward {r} vs {r0}"))
                elif d != d0:
                    violations.append(Violation(i, rep, a, "termination differs"))
    violations.sort(key=lambda v: (v.state, v.witness, v.action))
    return FactorizationReport(not violations, len(groups), violations)


# -- quotient / value equivalence ------------------------------------------------


@dataclass
class EquivalenceReport:
    passed: bool
    max_deviation: float
    worst_state: Optional[int]
    abstract_states: int
    well_defined: bool
    factorization: FactorizationReport
    tol: float


def quotient(mdp: GroundMdp, phi: Callable) -> tuple:
    """Quotient MDP over the classes of ``phi``, using the first member as representative."""
    keys = [phi(s) for s in mdp.states]
    cls: dict = {}
    for k in keys:
        cls.setdefault(k, len(cls))
    reps: dict = {}
    for i, k in enumerate(keys):
        reps.setdefault(cls[k], i)
    transition = {}
    for c, i in reps.items():
        for a in mdp.actions:
            j, r, d = mdp.transition[(i, a)]
            transition[(c, a)] = (cls[keys[j]], r, d)
    q = GroundMdp(
        states=sorted(cls, key=cls.get),
        actions=mdp.actions,
        transition=transition,
        gamma=mdp.gamma,
    )
    return q, [cls[k] for k in keys]


def check_value_equivalence(
    mdp: GroundMdp, schema: AbstractionSchema, grounding, tol: float = EQUIV_TOL, vi_tol: float = VI_TOL
) -> EquivalenceReport:
    """Compare optimal values of the ground MDP and its abstraction quotient.

    A failed factorization makes the quotient representative-dependent; the
    values are still computed (first representative) so the report carries a
    concrete deviation, but ``passed`` is False.
    """
    X, Y = partition(schema, mdp.atoms or frozenset().union(*mdp.states), grounding)
    fact = check_factorization(mdp, X, Y)
    q, phi = quotient(mdp, lambda s: abstract_state(schema, s, grounding))
    v_ground = value_iteration(mdp, vi_tol).values
    v_abs = value_iteration(q, vi_tol).values
    dev = np.abs(v_ground - v_abs[np.asarray(phi, dtype=np.int64)])
    worst = int(np.argmax(dev)) if len(dev) else None
    max_dev = float(dev.max()) if len(dev) else 0.0
    return EquivalenceReport(
        passed=fact.passed and max_dev <= tol,
        max_deviation=max_dev,
        worst_state=worst,
        abstract_states=len(q.states),
        well_defined=fact.passed,
        factorization=fact,
        tol=tol,
    )


def identity_check(mdp: GroundMdp, vi_tol: float = VI_TOL) -> float:
    """Max deviation between an MDP and its identity quotient (always 0)."""
    q, phi = quotient(mdp, lambda s: s)
    a = value_iteration(mdp, vi_tol).values
    b = value_iteration(q, vi_tol).values[np.asarray(phi, dtype=np.int64)]
    return float(np.max(np.abs(a - b))) if len(a) else 0.0


# -- report for a whole domain ---------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    lines: list


def verify_domain(env, decl, operators, tol: float = EQUIV_TOL, depth="fixpoint") -> list:
    """Run factorization and value-equivalence for every ground sub-task."""
    results = []
    passengers = env.instance.passenger_names
    for op in sorted(operators, key=lambda o: o.name):
        if op.name not in decl.subtasks:
            results.append(CheckResult(f"schema {op.name}", False, [f"subtask {op.name} not declared in dfoci"]))
            continue
        schema = relevant_closure(decl, op.name, depth)
        for args in itertools.product(passengers, repeat=len(op.params)):
            step = f"{op.name}({','.join(args)})"
            grounding = dict(zip(schema.params, args))
            mdp = phase_mdp(env, op, args)
            X, Y = partition(schema, mdp.atoms, grounding)
            fact = check_factorization(mdp, X, Y)
            lines = [f"states={len(mdp.states)} groups={fact.groups} violations={len(fact.violations)}"]
            lines += ["witness " + w for w in fact.lines(mdp)]
            results.append(CheckResult(f"factorization {step}", fact.passed, lines))
            eq = check_value_equivalence(mdp, schema, grounding, tol)
            lines = [
                f"abstract_states={eq.abstract_states} max_deviation={eq.max_deviation:.3e} "
                f"tol={tol:.1e} well_defined={str(eq.well_defined).lower()}"
            ]
            if eq.worst_state is not None and eq.max_deviation > 0:
                lines.append(f"worst_state {format_state(mdp.states[eq.worst_state])}")
            results.append(CheckResult(f"value-equivalence {step}", eq.passed, lines))
    return results


def format_report(results) -> str:
    out = []
    for r in results:
        out.append(f"{'PASS' if r.passed else 'FAIL'} {r.name}")
        out.extend(f"  {line}" for line in r.lines)
    passed = sum(r.passed for r in results)
    out.append(f"summary passed={passed} failed={len(results) - passed}")
    return "\n".join(out) + "\n"
