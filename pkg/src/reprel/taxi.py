"""Relational Taxi as a goal-directed relational MDP.

States are frozensets of ground atoms over the predicates ``taxi-at/1``,
``at/2``, ``in-taxi/1``, ``dest/2`` and ``wall/2``. Cells are named ``lXY``
with ``x`` growing east and ``y`` growing north.

Instance files are line oriented::

    grid 5 5
    wall 1 4 east              # blocks l14 <-> l24
    depot R 0 4
    taxi random                # or: taxi at l22
    passenger p1 at random dest random
    goal deliver p1            # or: goal at(p1,l40), ...
    max-steps 500
    gamma 0.99

``random`` for a passenger picks a depot; for the taxi, any cell.
"""
from __future__ import annotations

import itertools
import random
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

from .dfoci import Special, parse_statement
from .logic import Atom, Literal, State, goal_satisfied

ACTIONS = ("move-north", "move-south", "move-east", "move-west", "pickup", "dropoff")
MOVES = {
    "move-north": ("north", 0, 1),
    "move-south": ("south", 0, -1),
    "move-east": ("east", 1, 0),
    "move-west": ("west", -1, 0),
}
OPPOSITE = {"north": "south", "south": "north", "east": "west", "west": "east"}

STEP_REWARD = -1.0
ILLEGAL_PENALTY = -10.0
DELIVERY_BONUS = 20.0


class InstanceError(ValueError):
    pass


class StateBudgetExceeded(RuntimeError):
    pass


def cell(x: int, y: int) -> str:
    return f"l{x}{y}"


def coords(name: str) -> tuple:
    m = re.fullmatch(r"l(\d)(\d)", name)
    if m is None:
        raise InstanceError(f"bad cell name {name!r}")
    return int(m.group(1)), int(m.group(2))


@dataclass(frozen=True)
class GrmdpSpec:
    actions: tuple
    gamma: float
    goal_family: str
    max_episode_steps: int

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.actions:
            raise ValueError("action list is empty")
        if self.max_episode_steps <= 0:
            raise ValueError("max_episode_steps must be positive")


@dataclass(frozen=True)
class Passenger:
    name: str
    start: Optional[str]  # None = random depot
    dest: Optional[str]


@dataclass
class ProblemInstance:
    width: int
    height: int
    walls: frozenset = frozenset()  # (cell, direction) pairs, both sides included
    depots: dict = field(default_factory=dict)
    taxi: Optional[str] = None  # None = random cell
    passengers: tuple = ()
    goal_deliver: tuple = ()  # passengers whose delivery is the goal
    goal_literals: frozenset = frozenset()
    max_steps: int = 500
    gamma: float = 0.99
    name: str = ""

    def __post_init__(self):
        self.validate()

    # -- structure ---------------------------------------------------------

    @property
    def cells(self) -> list:
        return [cell(x, y) for y in range(self.height) for x in range(self.width)]

    @property
    def passenger_names(self) -> list:
        return [p.name for p in self.passengers]

    @property
    def objects(self) -> dict:
        return {"passengers": self.passenger_names, "locations": self.cells}

    @property
    def randomized(self) -> bool:
        return self.taxi is None or any(p.start is None or p.dest is None for p in self.passengers)

    def validate(self) -> None:
        if not (1 <= self.width <= 10 and 1 <= self.height <= 10):
            raise InstanceError("grid must be between 1x1 and 10x10")
        cells = set(self.cells)
        for c, d in self.walls:
            if c not in cells or d not in OPPOSITE:
                raise InstanceError(f"bad wall {c} {d}")
        for n, c in self.depots.items():
            if c not in cells:
                raise InstanceError(f"depot {n} outside grid")
        if self.taxi is not None and self.taxi not in cells:
            raise InstanceError(f"taxi start {self.taxi} outside grid")
        names = self.passenger_names
        if len(set(names)) != len(names):
            raise InstanceError("duplicate passenger names")
        for p in self.passengers:
            for c in (p.start, p.dest):
                if c is not None and c not in cells:
                    raise InstanceError(f"passenger {p.name}: cell {c} outside grid")
            if (p.start is None or p.dest is None) and len(self.depots) < 2:
                raise InstanceError("random passenger placement needs at least two depots")
            if p.start is not None and p.start == p.dest:
                raise InstanceError(f"passenger {p.name} starts at its destination")
        fixed_starts = [p.start for p in self.passengers if p.start is not None]
        if len(set(fixed_starts)) != len(fixed_starts):
            raise InstanceError("two passengers share a start cell")
        for n in self.goal_deliver:
            if n not in names:
                raise InstanceError(f"goal mentions unknown passenger {n}")
        if self.max_steps <= 0:
            raise InstanceError("max-steps must be positive")
        if not 0 < self.gamma <= 1:
            raise InstanceError("gamma must lie in (0, 1]")

    def wall_facts(self) -> frozenset:
        return frozenset(Atom("wall", (c, d)) for c, d in self.walls)

    def atom_universe(self) -> frozenset:
        """All ground atoms any state of this instance can contain."""
        atoms = set(self.wall_facts())
        atoms.update(Atom("taxi-at", (c,)) for c in self.cells)
        for p in self.passenger_names:
            atoms.add(Atom("in-taxi", (p,)))
            atoms.update(Atom("at", (p, c)) for c in self.cells)
            atoms.update(Atom("dest", (p, c)) for c in self.cells)
        return frozenset(atoms)

    # -- placements --------------------------------------------------------

    def _build(self, taxi: str, placed: list) -> State:
        facts = set(self.wall_facts())
        facts.add(Atom("taxi-at", (taxi,)))
        for p, (start, dest) in zip(self.passengers, placed):
            facts.add(Atom("at", (p.name, start)))
            facts.add(Atom("dest", (p.name, dest)))
        return frozenset(facts)

    def _placements(self):
        depots = sorted(set(self.depots.values()))
        options = []
        for p in self.passengers:
            starts = [p.start] if p.start is not None else depots
            dests = [p.dest] if p.dest is not None else depots
            options.append([(s, d) for s in starts for d in dests if s != d])
        for combo in itertools.product(*options):
            starts = [s for s, _ in combo]
            if len(set(starts)) == len(starts):
                yield list(combo)

    def initial_states(self) -> list:
        """Support of the initial-state distribution, in a stable order."""
        taxis = [self.taxi] if self.taxi is not None else self.cells
        states = {self._build(t, pl) for t in taxis for pl in self._placements()}
        if not states:
            raise InstanceError("no valid initial placement exists")
        return sorted(states, key=lambda s: sorted(s))

    def sample_state(self, seed: int) -> State:
        rng = random.Random(seed)
        taxi = self.taxi if self.taxi is not None else rng.choice(self.cells)
        depots = sorted(set(self.depots.values()))
        taken = {p.start for p in self.passengers if p.start is not None}
        placed = []
        for p in self.passengers:
            start = p.start
            if start is None:
                free = [c for c in depots if c not in taken and c != p.dest]
                if not free:
                    raise InstanceError(f"no free depot for passenger {p.name}")
                start = rng.choice(free)
                taken.add(start)
            dest = p.dest if p.dest is not None else rng.choice([c for c in depots if c != start])
            placed.append((start, dest))
        return self._build(taxi, placed)

    def goal_for(self, state: State) -> frozenset:
        """Ground goal of the episode that starts (or continues) in ``state``."""
        lits = set(self.goal_literals)
        for f in state:
            if f.predicate == "dest" and f.args[0] in self.goal_deliver:
                lits.add(Literal(Atom("at", f.args), True))
        return frozenset(lits)


def parse_instance(text: str, name: str = "") -> ProblemInstance:
    kw: dict = {"walls": set(), "depots": {}, "passengers": [], "goal_deliver": (), "goal_literals": frozenset()}
    grid = None
    taxi_line = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            head = tok[0]
            if head == "grid":
                grid = (int(tok[1]), int(tok[2]))
                kw["width"], kw["height"] = grid
            elif head == "wall":
                x, y, d = int(tok[1]), int(tok[2]), tok[3]
                if d not in OPPOSITE:
                    raise InstanceError(f"unknown direction {d!r}")
                _, dx, dy = MOVES[f"move-{d}"]
                kw["walls"].add((cell(x, y), d))
                kw["walls"].add((cell(x + dx, y + dy), OPPOSITE[d]))
            elif head == "depot":
                kw["depots"][tok[1]] = cell(int(tok[2]), int(tok[3]))
            elif head == "taxi":
                taxi_line = True
                if tok[1] == "random":
                    kw["taxi"] = None
                elif tok[1] == "at":
                    kw["taxi"] = tok[2]
                else:
                    raise InstanceError("expected 'taxi random' or 'taxi at <cell>'")
            elif head == "passenger":
                if tok[2] != "at" or tok[4] != "dest" or len(tok) != 6:
                    raise InstanceError("expected 'passenger <name> at <cell> dest <cell>'")
                kw["passengers"].append((tok[1], tok[3], tok[5]))
            elif head == "goal":
                if tok[1] == "deliver":
                    kw["goal_deliver"] = tuple(tok[2:])
                else:
                    kw["goal_literals"] = frozenset(_parse_literals(line[len("goal"):]))
            elif head == "max-steps":
                kw["max_steps"] = int(tok[1])
            elif head == "gamma":
                kw["gamma"] = float(tok[1])
            else:
                raise InstanceError(f"unknown directive {head!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, InstanceError):
                raise InstanceError(f"line {lineno}: {exc}") from None
            raise InstanceError(f"line {lineno}: malformed {line!r}") from None
    if grid is None:
        raise InstanceError("missing 'grid' line")
    if not taxi_line:
        raise InstanceError("missing 'taxi' line")

    def resolve(token):
        if token == "random":
            return None
        return kw["depots"].get(token, token)

    kw["passengers"] = tuple(Passenger(n, resolve(s), resolve(d)) for n, s, d in kw["passengers"])
    kw["walls"] = frozenset(kw["walls"])
    if kw.get("taxi") is not None:
        kw["taxi"] = resolve(kw["taxi"])
    return ProblemInstance(name=name, **kw)


def _parse_literals(text: str) -> list:
    stmt = parse_statement("{" + text.strip() + "} -> R")
    lits = [i for i in stmt.antecedent if not isinstance(i, Special)]
    for lit in lits:
        if not lit.is_ground:
            raise InstanceError(f"goal literal {lit} is not ground")
    return lits


def load_instance(path) -> ProblemInstance:
    p = Path(path)
    return parse_instance(p.read_text(encoding="utf-8"), name=p.stem)


class StepResult(NamedTuple):
    next_state: State
    reward: float
    done: bool
    info: dict


class Enumeration(NamedTuple):
    states: list
    transitions: dict  # (state index, action) -> (next index, reward, done)
    initial: list  # indices of initial states
    terminal: frozenset  # indices of goal (absorbing) states


class TaxiEnv:
    """Deterministic Taxi dynamics over relational states.

    ``step`` is a pure function of ``(state, action, steps_taken)``; transitions
    are memoised because rollouts revisit the same states constantly.
    """

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.spec = GrmdpSpec(
            actions=ACTIONS,
            gamma=instance.gamma,
            goal_family="deliver passengers to their destination cells",
            max_episode_steps=instance.max_steps,
        )
        self._memo: dict = {}
        self._goal_memo: dict = {}

    def available_actions(self) -> list:
        return list(self.spec.actions)

    def reset(self, seed: int = 0) -> State:
        if not self.instance.randomized:
            return self.instance.initial_states()[0]
        return self.instance.sample_state(seed)

    def goal(self, state: State) -> frozenset:
        key = frozenset(f for f in state if f.predicate == "dest")
        g = self._goal_memo.get(key)
        if g is None:
            g = self._goal_memo[key] = self.instance.goal_for(state)
        return g

    def transition(self, state: State, action: str) -> tuple:
        """Return ``(next_state, reward, illegal)`` ignoring the step budget."""
        key = (state, action)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._memo[key] = self._transition(state, action)
        return hit

    def _transition(self, state: State, action: str) -> tuple:
        if action not in ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        taxi = None
        carried = None
        at: dict = {}
        dest: dict = {}
        for f in state:
            p = f.predicate
            if p == "taxi-at":
                taxi = f.args[0]
            elif p == "in-taxi":
                carried = f.args[0]
            elif p == "at":
                at[f.args[0]] = f.args[1]
            elif p == "dest":
                dest[f.args[0]] = f.args[1]
        if taxi is None:
            raise ValueError("state has no taxi-at fact")

        if action in MOVES:
            direction, dx, dy = MOVES[action]
            x, y = coords(taxi)
            nx, ny = x + dx, y + dy
            inside = 0 <= nx < self.instance.width and 0 <= ny < self.instance.height
            if not inside or Atom("wall", (taxi, direction)) in state:
                return state, STEP_REWARD, False
            return (state - {Atom("taxi-at", (taxi,))}) | {Atom("taxi-at", (cell(nx, ny),))}, STEP_REWARD, False

        if action == "pickup":
            if carried is None:
                here = sorted(p for p, c in at.items() if c == taxi and dest.get(p) != taxi)
                if here:
                    p = here[0]
                    nxt = (state - {Atom("at", (p, taxi))}) | {Atom("in-taxi", (p,))}
                    return nxt, STEP_REWARD, False
            return state, STEP_REWARD + ILLEGAL_PENALTY, True

        # dropoff
        if carried is None:
            return state, STEP_REWARD + ILLEGAL_PENALTY, True
        nxt = (state - {Atom("in-taxi", (carried,))}) | {Atom("at", (carried, taxi))}
        bonus = DELIVERY_BONUS if dest.get(carried) == taxi else 0.0
        return nxt, STEP_REWARD + bonus, False

    def step(self, state: State, action: str, steps_taken: int = 0) -> StepResult:
        nxt, reward, illegal = self.transition(state, action)
        reached = goal_satisfied(nxt, self.goal(nxt))
        truncated = not reached and steps_taken + 1 >= self.spec.max_episode_steps
        return StepResult(nxt, reward, reached or truncated, {"illegal": illegal, "truncated": truncated})

    # -- planning interface ----------------------------------------------------

    @staticmethod
    def planning_state(state: State) -> frozenset:
        """Task-level projection used by the planner (no cell-level taxi position)."""
        dest = {f.args[0]: f.args[1] for f in state if f.predicate == "dest"}
        out = set()
        for f in state:
            if f.predicate == "in-taxi":
                out.add(f)
                out.add(Atom("occupied", ()))
            elif f.predicate == "dest":
                out.add(f)
            elif f.predicate == "at" and dest.get(f.args[0]) == f.args[1]:
                out.add(Atom("delivered", (f.args[0],)))
        return frozenset(out)

    @staticmethod
    def planning_goal(goal, state: State) -> frozenset:
        """Compile ``at(P, dest)`` goal literals into ``delivered(P)``."""
        dest = {f.args[0]: f.args[1] for f in state if f.predicate == "dest"}
        out = set()
        for lit in goal:
            if lit.predicate == "at" and lit.positive and dest.get(lit.args[0]) == lit.args[1]:
                out.add(Literal(Atom("delivered", (lit.args[0],)), True))
            else:
                raise ValueError(f"goal literal {lit} has no planning-level counterpart")
        return frozenset(out)

    # -- exhaustive views --------------------------------------------------------

    def enumerate(self, budget: int = 10**6) -> Enumeration:
        """Reachable state graph from every possible initial state.

        Goal states are absorbing: every action loops with reward 0 and done.
        """
        init = self.instance.initial_states()
        index = {s: i for i, s in enumerate(init)}
        states = list(init)
        transitions = {}
        terminal = set()
        queue = deque(range(len(init)))
        while queue:
            i = queue.popleft()
            s = states[i]
            if goal_satisfied(s, self.goal(s)):
                terminal.add(i)
                for a in ACTIONS:
                    transitions[(i, a)] = (i, 0.0, True)
                continue
            for a in ACTIONS:
                nxt, r, _ = self.transition(s, a)
                j = index.get(nxt)
                if j is None:
                    if len(states) >= budget:
                        raise StateBudgetExceeded(f"more than {budget} reachable states")
                    j = index[nxt] = len(states)
                    states.append(nxt)
                    queue.append(j)
                transitions[(i, a)] = (j, r, goal_satisfied(nxt, self.goal(nxt)))
        return Enumeration(states, transitions, list(range(len(init))), frozenset(terminal))

    def optimal_return(self, state: State) -> float:
        """Undiscounted return of a shortest goal-reaching action sequence."""
        goal = self.goal(state)
        if goal_satisfied(state, goal):
            return 0.0
        parent = {state: None}
        queue = deque([state])
        while queue:
            s = queue.popleft()
            for a in ACTIONS:
                nxt, r, illegal = self.transition(s, a)
                if illegal or nxt in parent:
                    continue
                parent[nxt] = (s, r)
                if goal_satisfied(nxt, goal):
                    total = 0.0
                    node = nxt
                    while parent[node] is not None:
                        node, r = parent[node]
                        total += r
                    return total
                queue.append(nxt)
        raise ValueError("goal unreachable from state")


def check_state(instance: ProblemInstance, state: State) -> list:
    """Return violated well-formedness conditions (empty when the state is valid)."""
    problems = []
    taxis = [f for f in state if f.predicate == "taxi-at"]
    if len(taxis) != 1:
        problems.append(f"expected one taxi-at fact, found {len(taxis)}")
    carried = [f for f in state if f.predicate == "in-taxi"]
    if len(carried) > 1:
        problems.append("more than one passenger in the taxi")
    for p in instance.passenger_names:
        places = [f for f in state if f.predicate == "at" and f.args[0] == p]
        inside = Atom("in-taxi", (p,)) in state
        if len(places) + inside != 1:
            problems.append(f"passenger {p} is not in exactly one place")
    return problems
