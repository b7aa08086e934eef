"""Tabular Q-learning options over abstract states, plus HRL and flat baselines.

Three variants share one training loop:

``reprel``
    one option per sub-task name, keyed by the sub-task's abstract state, so
    ``pickup(p1)`` and ``pickup(p2)`` share a table and the same keys.
``hrl``
    the same planner and options, keyed by the full ground state and the
    option's arguments.
``flat``
    a single table over ground states and primitive actions, no planner.
"""
from __future__ import annotations

import math
import os
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .abstraction import RelevanceAbstraction
from .logic import goal_satisfied
from .planner import PlanningError, plan_for_state
from .taxi import DELIVERY_BONUS, ILLEGAL_PENALTY, STEP_REWARD

VARIANTS = ("reprel", "hrl", "flat")
EVAL_SEED_BASE = 10_000


class QTable:
    """Sparse map ``(state key, action) -> value`` with default 0."""

    def __init__(self, entries: Optional[dict] = None):
        self.entries = dict(entries or {})

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, QTable) and self.entries == other.entries

    def get(self, key: str, action: str) -> float:
        return self.entries.get((key, action), 0.0)

    def set(self, key: str, action: str, value: float) -> None:
        if not math.isfinite(value):
            raise FloatingPointError(f"non-finite Q-value for {key!r}, {action}")
        self.entries[(key, action)] = value

    def max(self, key: str, actions) -> float:
        return max(self.entries.get((key, a), 0.0) for a in actions)

    def copy(self) -> "QTable":
        return QTable(self.entries)

    def dumps(self) -> str:
        return "".join(f"{k}\t{a}\t{v!r}\n" for (k, a), v in sorted(self.entries.items()))

    @classmethod
    def loads(cls, text: str) -> "QTable":
        entries = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected key<TAB>action<TAB>value")
            entries[(parts[0], parts[1])] = float(parts[2])
        return cls(entries)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "QTable":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def select_action(q: QTable, key: str, actions, epsilon: float, rng: random.Random) -> str:
    """Epsilon-greedy choice; greedy ties go to the lexicographically first action."""
    if epsilon > 0 and rng.random() < epsilon:
        return rng.choice(list(actions))
    best, best_v = None, -math.inf
    for a in sorted(actions):
        v = q.get(key, a)
        if v > best_v:
            best, best_v = a, v
    return best


def q_update(q: QTable, key: str, action: str, reward: float, key_next: str, done: bool,
             alpha: float, gamma: float, actions) -> float:
    old = q.get(key, action)
    target = reward if done else reward + gamma * q.max(key_next, actions)
    new = old + alpha * (target - old)
    q.set(key, action, new)
    return new


def sweep_q_learning(mdp, alpha: float = 1.0, tol: float = 1e-10, key=None, max_sweeps: int = 100_000) -> tuple:
    """Q-learning with exhaustive exploration on an enumerated MDP.

    Every (state, action) pair of ``mdp`` (a verifier ``GroundMdp``) receives
    one ``q_update`` per sweep, in state order; sweeps stop once no value
    moved by more than ``tol``. ``key`` maps a state to its table key
    (default: the state index), so abstract keys can be checked too.
    Returns ``(QTable, V)`` where ``V[i]`` is the greedy value of state ``i``.
    """
    q = QTable()
    keys = [str(i) if key is None else key(s) for i, s in enumerate(mdp.states)]
    actions = mdp.actions
    for _ in range(max_sweeps):
        delta = 0.0
        for i, k in enumerate(keys):
            for a in actions:
                j, r, done = mdp.transition[(i, a)]
                old = q.get(k, a)
                new = q_update(q, k, a, r, keys[j], done, alpha, mdp.gamma, actions)
                delta = max(delta, abs(new - old))
        if delta < tol:
            return q, [q.max(k, actions) for k in keys]
    raise RuntimeError(f"Q-learning sweeps did not settle below {tol}")


@dataclass
class TrainConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 10_000
    seeds: tuple = (0, 1, 2, 3, 4)
    total_env_steps: int = 50_000
    eval_every: int = 1000
    eval_episodes: int = 10
    option_budget: int = 100
    option_bonus: float = DELIVERY_BONUS

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("epsilon_decay_steps", "total_env_steps", "eval_every", "eval_episodes", "option_budget"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def epsilon(self, step: int) -> float:
        frac = min(1.0, step / self.epsilon_decay_steps)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for k, v in values.items():
            if k not in kinds:
                continue
            if k == "seeds":
                kw[k] = tuple(int(s) for s in str(v).replace(",", " ").split()) if isinstance(v, str) else tuple(v)
            elif kinds[k] in ("int", int):
                kw[k] = int(v)
            else:
                kw[k] = float(v)
        return cls(**kw)

    def to_text(self) -> str:
        out = []
        for k, v in asdict(self).items():
            out.append(f"{k} = {','.join(map(str, v)) if k == 'seeds' else v}")
        return "\n".join(out) + "\n"


@dataclass
class OptionAgent:
    """Q-learning policy for one sub-task name, shared by all its groundings."""

    subtask_name: str
    qtable: QTable
    operator: object = None
    abstraction: Optional[RelevanceAbstraction] = None
    _keys: dict = field(default_factory=dict, repr=False)
    _ends: dict = field(default_factory=dict, repr=False)

    @property
    def schema(self):
        return None if self.abstraction is None else self.abstraction.schema_

    def key(self, state, args: tuple) -> str:
        k = self._keys.get((state, args))
        if k is None:
            if self.abstraction is not None:
                grounding = dict(zip(self.abstraction.schema_.params, args))
                k = self.abstraction.abstract(state, grounding).key
            else:
                k = _ground_key(state) + "@" + ",".join(args)
            self._keys[(state, args)] = k
        return k

    def terminated(self, state, args: tuple) -> bool:
        hit = self._ends.get((state, args))
        if hit is None:
            hit = self._ends[(state, args)] = self.operator.terminated(state, args)
        return hit


_GROUND_KEYS: dict = {}


def _ground_key(state) -> str:
    k = _GROUND_KEYS.get(state)
    if k is None:
        k = _GROUND_KEYS[state] = "{" + ",".join(sorted(str(a) for a in state)) + "}"
    return k


def make_agents(variant: str, decl, operators, tables: Optional[dict] = None) -> dict:
    """Fresh (or table-initialised) agents for a variant, keyed by sub-task name."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    tables = tables or {}
    if variant == "flat":
        return {"flat": OptionAgent("flat", tables.get("flat", QTable()).copy())}
    agents = {}
    for op in operators:
        abstraction = RelevanceAbstraction(op.name).fit(decl) if variant == "reprel" else None
        agents[op.name] = OptionAgent(op.name, tables.get(op.name, QTable()).copy(), op, abstraction)
    return agents


class _BudgetReached(Exception):
    pass


class EpisodeRunner:
    """Runs training and greedy episodes for one seed of one variant."""

    def __init__(self, variant: str, env, operators, agents: dict, config: TrainConfig, rng: random.Random):
        self.variant = variant
        self.env = env
        self.operators = {op.name: op for op in operators}
        self.operator_list = list(operators)
        self.agents = agents
        self.config = config
        self.rng = rng
        self.actions = tuple(env.spec.actions)
        self.steps = 0  # learning steps so far
        self.on_step = None
        self.last_state = None  # final state of the latest episode
        max_r = abs(STEP_REWARD) + abs(ILLEGAL_PENALTY) + DELIVERY_BONUS + config.option_bonus
        self.q_bound = max_r / (1 - config.gamma) if config.gamma < 1 else math.inf

    def _learn(self, agent: OptionAgent, key, action, reward, key_next, terminal):
        c = self.config
        v = q_update(agent.qtable, key, action, reward, key_next, terminal, c.alpha, c.gamma, self.actions)
        if abs(v) > self.q_bound + 1e-9:
            raise AssertionError(f"Q-value {v} exceeds bound {self.q_bound}")
        self.steps += 1
        if self.on_step is not None:
            self.on_step(self.steps)

    def episode(self, seed: int, learn: bool) -> tuple:
        """Run one episode; returns ``(episode reward, env steps used)``."""
        state = self.env.reset(seed)
        if self.variant == "flat":
            return self._flat_episode(state, learn)
        return self._option_episode(state, learn)

    def _flat_episode(self, state, learn: bool) -> tuple:
        agent = self.agents["flat"]
        total, t = 0.0, 0
        while True:
            key = _ground_key(state)
            eps = self.config.epsilon(self.steps) if learn else 0.0
            a = select_action(agent.qtable, key, self.actions, eps, self.rng)
            res = self.env.step(state, a, t)
            t += 1
            total += res.reward
            if learn:
                terminal = res.done and not res.info["truncated"]
                self._learn(agent, key, a, res.reward, _ground_key(res.next_state), terminal)
            state = self.last_state = res.next_state
            if res.done:
                return total, t

    def _option_episode(self, state, learn: bool) -> tuple:
        total, t = 0.0, 0
        bonus = self.config.option_bonus
        self.last_state = state
        while True:
            steps = plan_for_state(self.env, state, self.operator_list)
            if not steps:
                return total, t
            replan = False
            for step in steps:
                agent = self.agents[step.predicate]
                args = step.args
                if agent.terminated(state, args):
                    continue
                key = agent.key(state, args)
                for _ in range(self.config.option_budget):
                    eps = self.config.epsilon(self.steps) if learn else 0.0
                    a = select_action(agent.qtable, key, self.actions, eps, self.rng)
                    res = self.env.step(state, a, t)
                    t += 1
                    total += res.reward
                    ended = agent.terminated(res.next_state, args)
                    key_next = agent.key(res.next_state, args)
                    if learn:
                        terminal = ended or (res.done and not res.info["truncated"])
                        self._learn(agent, key, a, res.reward + (bonus if ended else 0.0), key_next, terminal)
                    state, key = res.next_state, key_next
                    self.last_state = state
                    if res.done:
                        return total, t
                    if ended:
                        break
                else:
                    replan = True
                if replan:
                    break

    def reached_goal(self) -> bool:
        s = self.last_state
        return s is not None and goal_satisfied(s, self.env.goal(s))

    def greedy_action(self, state) -> str:
        if self.variant == "flat":
            return select_action(self.agents["flat"].qtable, _ground_key(state), self.actions, 0.0, self.rng)
        steps = plan_for_state(self.env, state, self.operator_list)
        for step in steps:
            agent = self.agents[step.predicate]
            if not agent.terminated(state, step.args):
                return select_action(agent.qtable, agent.key(state, step.args), self.actions, 0.0, self.rng)
        raise PlanningError("no active sub-task: the goal already holds")


@dataclass
class LearningCurve:
    points: list  # (env_steps, mean episode reward, std over seeds)

    def __post_init__(self):
        xs = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("env_steps must be strictly increasing")

    def to_csv(self, seeds: int) -> str:
        lines = ["env_steps,mean_reward,std_reward,seeds"]
        lines += [f"{s},{m:.6f},{d:.6f},{seeds}" for s, m, d in self.points]
        return "\n".join(lines) + "\n"


@dataclass
class SeedRun:
    seed: int
    curve: list  # (env_steps, mean greedy reward)
    steps_to_optimal: Optional[int]
    tables: dict


def eval_seeds(config: TrainConfig) -> list:
    return [EVAL_SEED_BASE + i for i in range(config.eval_episodes)]


def optimal_reference(env, config: TrainConfig) -> float:
    seeds = eval_seeds(config)
    return sum(env.optimal_return(env.reset(s)) for s in seeds) / len(seeds)


def train_seed(variant: str, env, decl, operators, config: TrainConfig, seed: int,
               tables: Optional[dict] = None, optimum: Optional[float] = None) -> SeedRun:
    """Train one seed; evaluates greedily at step 0 and every ``eval_every`` steps."""
    rng = random.Random(seed)
    agents = make_agents(variant, decl, operators, tables)
    runner = EpisodeRunner(variant, env, operators, agents, config, rng)
    if optimum is None:
        optimum = optimal_reference(env, config)
    evals = eval_seeds(config)
    curve = []
    reached = None

    def evaluate(step):
        nonlocal reached
        mean = sum(runner.episode(s, learn=False)[0] for s in evals) / len(evals)
        curve.append((step, mean))
        if reached is None and mean >= optimum - 1e-9:
            reached = step

    def on_step(step):
        if step % config.eval_every == 0 or step == config.total_env_steps:
            evaluate(step)
        if step >= config.total_env_steps:
            raise _BudgetReached

    evaluate(0)
    runner.on_step = on_step
    try:
        while True:
            runner.episode(rng.randrange(2**31), learn=True)
    except _BudgetReached:
        pass
    return SeedRun(seed, curve, reached, {name: a.qtable for name, a in agents.items()})


def _train_seed_job(args):
    return train_seed(*args)


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("REPREL_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_jobs))


def train(variant: str, env, decl, operators, config: TrainConfig, tables_by_seed: Optional[dict] = None) -> tuple:
    """Train every seed of ``config``; returns ``(runs, LearningCurve)``.

    Seeds are independent and may run in worker processes (``REPREL_THREADS``
    caps the count); results are merged in seed order so output is identical
    for any worker count.
    """
    optimum = optimal_reference(env, config)
    jobs = [
        (variant, env, decl, operators, config, s, (tables_by_seed or {}).get(s), optimum)
        for s in config.seeds
    ]
    workers = worker_count(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_train_seed_job, jobs))
    else:
        runs = [_train_seed_job(j) for j in jobs]
    return runs, aggregate(runs)


def aggregate(runs) -> LearningCurve:
    points = []
    for rows in zip(*(r.curve for r in runs)):
        steps = rows[0][0]
        vals = [v for _, v in rows]
        points.append((steps, statistics.fmean(vals), statistics.pstdev(vals)))
    return LearningCurve(points)


class OptionLearner(BaseEstimator):
    """Estimator front-end for a single training seed.

    ``fit(env)`` trains the chosen variant and stores ``agents_``,
    ``curve_`` and ``steps_to_optimal_``; ``predict(states)`` returns the
    greedy hierarchical action for each state; ``score(env)`` is the mean
    greedy episode reward over the evaluation seeds.
    """

    def __init__(self, variant="reprel", decl=None, operators=None, alpha=0.1, gamma=0.99,
                 epsilon_start=1.0, epsilon_end=0.05, epsilon_decay_steps=10_000,
                 total_env_steps=50_000, eval_every=1000, eval_episodes=10,
                 option_budget=100, seed=0):
        self.variant = variant
        self.decl = decl
        self.operators = operators
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon_start = epsilon_start
        self.epsilon_end = epsilon_end
        self.epsilon_decay_steps = epsilon_decay_steps
        self.total_env_steps = total_env_steps
        self.eval_every = eval_every
        self.eval_episodes = eval_episodes
        self.option_budget = option_budget
        self.seed = seed

    def _config(self) -> TrainConfig:
        params = self.get_params()
        params["seeds"] = (self.seed,)
        return TrainConfig.from_mapping(params)

    def _validate(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant != "flat" and (self.decl is None or not self.operators):
            raise ValueError(f"variant {self.variant!r} needs decl and operators")

    def fit(self, env, y=None, tables: Optional[dict] = None):
        self._validate()
        config = self._config()
        run = train_seed(self.variant, env, self.decl, self.operators or [], config, self.seed, tables)
        self.env_ = env
        self.tables_ = run.tables
        self.curve_ = LearningCurve([(s, m, 0.0) for s, m in run.curve])
        self.steps_to_optimal_ = run.steps_to_optimal
        self.agents_ = make_agents(self.variant, self.decl, self.operators or [], run.tables)
        return self

    def _runner(self, env=None) -> EpisodeRunner:
        check_is_fitted(self, "agents_")
        return EpisodeRunner(self.variant, env or self.env_, self.operators or [], self.agents_,
                             self._config(), random.Random(self.seed))

    def predict(self, states) -> list:
        runner = self._runner()
        return [runner.greedy_action(s) for s in states]

    def rollout(self, env, seed: int) -> tuple:
        return self._runner(env).episode(seed, learn=False)

    def score(self, env, y=None, episodes: Optional[int] = None) -> float:
        runner = self._runner(env)
        n = episodes or self.eval_episodes
        return sum(runner.episode(EVAL_SEED_BASE + i, learn=False)[0] for i in range(n)) / n
