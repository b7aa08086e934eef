"""Seeded random generators shared by the property tests."""
import random
import string

from reprel.dfoci import RESERVED, DFociStatement, Special
from reprel.logic import Atom, Literal

_LOWER = string.ascii_lowercase
_ALNUM = string.ascii_lowercase + string.digits


def _name(rng, first):
    while True:
        parts = [rng.choice(first) + "".join(rng.choice(_ALNUM) for _ in range(rng.randrange(0, 5)))]
        if rng.random() < 0.3:
            parts.append("".join(rng.choice(_ALNUM) for _ in range(rng.randrange(1, 4))))
        name = "-".join(parts)
        if name not in RESERVED:
            return name


def random_term(rng):
    if rng.random() < 0.5:
        return rng.choice(string.ascii_uppercase) + "".join(rng.choice(_ALNUM) for _ in range(rng.randrange(0, 3)))
    return _name(rng, _LOWER)


def random_literal(rng, positive=None):
    args = tuple(random_term(rng) for _ in range(rng.randrange(0, 4)))
    if positive is None:
        positive = rng.random() < 0.7
    return Literal(Atom(_name(rng, _LOWER), args), positive)


def random_statement(rng: random.Random) -> DFociStatement:
    head = None
    if rng.random() < 0.6:
        params = rng.sample(string.ascii_uppercase, rng.randrange(1, 4))
        head = Atom(_name(rng, _LOWER), tuple(params))
    items = {random_literal(rng) for _ in range(rng.randrange(1, 6))}
    if rng.random() < 0.6:
        items.add(Special.ACTION)
    next_step = rng.random() < 0.6
    if next_step:
        consequent = random_literal(rng) if rng.random() < 0.8 else rng.choice([Special.TASK_REWARD, Special.OPTION_REWARD])
    else:
        consequent = rng.choice([Special.TASK_REWARD, Special.OPTION_REWARD])
    return DFociStatement(head, frozenset(items), consequent, next_step)
