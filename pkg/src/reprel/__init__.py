"""Relational planning plus RL: D-FOCI abstractions, Taxi, options and verifier."""
from importlib.resources import files

from .abstraction import (
    FIXPOINT,
    AbstractionSchema,
    AbstractState,
    RelevanceAbstraction,
    UnknownSubtaskError,
    abstract_state,
    relevant_closure,
)
from .agents import OptionLearner, QTable, TrainConfig, q_update, select_action, train
from .dfoci import DFociStatement, DomainDecl, parse_file, parse_statement, print_file, print_statement, validate
from .logic import Atom, Literal, atom, neg, pos, query, substitute, unify
from .planner import SubtaskOperator, load_operators, parse_operators, plan
from .taxi import TaxiEnv, load_instance, parse_instance
from .verifier import check_factorization, check_value_equivalence, value_iteration, verify_domain

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a shipped data file (dfoci, operators, instances, manifests)."""
    return files(__name__) / "data" / name


__all__ = [
    "FIXPOINT", "AbstractionSchema", "AbstractState", "RelevanceAbstraction", "UnknownSubtaskError",
    "abstract_state", "relevant_closure", "OptionLearner", "QTable", "TrainConfig", "q_update",
    "select_action", "train", "DFociStatement", "DomainDecl", "parse_file", "parse_statement",
    "print_file", "print_statement", "validate", "Atom", "Literal", "atom", "neg", "pos", "query",
    "substitute", "unify", "SubtaskOperator", "load_operators", "parse_operators", "plan", "TaxiEnv",
    "load_instance", "parse_instance", "check_factorization", "check_value_equivalence",
    "value_iteration", "verify_domain", "data_path",
]
