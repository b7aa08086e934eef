import time

import numpy as np
import pytest

from reprel.abstraction import AbstractionSchema, partition, relevant_closure
from reprel.verifier import (
    GroundMdp, check_factorization, check_value_equivalence, format_report, ground_mdp,
    identity_check, phase_mdp, q_values, quotient, value_iteration, verify_domain,
)

ACTS = ("a", "b")


def chain(gamma=0.99):
    # s0 --(-1)--> s1 absorbing
    t = {(0, "a"): (1, -1.0, True), (0, "b"): (1, -1.0, True),
         (1, "a"): (1, 0.0, True), (1, "b"): (1, 0.0, True)}
    return GroundMdp(["s0", "s1"], ACTS, t, gamma)


def test_vi_single_absorbing():
    m = GroundMdp(["s"], ACTS, {(0, "a"): (0, 0.0, True), (0, "b"): (0, 0.0, True)}, 0.9)
    assert value_iteration(m).values.tolist() == [0.0]


def test_vi_two_state_chain():
    v = value_iteration(chain()).values
    assert v[0] == pytest.approx(-1.0, abs=1e-12) and v[1] == 0.0


def test_vi_geometric_loop():
    m = GroundMdp(["s"], ("a",), {(0, "a"): (0, 1.0, False)}, 0.5)
    table = value_iteration(m, tol=1e-12)
    assert table.values[0] == pytest.approx(2.0, abs=1e-11)
    # sup-norm residual contracts by gamma each sweep
    h = table.residual_history
    assert all(b <= 0.5 * a + 1e-15 for a, b in zip(h, h[1:]))


def test_vi_rejects_bad_tol():
    with pytest.raises(ValueError):
        value_iteration(chain(), tol=0)


def test_incomplete_mdp_rejected():
    with pytest.raises(ValueError):
        GroundMdp(["s"], ACTS, {(0, "a"): (0, 0.0, True)}, 0.9)


def test_q_values_bellman(env3):
    m = ground_mdp(env3)
    v = value_iteration(m).values
    assert np.max(np.abs(q_values(m, v).max(axis=1) - v)) < 1e-9


def test_ground_values_match_shortest_paths(env3):
    m = ground_mdp(env3)
    v = value_iteration(m).values
    enum = env3.enumerate()
    for i in enum.initial[:20]:
        # undiscounted optimum bounds the discounted one from above
        assert v[i] <= env3.optimal_return(enum.states[i]) + 1e-9
        assert v[i] > 0


def test_ground_values_frozen(env3):
    v = value_iteration(ground_mdp(env3)).values
    # regression fixture from the first computation
    assert len(v) == 328
    assert float(v.sum()) == pytest.approx(4394.832738430049, abs=1e-6)


def _pickup_phase(env3, operators):
    op = next(o for o in operators if o.name == "pickup")
    return op, phase_mdp(env3, op, ("p1",))


def test_pickup_factorization_passes(decl, operators, env3):
    _, mdp = _pickup_phase(env3, operators)
    X, Y = partition(relevant_closure(decl, "pickup"), mdp.atoms, {"P": "p1"})
    rep = check_factorization(mdp, X, Y)
    assert rep.passed and rep.violations == [] and rep.groups < len(mdp.states)


def test_adversarial_partition_fails(decl, operators, env3):
    _, mdp = _pickup_phase(env3, operators)
    X, Y = partition(relevant_closure(decl, "pickup"), mdp.atoms, {"P": "p1"})
    moved = {a for a in X if a.predicate == "taxi-at"}
    rep = check_factorization(mdp, X - moved, Y | moved)
    assert not rep.passed
    assert any(v.action.startswith("move") or v.action == "pickup" for v in rep.violations)
    assert rep.lines(mdp)


def test_empty_y_trivially_passes(operators, env3):
    _, mdp = _pickup_phase(env3, operators)
    assert check_factorization(mdp, mdp.atoms, frozenset()).passed


def test_partition_must_cover(operators, env3):
    _, mdp = _pickup_phase(env3, operators)
    with pytest.raises(ValueError):
        check_factorization(mdp, frozenset(), frozenset())
    a = next(iter(mdp.atoms))
    with pytest.raises(ValueError):
        check_factorization(mdp, mdp.atoms, {a})


def test_value_equivalence_both_phases(decl, operators, env3):
    t = time.perf_counter()
    for op in operators:
        mdp = phase_mdp(env3, op, ("p1",))
        rep = check_value_equivalence(mdp, relevant_closure(decl, op.name), {"P": "p1"}, tol=1e-8)
        assert rep.passed and rep.max_deviation <= 1e-8 and rep.factorization.violations == []
    assert time.perf_counter() - t < 10


def test_dropping_taxi_position_breaks_equivalence(decl, operators, env3):
    op, mdp = _pickup_phase(env3, operators)
    full = relevant_closure(decl, "pickup")
    crippled = AbstractionSchema(
        full.subtask, frozenset(t for t in full.relevant_templates if t.predicate != "taxi-at"),
        full.include_action, full.depth_used,
    )
    rep = check_value_equivalence(mdp, crippled, {"P": "p1"})
    assert not rep.passed and rep.max_deviation > 1e-8 and not rep.well_defined


def test_identity_quotient_exact(env3):
    assert identity_check(ground_mdp(env3)) == 0.0


def test_quotient_class_map(env3):
    m = ground_mdp(env3)
    q, phi = quotient(m, lambda s: s)
    assert len(q.states) == len(m.states) and sorted(set(phi)) == list(range(len(m.states)))


def test_verify_domain_shipped(decl, operators, env3):
    results = verify_domain(env3, decl, operators)
    assert len(results) == 4 and all(r.passed for r in results)
    assert format_report(results).endswith("summary passed=4 failed=0\n")


def test_verify_domain_corrupt(corrupt_decl, operators, env3):
    results = {r.name: r for r in verify_domain(env3, corrupt_decl, operators)}
    assert not results["factorization drop(p1)"].passed
    assert not results["value-equivalence drop(p1)"].passed
    assert results["factorization pickup(p1)"].passed
    assert any(line.startswith("witness") for line in results["factorization drop(p1)"].lines)
