import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from parityexchange.model import (
    CompiledInstance,
    InfeasibleError,
    InstanceError,
    LogicalProblem,
    ParityConstraint,
    ParityQubit,
    SideCondition,
    all_logical_configs,
    basis_index,
    conditioned_ground_states,
    conditioned_levels,
    config_of,
    constraint_is_valid,
    feasible_mask,
    field_energy,
    instance_to_dict,
    logical_to_parity,
    parity_energy,
    parse_instance,
    satisfies_constraints,
    spin_table,
)
from parityexchange.reference import FIG1_EIGENSTATES, fixture_report


# --- basis convention -------------------------------------------------------


def test_basis_bit_zero_is_spin_up():
    assert basis_index((1, 1, 1)) == 0
    assert basis_index((-1, 1, 1)) == 1
    assert basis_index((1, 1, -1)) == 4
    assert spin_table(2).tolist() == [[1, 1], [-1, 1], [1, -1], [-1, -1]]


@given(st.integers(1, 10).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1))))
def test_basis_roundtrip(n_and_index):
    n, b = n_and_index
    assert basis_index(config_of(b, n)) == b
    assert tuple(spin_table(n)[b]) == config_of(b, n)


def test_basis_index_rejects_non_spins():
    with pytest.raises(ValueError):
        basis_index((1, 0, -1))


# --- constraints ------------------------------------------------------------


def _brute_valid(members, labels):
    counts = {}
    for m in members:
        for i in labels[m]:
            counts[i] = counts.get(i, 0) + 1
    return all(c % 2 == 0 for c in counts.values())


def test_constraint_validity_matches_brute_force_on_all_small_subsets(fig1):
    labels = [q.label for q in fig1.qubits]
    valid = []
    for r in (3, 4):
        for sub in itertools.combinations(range(9), r):
            ok = constraint_is_valid(sub, fig1.qubits)
            assert ok == _brute_valid(sub, labels)
            if ok:
                valid.append(sub)
    # the four plaquettes plus the four corners
    assert valid == [(1, 2, 5), (3, 6, 7), (0, 1, 3, 4), (0, 2, 6, 8), (4, 5, 7, 8)]


def test_reference_constraints_hold_on_every_logical_assignment(fig1):
    for logical in all_logical_configs(6):
        cfg = logical_to_parity(np.concatenate([[0], logical]), fig1.qubits)
        assert satisfies_constraints(cfg, fig1)


def test_feasible_set_is_the_image_of_logical_assignments(fig1):
    images = {tuple(logical_to_parity(np.concatenate([[0], lg]), fig1.qubits)) for lg in all_logical_configs(6)}
    mask = feasible_mask(fig1)
    feasible = {config_of(b, 9) for b in np.flatnonzero(mask)}
    assert len(images) == 32
    assert feasible == images


def test_parity_energy_matches_logical_energy(fig1):
    terms = tuple((q.label, j) for q, j in zip(fig1.qubits, fig1.fields))
    logical = LogicalProblem(7, terms)
    for lg in all_logical_configs(6):
        full = np.concatenate([[1], lg])
        cfg = logical_to_parity(full, fig1.qubits)
        assert parity_energy(cfg, fig1) == pytest.approx(logical.energy(full) - 16.0)


def test_constraint_count_check():
    q = tuple(ParityQubit(lab) for lab in ((1, 2), (2, 3), (1, 3)))
    with pytest.raises(InstanceError, match="K - N \\+ D"):
        CompiledInstance(q, (0.0, 0.0, 0.0), (), n_logical=3, degeneracy=1)
    CompiledInstance(q, (0.0, 0.0, 0.0), (ParityConstraint((0, 1, 2)),), n_logical=3, degeneracy=1)


def test_invalid_constraint_is_named(fig1):
    with pytest.raises(InstanceError, match="not a valid parity constraint"):
        CompiledInstance(fig1.qubits, fig1.fields, (ParityConstraint((0, 1, 2)),))


# --- side conditions ----------------------------------------------------------


def test_side_condition_keeps_member_order_and_chains_edges():
    c = SideCondition((3, 1, 2), -1)
    assert c.members == (3, 1, 2)
    assert c.exchange_edges == ((3, 1), (1, 2))


@pytest.mark.parametrize("members,value", [((0, 1, 2), 0), ((0, 1, 2), 5), ((0, 0, 1), 1), ((), 0)])
def test_side_condition_rejects_unreachable_values(members, value):
    with pytest.raises(InstanceError):
        SideCondition(members, value)


def test_side_condition_rejects_disconnected_graph():
    with pytest.raises(InstanceError, match="does not connect"):
        SideCondition((0, 1, 2, 3), 0, ((0, 1), (2, 3)))


def test_side_condition_residual():
    c = SideCondition((0, 1, 2), -1)
    assert c.is_satisfied((-1, 1, -1, 1))
    assert c.residual((1, 1, 1, 1)) == 4


# --- oracle -----------------------------------------------------------------------


def test_unconditioned_spectrum(fig1):
    energies = [e for e, states in conditioned_levels(fig1) for _ in states]
    assert energies[:10] == pytest.approx([-4.1, -3.7, -3.3, -3.1, -3.1, -2.5, -1.9, -1.7, -1.5, -1.5])


def test_row_condition_ground_state_is_eighth_excited(fig1):
    states, energy = conditioned_ground_states(fig1, [fig1.condition(["34", "14", "16"], 1)])
    assert states == [FIG1_EIGENSTATES["psi8"]]
    assert energy == pytest.approx(-1.7)


def test_degenerate_manifold(degen):
    states, energy = conditioned_ground_states(degen, [degen.condition(["0", "2", "5"], -1)])
    assert energy == pytest.approx(-3.5)
    assert sorted(states) == sorted([(1, 1, -1, 1, 1, -1, 1, 1, -1), (-1, -1, -1, 1, 1, 1, 1, 1, 1)])


def test_infeasible_conditions_raise(fig1):
    conds = [SideCondition((0, 1, 2), 3), SideCondition((0, 1, 2), -3)]
    with pytest.raises(InfeasibleError):
        conditioned_ground_states(fig1, conds)


def test_fixture_report_flags_only_the_inconsistent_rows():
    bad = [r.name for r in fixture_report("fig1") if not r.ok()]
    assert bad == ["psi6"]
    bad = [r.name for r in fixture_report("degeneracy") if not r.ok()]
    assert bad == ["psi4", "psi6"]


def test_field_energy_of_ground_state(fig1):
    assert field_energy(FIG1_EIGENSTATES["psi0"], fig1) == pytest.approx(-4.1, abs=1e-12)


# --- JSON ---------------------------------------------------------------------------


def test_instance_json_roundtrip(fig1):
    cond = fig1.condition(["23", "12", "26"], -1)
    doc = instance_to_dict(fig1, [cond])
    inst, conds = parse_instance(json.dumps(doc))
    assert inst == fig1
    assert conds == [cond]


def test_parse_reports_every_problem_with_line_numbers():
    text = """{
  "qubits": [[1, 2], [2, 3], [1, 3]],
  "fields": [0.1, 0.2],
  "constraints": [
    {"members": [0, 1]},
    {"members": [0, 1, 7]}
  ],
  "side_conditions": [{"members": [0, 1], "value": 1}]
}"""
    with pytest.raises(InstanceError) as info:
        parse_instance(text)
    problems = info.value.problems
    assert len(problems) == 4
    assert any("line 3" in p and "2 fields for 3 qubits" in p for p in problems)
    assert any("line 5" in p and "not a valid parity constraint" in p for p in problems)
    assert any("line 6" in p and "out of range" in p for p in problems)
    assert any("unreachable" in p for p in problems)


def test_parse_rejects_bad_json():
    with pytest.raises(InstanceError, match="line 2"):
        parse_instance('{"qubits": [[1, 2]],\n "fields": [1,]}')
