import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from parityexchange.model import SideCondition, basis_index, conditioned_ground_states
from parityexchange.operators import magnetization_diagonal
from parityexchange.qaoa import (
    ProtocolSpec,
    QaoaParams,
    apply_exchange_unitary,
    apply_phase,
    apply_x_rotation,
    comparison_cases,
    cost,
    fast_qaoa_state,
    optimize,
    prepare_initial_state,
    qaoa_state,
    sector_leakage,
)
from parityexchange.reference import FIG1_EIGENSTATES

X = np.array([[0, 1], [1, 0]])
I2 = np.eye(2)


def _kron_site(op, site, n):
    # little-endian: qubit 0 is the least significant bit, i.e. the rightmost factor
    mats = [op if k == site else I2 for k in reversed(range(n))]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _hop(i, j, n):
    sp = np.array([[0, 0], [1, 0]])  # |0> -> |1> in bit language, either orientation works for the sum
    a = _kron_site(sp, i, n) @ _kron_site(sp.T, j, n)
    return a + a.T


@pytest.fixture
def row(fig1):
    return fig1.condition(["23", "12", "26"], -1)


# --- primitives -------------------------------------------------------------------------


@pytest.mark.parametrize("edge", [(0, 1), (2, 0), (1, 3)])
@pytest.mark.parametrize("theta", [0.0, 0.37, np.pi / 2, 2.9])
def test_exchange_unitary_equals_dense_exponential(edge, theta, rng):
    n = 4
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    ref = expm(-1j * theta * _hop(*edge, n)) @ psi
    assert np.allclose(apply_exchange_unitary(psi, edge, theta), ref, atol=1e-10)


def test_exchange_full_transfer_at_quarter_turn():
    psi = np.zeros(4, complex)
    psi[0b10] = 1
    out = apply_exchange_unitary(psi, (0, 1), np.pi / 2)
    assert out[0b01] == pytest.approx(-1j)
    assert abs(out[0b10]) < 1e-15


def test_exchange_inert_on_aligned_pair():
    psi = np.zeros(4, complex)
    psi[0] = 1
    assert np.array_equal(apply_exchange_unitary(psi, (0, 1), 1.1), psi)


@pytest.mark.parametrize("site", [0, 1, 2])
def test_x_rotation_equals_dense_exponential(site, rng):
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    ref = expm(-1j * 0.8 * _kron_site(X, site, 3)) @ psi
    assert np.allclose(apply_x_rotation(psi, site, 0.8), ref, atol=1e-12)


def test_phase_properties(rng):
    d = rng.normal(size=8)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    assert np.array_equal(apply_phase(psi, d, 0.0), psi)
    assert np.allclose(apply_phase(apply_phase(psi, d, 0.3), d, 0.4), apply_phase(psi, d, 0.7))
    basis = np.zeros(8, complex)
    basis[3] = 1
    assert np.allclose(np.abs(apply_phase(basis, d, 1.3)), np.abs(basis))


# --- initial states -------------------------------------------------------------------------


def test_exchange_initial_pattern(fig1, row):
    psi = prepare_initial_state(ProtocolSpec("exchange", fig1, row))
    support = np.flatnonzero(np.abs(psi) > 0)
    assert len(support) == 64
    for b in support:
        assert [1 - 2 * ((b >> i) & 1) for i in (0, 1, 2)] == [1, -1, -1]
    assert np.allclose(np.abs(psi[support]), 1 / 8)


def test_penalty_initial_uniform(fig1, row):
    psi = prepare_initial_state(ProtocolSpec("penalty", fig1, row, 2))
    assert np.allclose(psi, 2 ** -4.5)


def test_saturated_condition_warns(fig1):
    cond = SideCondition((0, 1, 2), -3)
    with pytest.warns(UserWarning, match="trivially"):
        psi = prepare_initial_state(ProtocolSpec("exchange", fig1, cond))
    assert all(((b & 0b111) == 0b111) for b in np.flatnonzero(psi))


def test_general_value_seed_pattern(fig1):
    cond = SideCondition((0, 1, 2, 3), 0)
    psi = prepare_initial_state(ProtocolSpec("exchange", fig1, cond))
    assert {int(b) & 0b1111 for b in np.flatnonzero(psi)} == {0b1100}


# --- sequences and costs ---------------------------------------------------------------------


def test_zero_angles_leave_initial_state(fig1, row):
    pr = ProtocolSpec("exchange", fig1, row)
    assert np.allclose(qaoa_state(pr, np.zeros(pr.n_params)), prepare_initial_state(pr))


def test_parameter_counts(fig1, row):
    assert ProtocolSpec("exchange", fig1, row, 2).n_params == 2 * (3 + 2)
    assert ProtocolSpec("penalty", fig1, row, 2).n_params == 6
    pr = ProtocolSpec("exchange", fig1, row, 2)
    v = np.arange(10.0)
    assert np.array_equal(QaoaParams.from_vector(v, pr).to_vector(), v)
    with pytest.raises(ValueError):
        qaoa_state(pr, np.zeros(3))


@pytest.mark.parametrize("kind,p", [("exchange", 1), ("exchange", 3), ("penalty", 2)])
def test_numpy_and_compiled_paths_agree(fig1, row, kind, p, rng):
    pr = ProtocolSpec(kind, fig1, row, p)
    for _ in range(3):
        v = rng.uniform(0, 2 * np.pi, pr.n_params)
        a = qaoa_state(pr, v)
        assert np.allclose(a, fast_qaoa_state(pr, v), atol=1e-12)
        assert abs(np.linalg.norm(a) - 1) < 1e-12


def test_exchange_states_stay_in_sector(fig1, rng):
    for names, c in [(["23", "12", "26"], -1), (["12", "14", "45"], 1)]:
        cond = fig1.condition(names, c)
        pr = ProtocolSpec("exchange", fig1, cond, 2)
        for _ in range(5):
            v = rng.uniform(0, 2 * np.pi, pr.n_params)
            assert sector_leakage(pr, v) < 1e-12
            psi = qaoa_state(pr, v)
            m = magnetization_diagonal(cond.members, 9)
            assert np.abs(psi) ** 2 @ m == pytest.approx(c, abs=1e-12)


def test_cost_examples(fig1):
    basis = np.zeros(512)
    basis[basis_index(FIG1_EIGENSTATES["psi0"])] = 1
    ex = ProtocolSpec("exchange", fig1, fig1.condition(["23", "12", "26"], -1))
    assert cost(ex, basis) == pytest.approx(-4.1 - 16)
    pen = ProtocolSpec("penalty", fig1, fig1.condition(["34", "14", "16"], 1), 2)
    assert cost(pen, basis) == pytest.approx(-4.1 - 16 + 64)
    b8 = np.zeros(512)
    b8[basis_index(FIG1_EIGENSTATES["psi8"])] = 1
    assert cost(pen, b8) == pytest.approx(-1.7 - 16)


def test_staggered_angles_reach_asymmetric_targets(fig1):
    """Independent per-edge angles reach an excitation pattern that locked angles cannot."""
    cond = SideCondition((0, 1, 2), 1)  # one spin down among three, seeded on member 0
    pr = ProtocolSpec("exchange", fig1, cond)
    # down spin shared as (0.2, 0.5, 0.3) over the members
    weights = np.array([0.2, 0.5, 0.3])

    def member_distribution(angles):
        psi = np.zeros(8, complex)
        psi[0b001] = 1
        for e, th in zip(cond.exchange_edges, angles):
            psi = apply_exchange_unitary(psi, e, th)
        return np.abs(psi[[0b001, 0b010, 0b100]]) ** 2

    grid = np.linspace(0, np.pi, 361)
    best_locked = min(np.abs(member_distribution((t, t)) - weights).max() for t in grid)
    coarse = grid[::4]
    best_free = min(np.abs(member_distribution((a, b)) - weights).max() for a in coarse for b in coarse)
    assert best_free < 0.02
    assert best_locked > 0.05
    assert pr.exchange_edges == ((0, 1), (1, 2))


def test_penalty_weight_suppresses_violation(fig1):
    cond = fig1.condition(["34", "14", "16"], 1)
    viol = []
    for w in (4.0, 16.0):
        pr = ProtocolSpec("penalty", fig1, cond, 2, penalty_weight=w)
        res = optimize(pr, seed=5, restarts=6, iters_per_restart=600)
        psi = fast_qaoa_state(pr, res.best_params)
        m = magnetization_diagonal(cond.members, 9)
        viol.append(float(np.abs(psi) ** 2 @ (m - 1) ** 2))
    assert viol[1] < viol[0]


# --- optimizer ------------------------------------------------------------------------------


def test_optimizer_is_deterministic_and_monotone(fig1, row):
    pr = ProtocolSpec("exchange", fig1, row)
    a = optimize(pr, seed=11, restarts=4, iters_per_restart=300)
    b = optimize(pr, seed=11, restarts=4, iters_per_restart=300)
    assert np.array_equal(a.cost_trace, b.cost_trace)
    assert np.array_equal(a.best_params, b.best_params)
    assert np.all(np.diff(a.cost_trace, axis=1) <= 0)
    assert a.best_p_target == a.final_p_target.max()
    assert a.cost_trace.shape == (4, 301)
    c = optimize(pr, seed=11, restarts=4, iters_per_restart=300, jobs=2)
    assert np.array_equal(a.cost_trace, c.cost_trace)


def test_optimizer_trace_matches_recomputed_cost(fig1, row):
    pr = ProtocolSpec("penalty", fig1, row, 2)
    res = optimize(pr, seed=3, restarts=2, iters_per_restart=200)
    psi = qaoa_state(pr, res.best_params)
    assert cost(pr, psi) == pytest.approx(res.final_cost[res.best_restart], abs=1e-10)
    targets, _ = conditioned_ground_states(fig1, [row])
    assert res.best_p_target == pytest.approx(sum(abs(psi[basis_index(t)]) ** 2 for t in targets), abs=1e-10)


def test_degenerate_target_is_flagged(degen):
    cond = degen.condition(["0", "2", "5"], -1)
    res = optimize(ProtocolSpec("exchange", degen, cond), seed=1, restarts=1, iters_per_restart=10)
    assert res.degenerate_target


def test_comparison_has_twelve_cases(fig1):
    cases = comparison_cases(fig1)
    assert len(cases) == 12
    assert len({c[0] for c in cases}) == 12
    assert {c[2] for c in cases} == {-1, 1}
