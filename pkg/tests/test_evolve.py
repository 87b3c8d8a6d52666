import numpy as np
import pytest
from scipy.linalg import eigh

from parityexchange.evolve import (
    ConditionViolationError,
    NormDriftError,
    Schedule,
    evolve_schroedinger,
    min_conditioned_gap,
    schedule_weights,
    sector_spectrum,
)
from parityexchange.model import (
    CompiledInstance,
    ParityQubit,
    SideCondition,
    basis_index,
    spin_table,
)
from parityexchange.operators import build_annealing_hamiltonian
from parityexchange.reference import FIG1_EIGENSTATES

FIG2A_INIT = (-1, 1, -1, -1, 1, 1, -1, 1, -1)


def _fig2a(fig1):
    return [fig1.condition(["23", "12", "26"], -1)]


@pytest.mark.parametrize("s,expected", [(0, (1, 0, 0, 0, 0)), (1, (0, 0, 1, 1, 0)), (0.5, (0.25, 1.0, 0.5, 0.5, 1.0))])
def test_schedule_weights(s, expected):
    assert schedule_weights(Schedule(4.0), s) == pytest.approx(expected)


@pytest.mark.parametrize("s", [-0.1, 1.01])
def test_schedule_weights_range(s):
    with pytest.raises(ValueError):
        schedule_weights(Schedule(), s)


def test_initial_condition_guard(fig1):
    with pytest.raises(ConditionViolationError):
        evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 10), (1,) * 9)


def test_sudden_quench_keeps_initial_state(fig1):
    tr = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 1e-4), FIG2A_INIT)
    assert tr.probability(FIG2A_INIT) >= 0.99


def test_zero_time_is_exact_identity(fig1):
    tr = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 0.0), FIG2A_INIT)
    assert tr.probability(FIG2A_INIT) == 1.0
    assert tr.energy[0] == -9


def test_energy_starts_at_init_ground_and_grid_is_uniform(fig1):
    tr = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 20), FIG2A_INIT, samples=11)
    assert tr.energy[0] == -9
    assert np.allclose(np.diff(tr.s), 0.1)
    assert tr.s[0] == 0 and tr.s[-1] == 1
    assert tr.csv_columns()[:3] == ["s", "E_evol", "sz_0"] and tr.csv_columns()[-1] == "m_C"


def test_magnetization_conserved_in_full_space(fig1):
    tr = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 40), FIG2A_INIT, samples=41)
    assert np.abs(tr.magnetization + 1).max() < 1e-8
    assert abs(np.linalg.norm(tr.final_state) - 1) < 1e-12


def test_sector_restriction_matches_full_space(fig1):
    kw = dict(samples=21, track={"psi0": FIG1_EIGENSTATES["psi0"]})
    a = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 30), FIG2A_INIT, **kw)
    b = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 30), FIG2A_INIT, restrict_to_sector=True, **kw)
    assert np.allclose(a.final_state, b.final_state, atol=1e-10)
    assert np.allclose(a.energy, b.energy, atol=1e-10)


def test_halving_dt_converges(fig1):
    a = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 50), FIG2A_INIT, 0.002, samples=11, restrict_to_sector=True)
    b = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 50), FIG2A_INIT, 0.001, samples=11, restrict_to_sector=True)
    assert np.abs(np.abs(a.final_state) ** 2 - np.abs(b.final_state) ** 2).max() < 1e-6


def test_large_step_trips_norm_check(fig1):
    with pytest.raises(NormDriftError):
        evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 50), FIG2A_INIT, dt=0.25, samples=3)


def test_deterministic(fig1):
    a = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 10), FIG2A_INIT, samples=5)
    b = evolve_schroedinger(fig1, _fig2a(fig1), Schedule(4, 10), FIG2A_INIT, samples=5)
    assert np.array_equal(a.final_state, b.final_state)


# --- spectra ------------------------------------------------------------------------


def test_sector_levels_reproduce_full_diagonalization(fig1):
    ham = build_annealing_hamiltonian(fig1, _fig2a(fig1), FIG2A_INIT)
    spec = sector_spectrum(ham, Schedule(4), [0.0, 0.3, 0.77, 1.0])
    assert sum(len(v) for v in spec.sector_states.values()) == 512
    for k, s in enumerate(spec.s):
        full = eigh(ham.dense(Schedule(4).weights(s)), eigvals_only=True)
        assert np.allclose(spec.all_levels()[k], full, atol=1e-8)
        assert spec.ground[k] == pytest.approx(full[0])


def test_diagonal_spectrum_is_basis_energies(fig1):
    ham = build_annealing_hamiltonian(fig1, _fig2a(fig1), FIG2A_INIT)
    spec = sector_spectrum(ham, Schedule(0.0), [0.0, 1.0])
    spins = spin_table(9)
    for key, states in spec.sector_states.items():
        assert all(spins[b, :3].sum() == key[0] for b in states)
        final = np.sort(ham.diagonals.h_final[states] + ham.diagonals.h_constraint[states])
        assert np.allclose(spec.levels[key][1], final)


def test_initial_state_is_instantaneous_ground_state_at_start(fig1):
    ham = build_annealing_hamiltonian(fig1, _fig2a(fig1), FIG2A_INIT)
    spec = sector_spectrum(ham, Schedule(4), [0.0], keep_vectors=True)
    key = ham.initial_sector
    vec = spec.vectors[key][0, :, 0]
    b = basis_index(FIG2A_INIT)
    k = int(np.flatnonzero(spec.sector_states[key] == b)[0])
    assert abs(vec[k]) == pytest.approx(1)


def test_spectrum_rejects_unsorted_grid(fig1):
    ham = build_annealing_hamiltonian(fig1, _fig2a(fig1), FIG2A_INIT)
    with pytest.raises(ValueError):
        sector_spectrum(ham, Schedule(4), [0.5, 0.2])


def _two_qubit(j0, j1):
    inst = CompiledInstance((ParityQubit((1, 2)), ParityQubit((2, 3))), (j0, j1), ())
    cond = SideCondition((0, 1), 0)
    return inst, cond


def test_two_level_gap_closed_form():
    j0, j1, gamma = 0.3, -0.4, 4.0
    inst, cond = _two_qubit(j0, j1)
    ham = build_annealing_hamiltonian(inst, [cond], (1, -1))
    spec = sector_spectrum(ham, Schedule(gamma), 101)
    key = (0,)
    for k, s in enumerate(spec.s):
        a = (1 - s) ** 2
        # basis (+1,-1): init -2, final j0 - j1; basis (-1,+1): init +2, final j1 - j0
        d = -4 * a + 2 * s * (j0 - j1)
        off = gamma * s * (1 - s) * 0.5
        assert spec.levels[key][k, 1] - spec.levels[key][k, 0] == pytest.approx(np.hypot(d, 2 * off), abs=1e-12)


def test_min_gap_refines_below_coarse_grid():
    inst, cond = _two_qubit(0.3, -0.4)
    ham = build_annealing_hamiltonian(inst, [cond], (1, -1))
    coarse = sector_spectrum(ham, Schedule(4), 11)
    gap, s_at = min_conditioned_gap(coarse, 0)
    gaps = coarse.levels[(0,)][:, 1] - coarse.levels[(0,)][:, 0]
    assert gap <= gaps.min() + 1e-15
    fine = sector_spectrum(ham, Schedule(4), 2001)
    ref = (fine.levels[(0,)][:, 1] - fine.levels[(0,)][:, 0]).min()
    assert gap == pytest.approx(ref, rel=0.05)


def test_gap_at_end_is_conditioned_oracle_gap(fig1):
    from parityexchange.model import conditioned_levels

    ham = build_annealing_hamiltonian(fig1, _fig2a(fig1), FIG2A_INIT)
    spec = sector_spectrum(ham, Schedule(4), [0.9, 1.0], n_levels=2)
    levels = conditioned_levels(fig1, _fig2a(fig1))
    lv = spec.levels[(-1,)]
    assert lv[1, 1] - lv[1, 0] == pytest.approx(levels[1][0] - levels[0][0], abs=1e-12)


def test_gap_of_init_only_hamiltonian_scales_with_its_weight(fig1):
    from dataclasses import replace

    from parityexchange.operators import HamiltonianDiagonals

    ham = build_annealing_hamiltonian(fig1, _fig2a(fig1), FIG2A_INIT)
    d = ham.diagonals
    # with only H_init left, H(s) = (1-s)**2 H_init and the sector gap is (1-s)**2 times one spin flip
    flat = replace(ham, diagonals=HamiltonianDiagonals(d.h_init, 0 * d.h_init, 0 * d.h_init))
    spec = sector_spectrum(flat, Schedule(0.0), np.linspace(0.0, 0.5, 6), n_levels=2)
    lv = spec.levels[(-1,)]
    gaps = (lv[:, 1] - lv[:, 0]) / (1 - spec.s) ** 2
    assert np.allclose(gaps, 2.0)


def test_min_gap_needs_two_states():
    inst = CompiledInstance((ParityQubit((1, 2)), ParityQubit((2, 3))), (0.1, 0.2), ())
    ham = build_annealing_hamiltonian(inst, [SideCondition((0, 1), 2)], (1, 1))
    spec = sector_spectrum(ham, Schedule(4), 5)
    with pytest.raises(ValueError):
        min_conditioned_gap(spec, 2)
