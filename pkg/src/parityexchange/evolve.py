"""Time evolution under the annealing schedule and sector-resolved instantaneous spectra.

The schedule is

    H(s) = (1-s)**2 H_init + G s(1-s) (H_drive + H_exchange) + s (H_C + H_final),

with ``s = t / t_final``.  Every term commutes with the total magnetization of
each connected block of the exchange graph, so the Hilbert space splits into
sectors labelled by those block sums.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import eigh

from . import _kernels
from .model import CompiledInstance, SideCondition, basis_index, spin_table
from .operators import (
    AnnealingHamiltonian,
    build_annealing_hamiltonian,
    magnetization_diagonal,
)

NORM_DRIFT_RATE = 1e-6


class NormDriftError(RuntimeError):
    """The integrator lost more norm than the tolerance allows; reduce ``dt``."""


class ConditionViolationError(ValueError):
    """The initial configuration does not satisfy a side condition."""


@dataclass(frozen=True)
class Schedule:
    gamma: float = 4.0
    t_final: float = 500.0

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not self.t_final >= 0:
            raise ValueError(f"t_final must be non-negative, got {self.t_final}")

    def weights(self, s: float) -> tuple[float, float, float, float, float]:
        return schedule_weights(self, s)


def schedule_weights(schedule: Schedule, s: float) -> tuple[float, float, float, float, float]:
    """``(A, B, C, D, E)`` at fractional time ``s``.

    Examples
    --------
    >>> schedule_weights(Schedule(gamma=4.0), 0.5)
    (0.25, 1.0, 0.5, 0.5, 1.0)
    """
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    drive = schedule.gamma * s * (1.0 - s)
    return ((1.0 - s) ** 2, drive, s, s, drive)


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Observables on a uniform grid of ``s``.

    ``magnetization[:, j]`` is the expectation of condition ``j``'s member sum
    and ``conserved_sums[:, k]`` that of the ``k``-th conserved qubit set.
    """

    s: np.ndarray
    energy: np.ndarray
    sz: np.ndarray
    magnetization: np.ndarray
    conserved_sums: np.ndarray
    overlaps: dict[str, np.ndarray]
    final_state: np.ndarray
    conserved_sets: tuple[tuple[int, ...], ...]
    max_norm_drift: float
    states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def probability(self, config: Sequence[int]) -> float:
        return float(abs(self.final_state[basis_index(config)]) ** 2)

    def probabilities(self, labelled: Mapping[str, Sequence[int]]) -> dict[str, float]:
        return {name: self.probability(cfg) for name, cfg in labelled.items()}

    def csv_columns(self) -> list[str]:
        K = self.sz.shape[1]
        n_c = self.magnetization.shape[1]
        m_cols = ["m_C"] if n_c == 1 else [f"m_C_{j}" for j in range(n_c)]
        return ["s", "E_evol"] + [f"sz_{i}" for i in range(K)] + m_cols

    def csv_rows(self) -> list[list[float]]:
        return [
            [float(self.s[k]), float(self.energy[k]), *map(float, self.sz[k]), *map(float, self.magnetization[k])]
            for k in range(len(self.s))
        ]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.csv_columns())
            for row in self.csv_rows():
                w.writerow([repr(v) for v in row])


def _check_initial(conditions: Sequence[SideCondition], initial_config: Sequence[int]) -> None:
    for j, cond in enumerate(conditions):
        if not cond.is_satisfied(initial_config):
            raise ConditionViolationError(
                f"initial configuration violates side condition {j}: members {list(cond.members)} "
                f"sum to {cond.residual(initial_config) + cond.value}, required {cond.value}"
            )


def _grid(t_final: float, dt: float, samples: int) -> tuple[int, float]:
    """Steps per sample interval and the step size that lands exactly on every sample."""
    intervals = samples - 1
    per = max(1, int(np.ceil(t_final / (dt * intervals) - 1e-12)))
    return per, t_final / (per * intervals)


def evolve_schroedinger(
    instance: CompiledInstance,
    conditions: Sequence[SideCondition],
    schedule: Schedule,
    initial_config: Sequence[int],
    dt: float = 0.002,
    *,
    samples: int = 201,
    track: Mapping[str, Sequence[int]] | None = None,
    exchange_coefficient: float = 0.5,
    restrict_to_sector: bool = False,
    keep_states: bool = False,
    hamiltonian: AnnealingHamiltonian | None = None,
) -> Trajectory:
    """Integrate ``i d|psi>/dt = H(t)|psi>`` from the basis state ``initial_config``.

    Fixed-step classical RK4 with at most ``dt`` per step; the step is shortened
    slightly so that an integer number of steps separates consecutive samples.
    After each sample interval the norm loss is checked against
    ``NORM_DRIFT_RATE`` per unit time and the state renormalized.

    Parameters
    ----------
    restrict_to_sector
        Integrate only the amplitudes of the initial conserved-sum sector.
        Exact, since no term of ``H`` leaves it, and faster; the default
        integrates the full ``2**K`` space so conservation is observed rather
        than imposed.
    track
        Named configurations whose probability is recorded at every sample.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if samples < 2:
        raise ValueError("need at least two samples")
    _check_initial(conditions, initial_config)
    ham = hamiltonian or build_annealing_hamiltonian(instance, conditions, initial_config, exchange_coefficient)
    K, dim = ham.n_qubits, ham.dim

    if restrict_to_sector:
        states = ham.sector_states(ham.initial_sector).astype(np.int64)
    else:
        states = np.arange(dim, dtype=np.int64)
    pos = np.full(dim, -1, dtype=np.int64)
    pos[states] = np.arange(len(states))
    d = ham.diagonals
    h_init = np.ascontiguousarray(d.h_init[states])
    h_prob = np.ascontiguousarray((d.h_constraint + d.h_final)[states])
    x_sites, ea, eb, coef = ham.terms.kernel_arrays()

    psi = np.zeros(len(states), np.complex128)
    psi[pos[basis_index(initial_config)]] = 1.0

    spins = spin_table(K).astype(float)
    cond_diag = np.stack([magnetization_diagonal(c.members, K) for c in conditions], axis=1) \
        if conditions else np.zeros((dim, 0))
    sets = ham.conserved_sets
    set_diag = np.stack([magnetization_diagonal(c, K) for c in sets], axis=1) if sets else np.zeros((dim, 0))
    track = dict(track or {})
    track_idx = {name: basis_index(cfg) for name, cfg in track.items()}

    s_grid = np.linspace(0.0, 1.0, samples)
    energy = np.empty(samples)
    sz = np.empty((samples, K))
    mag = np.empty((samples, cond_diag.shape[1]))
    sums = np.empty((samples, set_diag.shape[1]))
    overlaps = {name: np.empty(samples) for name in track}
    kept = np.empty((samples, dim), np.complex128) if keep_states else None

    full = np.zeros(dim, np.complex128)
    scratch = np.empty(dim, np.complex128)

    def record(k: int) -> None:
        full[:] = 0.0
        full[states] = psi
        probs = full.real ** 2 + full.imag ** 2
        energy[k] = np.vdot(full, ham.apply(schedule.weights(s_grid[k]), full, scratch)).real
        sz[k] = probs @ spins
        mag[k] = probs @ cond_diag
        sums[k] = probs @ set_diag
        for name, b in track_idx.items():
            overlaps[name][k] = probs[b]
        if kept is not None:
            kept[k] = full

    record(0)
    max_drift = 0.0
    t_final = float(schedule.t_final)
    if t_final > 0:
        per, h = _grid(t_final, dt, samples)
        t = 0.0
        for k in range(1, samples):
            t = _kernels.rk4_segment(
                psi, t, per, h, t_final, float(schedule.gamma), h_init, h_prob,
                x_sites, ea, eb, coef, states, pos,
            )
            t = k * per * h  # pin to the grid so rounding cannot accumulate
            norm = np.linalg.norm(psi)
            drift = abs(norm - 1.0)
            max_drift = max(max_drift, drift)
            if drift > NORM_DRIFT_RATE * per * h:
                raise NormDriftError(
                    f"norm drift {drift:.3e} over a sample interval of {per * h:.4g} exceeds "
                    f"{NORM_DRIFT_RATE:g} per unit time; reduce dt (now {h:.4g})"
                )
            psi /= norm
            record(k)
    else:
        for k in range(1, samples):
            record(k)

    final = np.zeros(dim, np.complex128)
    final[states] = psi
    return Trajectory(
        s=s_grid, energy=energy, sz=sz, magnetization=mag, conserved_sums=sums,
        overlaps=overlaps, final_state=final, conserved_sets=sets,
        max_norm_drift=max_drift, states=kept,
        meta={"dt": float(dt), "samples": samples, "restrict_to_sector": restrict_to_sector,
              "gamma": float(schedule.gamma), "t_final": t_final},
    )


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass
class SectorSpectrum:
    """Instantaneous eigenvalues of ``H(s)`` per conserved-sum sector.

    ``levels[key]`` has shape ``(len(s), n)`` with eigenvalues ascending along
    the second axis; ``ground`` is the global lowest eigenvalue per sample.
    """

    s: np.ndarray
    levels: dict[tuple[int, ...], np.ndarray]
    sector_states: dict[tuple[int, ...], np.ndarray]
    ground: np.ndarray
    hamiltonian: AnnealingHamiltonian
    schedule: Schedule
    vectors: dict[tuple[int, ...], np.ndarray] | None = None

    @property
    def sectors(self) -> list[tuple[int, ...]]:
        return list(self.levels)

    def key(self, sector) -> tuple[int, ...]:
        key = (int(sector),) if np.isscalar(sector) else tuple(int(v) for v in sector)
        if key not in self.levels:
            raise KeyError(f"no sector {key}; available {self.sectors}")
        return key

    def delta(self, sector) -> np.ndarray:
        return self.levels[self.key(sector)] - self.ground[:, None]

    def all_levels(self) -> np.ndarray:
        """Union of sector levels, sorted per sample, shape ``(len(s), total)``."""
        return np.sort(np.concatenate(list(self.levels.values()), axis=1), axis=1)

    def csv_rows(self):
        for k, s in enumerate(self.s):
            for key, lv in self.levels.items():
                label = ";".join(str(v) for v in key)
                for n, e in enumerate(lv[k]):
                    yield [float(s), label, n, float(e), float(e - self.ground[k])]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "sector", "level", "energy", "delta_E"])
            for row in self.csv_rows():
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _sector_eigs(ham: AnnealingHamiltonian, weights, states, n_levels, vectors=False):
    mat = ham.dense(weights, states)
    if n_levels is None or n_levels >= len(states):
        return eigh(mat, eigvals_only=not vectors)
    return eigh(mat, eigvals_only=not vectors, subset_by_index=(0, n_levels - 1))


def sector_spectrum(
    hamiltonian: AnnealingHamiltonian,
    schedule: Schedule,
    s_samples: int | Sequence[float] = 201,
    n_levels: int | None = None,
    *,
    keep_vectors: bool = False,
) -> SectorSpectrum:
    """Diagonalize ``H(s)`` block by block over the conserved-sum sectors.

    ``n_levels`` keeps only the lowest levels of every sector (all by default).
    The global ground energy is the minimum over sectors, so it is exact for
    any ``n_levels >= 1``.
    """
    if hamiltonian.n_qubits > 14:
        raise ValueError("sector spectra are limited to 14 qubits")
    s_grid = np.linspace(0.0, 1.0, s_samples) if np.isscalar(s_samples) else np.asarray(s_samples, float)
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s samples must be strictly increasing")
    sectors = hamiltonian.sectors()
    levels, vecs = {}, ({} if keep_vectors else None)
    for key, states in sectors.items():
        n = len(states) if n_levels is None else min(n_levels, len(states))
        lv = np.empty((len(s_grid), n))
        vv = np.empty((len(s_grid), len(states), n)) if keep_vectors else None
        for k, s in enumerate(s_grid):
            out = _sector_eigs(hamiltonian, schedule.weights(s), states, n, keep_vectors)
            if keep_vectors:
                lv[k], vv[k] = out
            else:
                lv[k] = out
        levels[key] = lv
        if keep_vectors:
            vecs[key] = vv
    ground = np.min([lv[:, 0] for lv in levels.values()], axis=0)
    return SectorSpectrum(s_grid, levels, sectors, ground, hamiltonian, schedule, vecs)


def min_conditioned_gap(spectrum: SectorSpectrum, target_sector, refine: int = 10) -> tuple[float, float]:
    """Smallest gap between the two lowest levels of one sector, and where it occurs.

    The coarse minimum over the sampled ``s`` is refined on a grid ``refine``
    times finer spanning the neighbouring samples.
    """
    key = spectrum.key(target_sector)
    states = spectrum.sector_states[key]
    if len(states) < 2:
        raise ValueError(f"sector {key} holds {len(states)} state; a gap needs two")
    ham, sched = spectrum.hamiltonian, spectrum.schedule

    def gap_at(s: float) -> float:
        e = _sector_eigs(ham, sched.weights(s), states, 2)
        return float(e[1] - e[0])

    lv = spectrum.levels[key]
    if lv.shape[1] >= 2:
        gaps = lv[:, 1] - lv[:, 0]
    else:
        gaps = np.array([gap_at(s) for s in spectrum.s])
    i = int(np.argmin(gaps))
    best, s_best = float(gaps[i]), float(spectrum.s[i])
    s = spectrum.s
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
    if refine > 1 and hi > lo:
        n_fine = int(round((hi - lo) / (s[1] - s[0]) * refine)) + 1
        for sf in np.linspace(lo, hi, n_fine):
            g = gap_at(sf)
            if g < best:
                best, s_best = g, float(sf)
    return best, s_best
