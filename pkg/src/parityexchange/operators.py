"""Hamiltonian pieces on the 2**K parity-qubit basis.

The time-dependent Hamiltonian is

    H = A * H_init + B * H_drive + C * H_C + D * H_final + E * H_exchange

with diagonal ``H_init``, ``H_C`` and ``H_final``, a transverse field
``H_drive`` on the qubits outside every side condition, and hopping terms
``c_e (sigma+_i sigma-_j + h.c.)`` on the exchange edges.  Off-diagonal terms
are never stored as matrices; :func:`apply_hamiltonian` works on basis-index
bit patterns directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .model import (
    CompiledInstance,
    SideCondition,
    basis_index,
    graph_components,
    spin_table,
)

DENSE_MAX_QUBITS = 14
Weights = tuple[float, float, float, float, float]


@dataclass(frozen=True)
class OffDiagonalTerms:
    """Transverse-field sites and exchange edges.

    ``edge_weights`` multiply ``exchange_coefficient`` per edge and default to 1.
    """

    x_sites: tuple[int, ...]
    exchange_edges: tuple[tuple[int, int], ...] = ()
    exchange_coefficient: float = 0.5
    edge_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "x_sites", tuple(int(i) for i in self.x_sites))
        object.__setattr__(self, "exchange_edges", tuple((int(a), int(b)) for a, b in self.exchange_edges))
        if self.edge_weights is not None and len(self.edge_weights) != len(self.exchange_edges):
            raise ValueError("one weight per exchange edge required")
        for a, b in self.exchange_edges:
            if a == b:
                raise ValueError(f"exchange edge ({a}, {b}) joins a qubit to itself")
        touched = {q for e in self.exchange_edges for q in e}
        if touched & set(self.x_sites):
            raise ValueError(f"transverse field and exchange share qubits {sorted(touched & set(self.x_sites))}")

    def edge_coefficients(self) -> np.ndarray:
        w = np.ones(len(self.exchange_edges)) if self.edge_weights is None else np.asarray(self.edge_weights, float)
        return self.exchange_coefficient * w

    def kernel_arrays(self):
        ea = np.array([a for a, _ in self.exchange_edges], dtype=np.int64)
        eb = np.array([b for _, b in self.exchange_edges], dtype=np.int64)
        return np.array(self.x_sites, dtype=np.int64), ea, eb, self.edge_coefficients()


@dataclass(frozen=True)
class HamiltonianDiagonals:
    h_init: np.ndarray
    h_constraint: np.ndarray
    h_final: np.ndarray

    def __post_init__(self):
        n = len(self.h_init)
        if n & (n - 1) or len(self.h_constraint) != n or len(self.h_final) != n:
            raise ValueError("diagonals must share one power-of-two length")

    @property
    def dim(self) -> int:
        return len(self.h_init)

    def combine(self, weights: Weights) -> np.ndarray:
        a, _, c, d, _ = weights
        return a * self.h_init + c * self.h_constraint + d * self.h_final


def _n_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


# ---------------------------------------------------------------------------
# diagonal pieces
# ---------------------------------------------------------------------------


def build_h_init(initial_config: Sequence[int]) -> np.ndarray:
    """``sum_i e_i sigma^z_i`` with ``e_i = -s_i(0)``; the given configuration is its unique ground state."""
    s0 = np.asarray(initial_config, dtype=float)
    if not np.all(np.abs(s0) == 1):
        raise ValueError("initial configuration entries must be +1 or -1")
    return spin_table(len(s0)) @ (-s0)


def init_coefficients(initial_config: Sequence[int]) -> np.ndarray:
    return -np.asarray(initial_config, dtype=float)


def build_final_and_constraint_diagonals(instance: CompiledInstance) -> tuple[np.ndarray, np.ndarray]:
    spins = spin_table(instance.n_qubits)
    h_final = spins @ np.asarray(instance.fields)
    h_c = np.zeros(len(spins))
    for con in instance.constraints:
        h_c += con.strength * np.prod(spins[:, list(con.members)], axis=1)
    return h_final, h_c


def build_penalty_diagonal(condition: SideCondition, weight: float, n_qubits: int) -> np.ndarray:
    """``weight * (sum_{i in C} s_i - c)**2`` on every basis state."""
    if weight <= 0:
        raise ValueError("penalty weight must be positive")
    return weight * (magnetization_diagonal(condition.members, n_qubits) - condition.value) ** 2


def magnetization_diagonal(members: Sequence[int], n_qubits: int) -> np.ndarray:
    spins = spin_table(n_qubits)
    return spins[:, list(members)].sum(axis=1).astype(float)


def magnetization_expectation(state: np.ndarray, condition: SideCondition | Sequence[int]) -> float:
    """``<sum_{i in C} sigma^z_i>`` in a full-space state vector."""
    members = condition.members if isinstance(condition, SideCondition) else tuple(condition)
    probs = np.abs(np.asarray(state)) ** 2
    return float(probs @ magnetization_diagonal(members, _n_qubits(len(probs))))


def sz_expectations(state: np.ndarray) -> np.ndarray:
    probs = np.abs(np.asarray(state)) ** 2
    return probs @ spin_table(_n_qubits(len(probs)))


# ---------------------------------------------------------------------------
# off-diagonal application
# ---------------------------------------------------------------------------


def apply_hamiltonian(
    weights: Weights,
    diagonals: HamiltonianDiagonals,
    terms: OffDiagonalTerms,
    psi: np.ndarray,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """``H(A..E) psi`` without building a matrix; writes into ``out`` when given."""
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    dim = diagonals.dim
    if psi.shape != (dim,):
        raise ValueError(f"state has shape {psi.shape}, expected ({dim},)")
    if out is None:
        out = np.empty(dim, np.complex128)
    x_sites, ea, eb, coef = terms.kernel_arrays()
    full = np.arange(dim, dtype=np.int64)
    _kernels.apply_terms(
        diagonals.combine(weights), x_sites, float(weights[1]), ea, eb, coef,
        float(weights[4]), psi, out, full, full,
    )
    return out


def _offdiag_coo(states: np.ndarray, pos: np.ndarray, terms: OffDiagonalTerms):
    """(rows, cols) of the drive and (rows, cols, values) of the exchange restricted to ``states``."""
    d_rows, d_cols = [], []
    for i in terms.x_sites:
        cols = pos[states ^ (1 << i)]
        keep = cols >= 0
        d_rows.append(np.flatnonzero(keep))
        d_cols.append(cols[keep])
    e_rows, e_cols, e_vals = [], [], []
    for (a, b), w in zip(terms.exchange_edges, terms.edge_coefficients()):
        differ = ((states >> a) & 1) != ((states >> b) & 1)
        cols = pos[states ^ ((1 << a) | (1 << b))]
        keep = differ & (cols >= 0)
        e_rows.append(np.flatnonzero(keep))
        e_cols.append(cols[keep])
        e_vals.append(np.full(int(keep.sum()), w))
    cat = lambda parts, dtype: np.concatenate(parts) if parts else np.empty(0, dtype)  # noqa: E731
    return (
        (cat(d_rows, np.int64), cat(d_cols, np.int64)),
        (cat(e_rows, np.int64), cat(e_cols, np.int64), cat(e_vals, float)),
    )


def dense_block(
    weights: Weights,
    diagonals: HamiltonianDiagonals,
    terms: OffDiagonalTerms,
    states: np.ndarray | None = None,
) -> np.ndarray:
    """Real symmetric matrix of ``H`` restricted to the basis indices ``states`` (all by default)."""
    dim = diagonals.dim
    if _n_qubits(dim) > DENSE_MAX_QUBITS:
        raise ValueError(f"dense matrices are limited to {DENSE_MAX_QUBITS} qubits")
    states = np.arange(dim, dtype=np.int64) if states is None else np.asarray(states, dtype=np.int64)
    pos = np.full(dim, -1, dtype=np.int64)
    pos[states] = np.arange(len(states))
    (dr, dc), (er, ec, ev) = _offdiag_coo(states, pos, terms)
    mat = np.diag(diagonals.combine(weights)[states])
    np.add.at(mat, (dr, dc), weights[1])
    np.add.at(mat, (er, ec), weights[4] * ev)
    return mat


def dense_matrix(weights: Weights, diagonals: HamiltonianDiagonals, terms: OffDiagonalTerms) -> np.ndarray:
    return dense_block(weights, diagonals, terms)


# ---------------------------------------------------------------------------
# assembled annealing Hamiltonian
# ---------------------------------------------------------------------------


def merge_exchange_edges(conditions: Sequence[SideCondition]) -> tuple[tuple[int, int], ...]:
    """Union of the conditions' exchange edges, first occurrence wins, undirected."""
    seen = set()
    edges = []
    for cond in conditions:
        for a, b in cond.exchange_edges:
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen.add(key)
                edges.append((a, b))
    return tuple(edges)


@dataclass(frozen=True)
class AnnealingHamiltonian:
    """All pieces of ``H(s)`` for one instance, condition set and initial configuration."""

    n_qubits: int
    diagonals: HamiltonianDiagonals
    terms: OffDiagonalTerms
    conditions: tuple[SideCondition, ...]
    initial_config: tuple[int, ...]

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def conserved_sets(self) -> tuple[tuple[int, ...], ...]:
        """Qubit sets whose total magnetization every term of ``H`` conserves.

        These are the connected components of the exchange graph over all
        condition members; overlapping conditions merge into one set.
        """
        members = sorted({m for c in self.conditions for m in c.members})
        return tuple(graph_components(members, self.terms.exchange_edges))

    def sector_key(self, config: Sequence[int]) -> tuple[int, ...]:
        s = np.asarray(config)
        return tuple(int(s[list(c)].sum()) for c in self.conserved_sets)

    def sector_labels(self) -> np.ndarray:
        """Per basis state, the tuple of conserved-set sums, shape ``(dim, n_sets)``."""
        spins = spin_table(self.n_qubits)
        return np.stack([spins[:, list(c)].sum(axis=1) for c in self.conserved_sets], axis=1) \
            if self.conserved_sets else np.zeros((self.dim, 0), dtype=int)

    def sectors(self) -> dict[tuple[int, ...], np.ndarray]:
        labels = self.sector_labels()
        keys = sorted({tuple(int(v) for v in row) for row in labels})
        return {k: np.flatnonzero(np.all(labels == np.array(k, dtype=labels.dtype), axis=1)) for k in keys}

    def sector_states(self, key: tuple[int, ...]) -> np.ndarray:
        labels = self.sector_labels()
        return np.flatnonzero(np.all(labels == np.array(key, dtype=labels.dtype), axis=1))

    @property
    def initial_sector(self) -> tuple[int, ...]:
        return self.sector_key(self.initial_config)

    def apply(self, weights: Weights, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        return apply_hamiltonian(weights, self.diagonals, self.terms, psi, out)

    def dense(self, weights: Weights, states: np.ndarray | None = None) -> np.ndarray:
        return dense_block(weights, self.diagonals, self.terms, states)

    def energy(self, weights: Weights, psi: np.ndarray) -> float:
        return float(np.vdot(psi, self.apply(weights, psi)).real)

    def initial_state(self) -> np.ndarray:
        psi = np.zeros(self.dim, np.complex128)
        psi[basis_index(self.initial_config)] = 1.0
        return psi


def build_annealing_hamiltonian(
    instance: CompiledInstance,
    conditions: Sequence[SideCondition],
    initial_config: Sequence[int],
    exchange_coefficient: float = 0.5,
) -> AnnealingHamiltonian:
    K = instance.n_qubits
    if len(initial_config) != K:
        raise ValueError(f"initial configuration has {len(initial_config)} entries for {K} qubits")
    for cond in conditions:
        if any(m >= K for m in cond.members):
            raise ValueError(f"side condition members {list(cond.members)} out of range")
    constrained = {m for c in conditions for m in c.members}
    h_final, h_c = build_final_and_constraint_diagonals(instance)
    diagonals = HamiltonianDiagonals(build_h_init(initial_config), h_c, h_final)
    terms = OffDiagonalTerms(
        x_sites=tuple(i for i in range(K) if i not in constrained),
        exchange_edges=merge_exchange_edges(conditions),
        exchange_coefficient=exchange_coefficient,
    )
    return AnnealingHamiltonian(K, diagonals, terms, tuple(conditions), tuple(int(v) for v in initial_config))
