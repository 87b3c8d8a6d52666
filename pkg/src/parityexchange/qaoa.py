"""Digital protocols: exchange-driver QAOA and the penalty baseline.

One layer of the exchange protocol applies, in order,

    exp(-i a H_final) exp(-i b H_C),  prod_{i in U} exp(-i g X_i),  prod_edges exp(-i d_e (s+s- + h.c.)),

starting from the side-condition pattern on ``C`` and ``|+>`` on ``U``.  The
penalty protocol starts from ``|+>^K``, drives every qubit and adds
``w (sum_C s_i - c)**2`` to the phase and the cost.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .model import CompiledInstance, SideCondition, basis_index, conditioned_ground_states
from .operators import build_final_and_constraint_diagonals, build_penalty_diagonal, magnetization_diagonal

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ProtocolSpec:
    """A digital protocol on one instance with one side condition.

    ``penalty_weight`` is only used by the penalty protocol.
    """

    kind: str
    instance: CompiledInstance
    condition: SideCondition
    p: int = 1
    penalty_weight: float = 4.0

    def __post_init__(self):
        if self.kind not in ("exchange", "penalty"):
            raise ValueError(f"protocol kind must be 'exchange' or 'penalty', got {self.kind!r}")
        if self.p < 1:
            raise ValueError("need at least one layer")
        if any(m >= self.instance.n_qubits for m in self.condition.members):
            raise ValueError("condition members out of range")

    @property
    def n_qubits(self) -> int:
        return self.instance.n_qubits

    @property
    def drive_sites(self) -> tuple[int, ...]:
        if self.kind == "penalty":
            return tuple(range(self.n_qubits))
        return tuple(i for i in range(self.n_qubits) if i not in self.condition.member_set)

    @property
    def exchange_edges(self) -> tuple[tuple[int, int], ...]:
        return self.condition.exchange_edges if self.kind == "exchange" else ()

    @property
    def params_per_layer(self) -> int:
        return 3 + len(self.exchange_edges)

    @property
    def n_params(self) -> int:
        return self.p * self.params_per_layer


@dataclass(frozen=True)
class QaoaParams:
    """Angles grouped per layer: ``alpha`` (final), ``beta`` (constraints), ``gamma`` (drive), ``exchange`` (per edge)."""

    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    gamma: tuple[float, ...]
    exchange: tuple[tuple[float, ...], ...]

    @classmethod
    def from_vector(cls, vec: Sequence[float], protocol: ProtocolSpec) -> "QaoaParams":
        v = np.asarray(vec, float)
        if v.shape != (protocol.n_params,):
            raise ValueError(f"expected {protocol.n_params} parameters, got shape {v.shape}")
        rows = v.reshape(protocol.p, protocol.params_per_layer)
        return cls(tuple(rows[:, 0]), tuple(rows[:, 1]), tuple(rows[:, 2]), tuple(tuple(r[3:]) for r in rows))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[a, b, g, *e] for a, b, g, e in zip(self.alpha, self.beta, self.gamma, self.exchange)])


# ---------------------------------------------------------------------------
# states and primitive unitaries
# ---------------------------------------------------------------------------


def prepare_initial_state(protocol: ProtocolSpec) -> np.ndarray:
    """Initial state vector of the protocol.

    Exchange: the first condition member at ``-c``, the other members at
    ``c`` (for general ``c`` the minority spins fill the leading members), and
    ``|+>`` on every unconditioned qubit.  Penalty: ``|+>^K``.
    """
    K = protocol.n_qubits
    dim = 1 << K
    if protocol.kind == "penalty":
        return np.full(dim, 2.0 ** (-K / 2), np.complex128)
    cond = protocol.condition
    if abs(cond.value) == len(cond.members):
        warnings.warn(
            f"side condition value {cond.value} fixes every member; exchange unitaries act trivially",
            stacklevel=2,
        )
    # minority spins go on the leading members; for |c| = 1 this puts -c on the first member
    n = len(cond.members)
    n_up = (n + cond.value) // 2
    minority, lead = (1, n_up) if n_up <= n - n_up else (-1, n - n_up)
    pattern = {m: (minority if k < lead else -minority) for k, m in enumerate(cond.members)}
    cond_bits = sum(1 << m for m, v in pattern.items() if v == -1)
    free = protocol.drive_sites
    psi = np.zeros(dim, np.complex128)
    amp = 2.0 ** (-len(free) / 2)
    for k in range(1 << len(free)):
        b = cond_bits
        for j, q in enumerate(free):
            if k >> j & 1:
                b |= 1 << q
        psi[b] = amp
    return psi


def apply_phase(state: np.ndarray, diagonal: np.ndarray, angle: float) -> np.ndarray:
    return state * np.exp(-1j * angle * np.asarray(diagonal))


def _pair_view(state: np.ndarray, n_qubits: int, site: int) -> np.ndarray:
    # axes ordered (high bits, bit site, low bits)
    return state.reshape(1 << (n_qubits - site - 1), 2, 1 << site)


def apply_x_rotation(state: np.ndarray, site: int, angle: float) -> np.ndarray:
    """``exp(-i angle X_site) state``."""
    n = len(state).bit_length() - 1
    v = _pair_view(np.array(state, np.complex128), n, site)
    c, s = np.cos(angle), -1j * np.sin(angle)
    u0, u1 = v[:, 0, :].copy(), v[:, 1, :].copy()
    v[:, 0, :] = c * u0 + s * u1
    v[:, 1, :] = s * u0 + c * u1
    return v.reshape(-1)


def apply_exchange_unitary(state: np.ndarray, edge: tuple[int, int], angle: float) -> np.ndarray:
    """``exp(-i angle (s+_i s-_j + s-_i s+_j)) state``: rotates each (01, 10) pair, leaves aligned pairs alone."""
    i, j = edge
    if i == j:
        raise ValueError("exchange edge needs two distinct qubits")
    out = np.array(state, np.complex128)
    idx = np.arange(len(out))
    lo = idx[((idx >> i) & 1 == 0) & ((idx >> j) & 1 == 1)]
    hi = lo ^ ((1 << i) | (1 << j))
    u, w = out[lo].copy(), out[hi].copy()
    c, s = np.cos(angle), -1j * np.sin(angle)
    out[lo] = c * u + s * w
    out[hi] = s * u + c * w
    return out


# ---------------------------------------------------------------------------
# protocol evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Compiled:
    init: np.ndarray
    h_final: np.ndarray
    h_phase_c: np.ndarray
    cost_diag: np.ndarray
    drive: np.ndarray
    edge_a: np.ndarray
    edge_b: np.ndarray
    magnetization: np.ndarray
    targets: np.ndarray
    degenerate: bool


def _compile(protocol: ProtocolSpec) -> _Compiled:
    inst, cond = protocol.instance, protocol.condition
    h_final, phase_c, cost = _compile_diagonals(protocol)
    targets, _ = conditioned_ground_states(inst, [cond])
    edges = protocol.exchange_edges
    return _Compiled(
        prepare_initial_state(protocol), h_final, phase_c, cost,
        np.array(protocol.drive_sites, np.int64),
        np.array([a for a, _ in edges], np.int64), np.array([b for _, b in edges], np.int64),
        magnetization_diagonal(cond.members, inst.n_qubits),
        np.array([basis_index(t) for t in targets], np.int64), len(targets) > 1,
    )


def qaoa_state(protocol: ProtocolSpec, params: Sequence[float] | QaoaParams) -> np.ndarray:
    """Final state of the layered sequence, built from the numpy primitives.

    Phase separator ``beta`` multiplies ``H_C`` for the exchange protocol and
    ``H_C + penalty`` for the penalty protocol.
    """
    vec = params.to_vector() if isinstance(params, QaoaParams) else np.asarray(params, float)
    if vec.shape != (protocol.n_params,):
        raise ValueError(f"expected {protocol.n_params} parameters, got shape {vec.shape}")
    comp = _compile_diagonals(protocol)
    psi = prepare_initial_state(protocol)
    edges = protocol.exchange_edges
    for layer in vec.reshape(protocol.p, protocol.params_per_layer):
        alpha, beta, gamma = layer[:3]
        psi = apply_phase(psi, comp[0], alpha)
        psi = apply_phase(psi, comp[1], beta)
        for i in protocol.drive_sites:
            psi = apply_x_rotation(psi, i, gamma)
        for edge, theta in zip(edges, layer[3:]):
            psi = apply_exchange_unitary(psi, edge, theta)
    return psi


def _compile_diagonals(protocol: ProtocolSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h_final, h_c = build_final_and_constraint_diagonals(protocol.instance)
    if protocol.kind == "penalty":
        pen = build_penalty_diagonal(protocol.condition, protocol.penalty_weight, protocol.n_qubits)
        return h_final, h_c + pen, h_final + h_c + pen
    return h_final, h_c, h_final + h_c


def cost_diagonal(protocol: ProtocolSpec) -> np.ndarray:
    return _compile_diagonals(protocol)[2]


def cost(protocol: ProtocolSpec, state: np.ndarray) -> float:
    """``<H_C + H_final>``, plus the penalty expectation for the penalty protocol."""
    probs = np.abs(np.asarray(state)) ** 2
    return float(probs @ cost_diagonal(protocol))


def fast_qaoa_state(protocol: ProtocolSpec, params: Sequence[float]) -> np.ndarray:
    """Same as :func:`qaoa_state` through the compiled kernel."""
    c = _compile(protocol)
    out = np.empty_like(c.init)
    _kernels.qaoa_state_into(np.asarray(params, float), protocol.p, c.init, c.h_final, c.h_phase_c,
                             c.drive, c.edge_a, c.edge_b, out)
    return out


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


@dataclass
class OptimizationResult:
    """Outcome of the restarted hill descent.

    Traces have shape ``(restarts, iterations + 1)`` and hold the accepted
    state's values after each iteration.
    """

    kind: str
    best_params: np.ndarray
    best_p_target: float
    best_restart: int
    final_p_target: np.ndarray
    final_cost: np.ndarray
    cost_trace: np.ndarray = field(repr=False)
    p_trace: np.ndarray = field(repr=False)
    magnetization_trace: np.ndarray = field(repr=False)
    degenerate_target: bool = False
    exchange_edges: tuple[tuple[int, int], ...] = ()

    def best_curve(self) -> list[dict]:
        r = self.best_restart
        return [
            {"iteration": k, "cost": float(self.cost_trace[r, k]), "P_target": float(self.p_trace[r, k])}
            for k in range(self.cost_trace.shape[1])
        ]


def _draws(seed_seq: np.random.SeedSequence, n_params: int, iters: int):
    rng = np.random.default_rng(seed_seq)
    start = rng.uniform(0.0, TWO_PI, n_params)
    choices = rng.integers(0, n_params, iters)
    deltas = rng.uniform(-0.1, 0.1, iters)
    return start, choices, deltas


def _descend_chunk(args):
    protocol, seqs, iters = args
    c = _compile(protocol)
    draws = [_draws(s, protocol.n_params, iters) for s in seqs]
    params = np.array([d[0] for d in draws])
    choices = np.array([d[1] for d in draws], dtype=np.int64).reshape(len(seqs), iters)
    deltas = np.array([d[2] for d in draws]).reshape(len(seqs), iters)
    ct, pt, mt = _kernels.hill_descent(
        params, choices, deltas, protocol.p, c.init, c.h_final, c.h_phase_c, c.drive,
        c.edge_a, c.edge_b, c.cost_diag, c.targets, c.magnetization,
    )
    return params, ct, pt, mt


def optimize(
    protocol: ProtocolSpec,
    seed: int | np.random.SeedSequence = 0,
    restarts: int = 100,
    iters_per_restart: int = 2000,
    jobs: int = 1,
) -> OptimizationResult:
    """Restarted random hill descent on :func:`cost`.

    Each restart draws its own stream from ``seed``: starting angles uniform in
    ``[0, 2 pi)``, then per iteration one uniformly chosen parameter shifted by
    ``U(-0.1, 0.1)``; the move is kept only if the cost strictly decreases.
    ``best_p_target`` is the largest final target probability over restarts,
    summed over the conditioned ground manifold when it is degenerate.
    """
    if restarts < 1 or iters_per_restart < 0:
        raise ValueError("need at least one restart and a non-negative iteration count")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seqs = root.spawn(restarts)
    n_chunks = max(1, min(jobs, restarts))
    bounds = np.linspace(0, restarts, n_chunks + 1).astype(int)
    chunks = [(protocol, seqs[a:b], iters_per_restart) for a, b in zip(bounds[:-1], bounds[1:])]
    if n_chunks > 1:
        with ProcessPoolExecutor(max_workers=n_chunks) as pool:
            parts = list(pool.map(_descend_chunk, chunks))
    else:
        parts = [_descend_chunk(chunks[0])]
    params = np.concatenate([p[0] for p in parts])
    ct, pt, mt = (np.concatenate([p[k] for p in parts]) for k in (1, 2, 3))
    final_p = pt[:, -1]
    best = int(np.argmax(final_p))
    return OptimizationResult(
        protocol.kind, params[best], float(final_p[best]), best, final_p, ct[:, -1],
        ct, pt, mt, _compile(protocol).degenerate, protocol.exchange_edges,
    )


# ---------------------------------------------------------------------------
# comparison harness
# ---------------------------------------------------------------------------

ROW_SETS = (("23", "12", "26"), ("34", "14", "16"), ("35", "45", "56"))
COLUMN_SETS = (("23", "34", "35"), ("12", "14", "45"), ("26", "16", "56"))


@dataclass(frozen=True)
class ComparisonRow:
    case_id: str
    members: tuple[str, ...]
    c: int
    p_exchange: float
    p_penalty: float
    ground_state_satisfies: bool
    degenerate_target: bool
    max_leakage: float
    exchange: OptimizationResult = field(repr=False, compare=False)
    penalty: OptimizationResult = field(repr=False, compare=False)


def comparison_cases(instance: CompiledInstance) -> list[tuple[str, tuple[str, ...], int]]:
    cases = []
    for kind, sets in (("row", ROW_SETS), ("col", COLUMN_SETS)):
        for k, names in enumerate(sets):
            for c in (-1, 1):
                cases.append((f"{kind}{k}{'-' if c < 0 else '+'}", names, c))
    return cases


def sector_leakage(protocol: ProtocolSpec, params: Sequence[float]) -> float:
    """Probability outside the condition's magnetization sector after the sequence."""
    psi = fast_qaoa_state(protocol, params)
    m = magnetization_diagonal(protocol.condition.members, protocol.n_qubits)
    return float(np.sum(np.abs(psi[m != protocol.condition.value]) ** 2))


def compare_protocols(
    instance: CompiledInstance,
    seed: int = 7,
    restarts: int = 100,
    iters_per_restart: int = 2000,
    p_exchange: int = 1,
    p_penalty: int = 2,
    penalty_weight: float = 4.0,
    jobs: int = 1,
) -> list[ComparisonRow]:
    """Optimize both protocols for the three row and three column conditions at ``c = -1, +1``."""
    unconditioned, _ = conditioned_ground_states(instance)
    rows = []
    for n, (case_id, names, c) in enumerate(comparison_cases(instance)):
        cond = instance.condition(names, c)
        ex = ProtocolSpec("exchange", instance, cond, p_exchange)
        pen = ProtocolSpec("penalty", instance, cond, p_penalty, penalty_weight)
        r_ex = optimize(ex, np.random.SeedSequence([seed, n, 0]), restarts, iters_per_restart, jobs)
        r_pen = optimize(pen, np.random.SeedSequence([seed, n, 1]), restarts, iters_per_restart, jobs)
        leak = max(sector_leakage(ex, r_ex.best_params), float(np.abs(r_ex.magnetization_trace - c).max()))
        rows.append(ComparisonRow(
            case_id, tuple(names), c, r_ex.best_p_target, r_pen.best_p_target,
            any(cond.is_satisfied(g) for g in unconditioned),
            r_ex.degenerate_target, leak, r_ex, r_pen,
        ))
    return rows
