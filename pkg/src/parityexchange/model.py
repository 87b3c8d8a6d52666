"""Parity-encoded problem data: qubits, parity constraints, side conditions.

Basis convention used throughout the package: qubit ``i`` carries spin
``s_i in {+1, -1}`` and basis index ``b = sum_i bit_i << i`` with
``bit_i = (1 - s_i) / 2`` (bit 0 <-> spin +1, little-endian).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

ENERGY_ATOL = 1e-9


class InstanceError(ValueError):
    """An instance, constraint or side condition violates its invariants."""

    def __init__(self, problems: str | Sequence[str]):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


class InfeasibleError(ValueError):
    """No basis configuration satisfies all parity constraints and side conditions."""


# ---------------------------------------------------------------------------
# basis helpers
# ---------------------------------------------------------------------------


def spin_table(n_qubits: int) -> np.ndarray:
    """Spins of every basis state, shape ``(2**n_qubits, n_qubits)``, int8."""
    idx = np.arange(1 << n_qubits)
    bits = (idx[:, None] >> np.arange(n_qubits)) & 1
    return (1 - 2 * bits).astype(np.int8)


def basis_index(config: Sequence[int]) -> int:
    """Basis index of a spin configuration."""
    b = 0
    for i, s in enumerate(config):
        if s not in (1, -1):
            raise ValueError(f"spin {i} has value {s}, expected +1 or -1")
        if s == -1:
            b |= 1 << i
    return b


def config_of(index: int, n_qubits: int) -> tuple[int, ...]:
    return tuple(1 - 2 * ((index >> i) & 1) for i in range(n_qubits))


def _as_config(config: Sequence[int], n_qubits: int) -> np.ndarray:
    arr = np.asarray(config)
    if arr.shape != (n_qubits,):
        raise ValueError(f"configuration has shape {arr.shape}, expected ({n_qubits},)")
    if not np.all(np.abs(arr) == 1):
        raise ValueError("configuration entries must be +1 or -1")
    return arr.astype(np.int64)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


def _sorted_unique(values: Iterable[int], what: str) -> tuple[int, ...]:
    vals = [int(v) for v in values]
    if len(set(vals)) != len(vals):
        raise InstanceError(f"{what} contains duplicates: {vals}")
    return tuple(sorted(vals))


@dataclass(frozen=True)
class LogicalProblem:
    """k-body spin Hamiltonian ``sum_S coeff_S prod_{i in S} s_i`` over ``n_spins`` spins."""

    n_spins: int
    terms: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self):
        seen = set()
        clean = []
        for subset, coeff in self.terms:
            subset = tuple(int(i) for i in subset)
            if not subset:
                raise InstanceError("logical term with empty index set")
            if list(subset) != sorted(set(subset)):
                raise InstanceError(f"logical term {subset} must be sorted and duplicate-free")
            if subset[-1] >= self.n_spins or subset[0] < 0:
                raise InstanceError(f"logical term {subset} out of range for {self.n_spins} spins")
            if subset in seen:
                raise InstanceError(f"duplicate logical term {subset}")
            seen.add(subset)
            clean.append((subset, float(coeff)))
        object.__setattr__(self, "terms", tuple(clean))

    def energy(self, spins: Sequence[int]) -> float:
        s = _as_config(spins, self.n_spins)
        return float(sum(c * np.prod(s[list(S)]) for S, c in self.terms))


@dataclass(frozen=True)
class ParityQubit:
    """Physical qubit encoding the product of the logical spins in ``label``."""

    label: tuple[int, ...]

    def __post_init__(self):
        label = _sorted_unique(self.label, "parity qubit label")
        if not label:
            raise InstanceError("parity qubit label is empty")
        object.__setattr__(self, "label", label)

    @property
    def name(self) -> str:
        if all(0 <= i < 10 for i in self.label):
            return "".join(str(i) for i in self.label)
        return "_".join(str(i) for i in self.label)

    def value(self, logical: np.ndarray) -> int:
        return int(np.prod(logical[list(self.label)]))


@dataclass(frozen=True)
class ParityConstraint:
    members: tuple[int, ...]
    strength: float = -4.0

    def __post_init__(self):
        object.__setattr__(self, "members", _sorted_unique(self.members, "constraint members"))
        object.__setattr__(self, "strength", float(self.strength))


def default_chain(members: Sequence[int]) -> tuple[tuple[int, int], ...]:
    return tuple((int(a), int(b)) for a, b in zip(members[:-1], members[1:]))


@dataclass(frozen=True)
class SideCondition:
    """Hard constraint ``sum_{i in members} s_i = value`` with its exchange graph.

    ``members`` keeps the order it was given in: the first member is the seed
    qubit for the digital protocol and the default exchange graph is the chain
    through the members in that order.
    """

    members: tuple[int, ...]
    value: int
    exchange_edges: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if len(set(members)) != len(members):
            raise InstanceError(f"side condition members contain duplicates: {list(members)}")
        if not members:
            raise InstanceError("side condition has no members")
        value = int(self.value)
        if value != self.value:
            raise InstanceError(f"side condition value {self.value} is not an integer")
        n = len(members)
        if abs(value) > n or (value - n) % 2:
            raise InstanceError(
                f"side condition value {value} unreachable with {n} members "
                "(need |c| <= |C| and c = |C| mod 2)"
            )
        edges = default_chain(members) if self.exchange_edges is None else tuple(
            (int(a), int(b)) for a, b in self.exchange_edges
        )
        mset = set(members)
        for a, b in edges:
            if a == b or a not in mset or b not in mset:
                raise InstanceError(f"exchange edge ({a}, {b}) must join two distinct members of {list(members)}")
        if n > 1 and not _is_connected(members, edges):
            raise InstanceError(f"exchange graph {list(edges)} does not connect members {list(members)}")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "exchange_edges", edges)

    @property
    def member_set(self) -> frozenset[int]:
        return frozenset(self.members)

    def residual(self, config: Sequence[int]) -> int:
        s = np.asarray(config)
        return int(s[list(self.members)].sum()) - self.value

    def is_satisfied(self, config: Sequence[int]) -> bool:
        return self.residual(config) == 0

    def with_edges(self, edges: Sequence[tuple[int, int]]) -> "SideCondition":
        return SideCondition(self.members, self.value, tuple(edges))


def _is_connected(nodes: Sequence[int], edges: Sequence[tuple[int, int]]) -> bool:
    return len(graph_components(nodes, edges)) == 1


def graph_components(nodes: Sequence[int], edges: Sequence[tuple[int, int]]) -> list[tuple[int, ...]]:
    """Connected components of the graph on ``nodes``, each sorted, ordered by smallest node."""
    nodes = sorted(set(int(n) for n in nodes))
    if not nodes:
        return []
    pos = {n: k for k, n in enumerate(nodes)}
    rows = [pos[a] for a, _ in edges]
    cols = [pos[b] for _, b in edges]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(nodes), len(nodes)))
    n_comp, labels = connected_components(adj, directed=False)
    comps = [tuple(n for n, lab in zip(nodes, labels) if lab == c) for c in range(n_comp)]
    return sorted(comps)


@dataclass(frozen=True)
class CompiledInstance:
    """Parity-compiled problem: K qubits, local fields and parity constraints."""

    qubits: tuple[ParityQubit, ...]
    fields: tuple[float, ...]
    constraints: tuple[ParityConstraint, ...]
    positions: tuple[tuple[int, int], ...] | None = None
    n_logical: int | None = None
    degeneracy: int | None = None
    names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(q if isinstance(q, ParityQubit) else ParityQubit(tuple(q)) for q in self.qubits))
        object.__setattr__(self, "fields", tuple(float(f) for f in self.fields))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        problems = []
        K = len(self.qubits)
        if len(self.fields) != K:
            problems.append(f"{len(self.fields)} fields given for {K} qubits")
        for n, con in enumerate(self.constraints):
            if any(m < 0 or m >= K for m in con.members):
                problems.append(f"constraint {n} members {list(con.members)} out of range for {K} qubits")
            elif not constraint_is_valid(con.members, self.qubits):
                names = [self.qubits[m].name for m in con.members]
                problems.append(f"constraint {n} over qubits {names} is not a valid parity constraint")
        if self.positions is not None and len(self.positions) != K:
            problems.append(f"{len(self.positions)} positions given for {K} qubits")
        if self.n_logical is not None and self.degeneracy is not None:
            expected = K - self.n_logical + self.degeneracy
            if expected != len(self.constraints):
                problems.append(
                    f"expected K - N + D = {expected} constraints, found {len(self.constraints)}"
                )
        if self.names is not None and len(self.names) != K:
            problems.append(f"{len(self.names)} names given for {K} qubits")
        if problems:
            raise InstanceError(problems)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def qubit_names(self) -> tuple[str, ...]:
        return self.names if self.names is not None else tuple(q.name for q in self.qubits)

    def index_of(self, name: str) -> int:
        return self.qubit_names.index(str(name))

    def condition(self, names: Sequence[str | int], value: int, edges=None) -> SideCondition:
        """Side condition from qubit names (e.g. ``["23", "12", "26"]``) in the given order."""
        members = [n if isinstance(n, int) else self.index_of(n) for n in names]
        return SideCondition(tuple(members), value, edges)

    def with_fields(self, fields: Sequence[float], names=None) -> "CompiledInstance":
        return CompiledInstance(
            self.qubits, tuple(fields), self.constraints, self.positions,
            self.n_logical, self.degeneracy, names,
        )


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def constraint_is_valid(members: Iterable[int], qubits: Sequence[ParityQubit]) -> bool:
    """True iff every logical spin occurs an even number of times across the member labels."""
    odd: set[int] = set()
    for m in members:
        if m < 0 or m >= len(qubits):
            raise IndexError(f"qubit index {m} out of range for {len(qubits)} qubits")
        odd ^= set(qubits[m].label)
    return not odd


def logical_to_parity(logical: Sequence[int], qubits: Sequence[ParityQubit]) -> np.ndarray:
    s = np.asarray(logical)
    return np.array([q.value(s) for q in qubits], dtype=np.int64)


def field_energy(config: Sequence[int], instance: CompiledInstance) -> float:
    s = _as_config(config, instance.n_qubits)
    return float(np.dot(instance.fields, s))


def constraint_energy(config: Sequence[int], instance: CompiledInstance) -> float:
    s = _as_config(config, instance.n_qubits)
    return float(sum(c.strength * np.prod(s[list(c.members)]) for c in instance.constraints))


def parity_energy(config: Sequence[int], instance: CompiledInstance) -> float:
    """Field plus constraint energy of a classical parity configuration.

    The eigenenergies quoted for constraint-satisfying states are the field
    part alone, see :func:`field_energy`.
    """
    return field_energy(config, instance) + constraint_energy(config, instance)


def satisfies_constraints(config: Sequence[int], instance: CompiledInstance) -> bool:
    s = _as_config(config, instance.n_qubits)
    return all(np.prod(s[list(c.members)]) == 1 for c in instance.constraints)


def feasible_mask(instance: CompiledInstance, conditions: Sequence[SideCondition] = ()) -> np.ndarray:
    """Boolean mask over basis indices: all constraint products +1 and all condition sums met."""
    spins = spin_table(instance.n_qubits)
    mask = np.ones(len(spins), dtype=bool)
    for con in instance.constraints:
        mask &= np.prod(spins[:, list(con.members)], axis=1) == 1
    for cond in conditions:
        mask &= spins[:, list(cond.members)].sum(axis=1) == cond.value
    return mask


def conditioned_levels(
    instance: CompiledInstance, conditions: Sequence[SideCondition] = ()
) -> list[tuple[float, list[tuple[int, ...]]]]:
    """Feasible configurations grouped by field energy, lowest first."""
    K = instance.n_qubits
    idx = np.flatnonzero(feasible_mask(instance, conditions))
    if idx.size == 0:
        raise InfeasibleError("no configuration satisfies all parity constraints and side conditions")
    spins = spin_table(K)[idx]
    energies = spins @ np.asarray(instance.fields)
    order = np.argsort(energies, kind="stable")
    levels: list[tuple[float, list[tuple[int, ...]]]] = []
    for k in order:
        e = float(energies[k])
        cfg = tuple(int(v) for v in spins[k])
        if levels and abs(levels[-1][0] - e) <= ENERGY_ATOL:
            levels[-1][1].append(cfg)
        else:
            levels.append((e, [cfg]))
    return levels


def conditioned_ground_states(
    instance: CompiledInstance, conditions: Sequence[SideCondition] = ()
) -> tuple[list[tuple[int, ...]], float]:
    """Brute-force oracle: lowest field-energy configurations meeting all constraints and conditions."""
    energy, states = conditioned_levels(instance, conditions)[0]
    return states, energy


# ---------------------------------------------------------------------------
# reference instances
# ---------------------------------------------------------------------------

FIG1_LABELS = ((2, 3), (1, 2), (2, 6), (3, 4), (1, 4), (1, 6), (3, 5), (4, 5), (5, 6))
FIG1_POSITIONS = tuple((r, c) for r in range(3) for c in range(3))
FIG1_FIELDS = (0.8, 0.6, 1.0, 1.0, 0.7, 0.7, 0.1, 0.6, 0.8)
DEGENERACY_FIELDS = (1.0, -0.5, 1.0, -1.0, 0.5, -0.5, -1.0, -1.0, 1.0)
# plaquettes of the 3x3 layout: {23,12,34,14}, {12,26,16}, {34,35,45}, {14,16,45,56}
FIG1_CONSTRAINTS = ((0, 1, 3, 4), (1, 2, 5), (3, 6, 7), (4, 5, 7, 8))


def reference_instance_fig1(strength: float = -4.0) -> CompiledInstance:
    """Nine-qubit instance on a 3x3 grid, qubits ordered (23, 12, 26, 34, 14, 16, 35, 45, 56)."""
    return CompiledInstance(
        qubits=tuple(ParityQubit(lab) for lab in FIG1_LABELS),
        fields=FIG1_FIELDS,
        constraints=tuple(ParityConstraint(m, strength) for m in FIG1_CONSTRAINTS),
        positions=FIG1_POSITIONS,
        n_logical=6,
        degeneracy=1,
    )


def reference_instance_degeneracy(strength: float = -4.0) -> CompiledInstance:
    """Same layout as :func:`reference_instance_fig1` with the degenerate field vector, sites named 0..8."""
    return reference_instance_fig1(strength).with_fields(
        DEGENERACY_FIELDS, names=tuple(str(i) for i in range(9))
    )


BUILTIN_INSTANCES = {
    "fig1": reference_instance_fig1,
    "degeneracy": reference_instance_degeneracy,
}


# ---------------------------------------------------------------------------
# JSON instance files
# ---------------------------------------------------------------------------


def _line_of(text: str, key: str, item: int | None = None) -> int | None:
    """Best-effort line number of ``key`` (and its ``item``-th list element) in raw JSON text."""
    pos = text.find(f'"{key}"')
    if pos < 0:
        return None
    if item is not None:
        try:
            start = text.index("[", pos) + 1
        except ValueError:
            return None
        depth = 0
        k = 0
        p = start
        while p < len(text):
            ch = text[p]
            if ch in "[{":
                if depth == 0 and k == item:
                    return text.count("\n", 0, p) + 1
                depth += 1
            elif ch in "]}":
                if depth == 0:
                    break
                depth -= 1
            elif ch == "," and depth == 0:
                k += 1
            p += 1
        return None
    return text.count("\n", 0, pos) + 1


def _where(text, key, item=None) -> str:
    line = _line_of(text, key, item)
    loc = f"{key}[{item}]" if item is not None else key
    return f"line {line}: {loc}" if line else loc


def parse_instance(text: str) -> tuple[CompiledInstance, list[SideCondition]]:
    """Parse and validate an instance document; every problem is reported on its own line."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(doc, dict):
        raise InstanceError("line 1: top level must be an object")
    problems: list[str] = []
    for key in ("qubits", "fields"):
        if key not in doc:
            problems.append(f"missing key '{key}'")
    if problems:
        raise InstanceError(problems)

    qubits = []
    for n, lab in enumerate(doc["qubits"]):
        try:
            qubits.append(ParityQubit(tuple(lab)))
        except (InstanceError, TypeError) as exc:
            problems.append(f"{_where(text, 'qubits', n)}: {exc}")
    fields = doc["fields"]
    if not all(isinstance(f, (int, float)) for f in fields):
        problems.append(f"{_where(text, 'fields')}: fields must be numbers")
    elif len(fields) != len(doc["qubits"]):
        problems.append(f"{_where(text, 'fields')}: {len(fields)} fields for {len(doc['qubits'])} qubits")

    constraints = []
    for n, con in enumerate(doc.get("constraints", [])):
        try:
            c = ParityConstraint(tuple(con["members"]), con.get("strength", -4.0))
        except (InstanceError, KeyError, TypeError) as exc:
            problems.append(f"{_where(text, 'constraints', n)}: {exc}")
            continue
        if any(m < 0 or m >= len(qubits) for m in c.members):
            problems.append(f"{_where(text, 'constraints', n)}: members {list(c.members)} out of range")
        elif len(qubits) == len(doc["qubits"]) and not constraint_is_valid(c.members, qubits):
            problems.append(f"{_where(text, 'constraints', n)}: not a valid parity constraint")
        constraints.append(c)

    conditions = []
    for n, sc in enumerate(doc.get("side_conditions", [])):
        try:
            cond = SideCondition(tuple(sc["members"]), sc["value"], sc.get("exchange_edges"))
        except (InstanceError, KeyError, TypeError) as exc:
            problems.append(f"{_where(text, 'side_conditions', n)}: {exc}")
            continue
        if any(m < 0 or m >= len(qubits) for m in cond.members):
            problems.append(f"{_where(text, 'side_conditions', n)}: members {list(cond.members)} out of range")
        conditions.append(cond)

    positions = doc.get("positions")
    if problems:
        raise InstanceError(problems)
    instance = CompiledInstance(
        qubits=tuple(qubits),
        fields=tuple(fields),
        constraints=tuple(constraints),
        positions=tuple(tuple(p) for p in positions) if positions else None,
        n_logical=doc.get("n_logical"),
        degeneracy=doc.get("degeneracy"),
    )
    return instance, conditions


def load_instance(path: str | Path) -> tuple[CompiledInstance, list[SideCondition]]:
    return parse_instance(Path(path).read_text())


def instance_to_dict(instance: CompiledInstance, conditions: Sequence[SideCondition] = ()) -> dict:
    doc = {
        "qubits": [list(q.label) for q in instance.qubits],
        "fields": list(instance.fields),
        "constraints": [{"members": list(c.members), "strength": c.strength} for c in instance.constraints],
        "side_conditions": [
            {"members": list(c.members), "value": c.value, "exchange_edges": [list(e) for e in c.exchange_edges]}
            for c in conditions
        ],
    }
    if instance.positions is not None:
        doc["positions"] = [list(p) for p in instance.positions]
    if instance.n_logical is not None:
        doc["n_logical"] = instance.n_logical
    if instance.degeneracy is not None:
        doc["degeneracy"] = instance.degeneracy
    return doc


def all_logical_configs(n_spins: int) -> np.ndarray:
    return np.array(list(itertools.product((1, -1), repeat=n_spins)), dtype=np.int64)
