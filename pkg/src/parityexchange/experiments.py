"""Named annealing setups and the runners that sweep them.

Every preset freezes an instance, its side conditions with their exchange
graphs, an initial configuration and the schedule.  Runners return an
:class:`ExperimentReport` that serializes to JSON (metadata, probability maps)
and CSV (curves), with an input digest in every file name and payload.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .evolve import Schedule, Trajectory, evolve_schroedinger, min_conditioned_gap, sector_spectrum
from .model import (
    CompiledInstance,
    SideCondition,
    basis_index,
    conditioned_levels,
    instance_to_dict,
    reference_instance_degeneracy,
    reference_instance_fig1,
)
from .operators import build_annealing_hamiltonian
from .reference import DEGENERACY_EIGENSTATES, FIG1_EIGENSTATES


@dataclass(frozen=True)
class Preset:
    """A frozen annealing setup."""

    name: str
    instance: Callable[[], CompiledInstance]
    condition_spec: tuple[tuple[tuple[str, ...], int, tuple[tuple[int, int], ...] | None], ...]
    initial_config: tuple[int, ...]
    gamma: float = 4.0
    t_final: float = 500.0
    labelled: Mapping[str, tuple[int, ...]] = field(default_factory=lambda: FIG1_EIGENSTATES)
    expected: str | None = None
    description: str = ""

    def build(self) -> tuple[CompiledInstance, list[SideCondition]]:
        inst = self.instance()
        conds = [inst.condition(names, value, edges) for names, value, edges in self.condition_spec]
        return inst, conds

    def schedule(self, gamma: float | None = None, t_final: float | None = None) -> Schedule:
        return Schedule(self.gamma if gamma is None else gamma, self.t_final if t_final is None else t_final)


def _deg_variant(name: str, edges, tag: str) -> Preset:
    return Preset(
        name, reference_instance_degeneracy,
        ((("0", "2", "5"), -1, edges),),
        (-1, 1, -1, -1, -1, 1, -1, -1, -1),
        t_final=3010.0, labelled=DEGENERACY_EIGENSTATES, expected="psi5",
        description=f"degenerate conditioned manifold, exchange variant {tag}",
    )


# Named sites of the 3x3 layout, rows 23-12-26 / 34-14-16 / 35-45-56.
DEGENERACY_VARIANTS = {
    "i": ((0, 2), (2, 5)),
    "ii": ((0, 2), (0, 5)),
    "iii": ((0, 5), (2, 5)),
    "iv": ((0, 2), (2, 5), (0, 5)),
}

PRESETS: dict[str, Preset] = {
    "fig2a": Preset(
        "fig2a", reference_instance_fig1,
        ((("23", "12", "26"), -1, None),),
        (-1, 1, -1, -1, 1, 1, -1, 1, -1), expected="psi0",
        description="row condition 23+12+26 = -1; conditioned ground state is the ground state",
    ),
    "fig2b": Preset(
        "fig2b", reference_instance_fig1,
        ((("34", "14", "16"), 1, None),),
        (-1, 1, 1, 1, -1, 1, -1, 1, -1), expected="psi8",
        description="row condition 34+14+16 = +1; conditioned ground state is the eighth excited state",
    ),
    "fig5a": Preset(
        "fig5a", reference_instance_fig1,
        ((("26", "14", "35"), 1, None),),
        (1, 1, -1, -1, 1, -1, 1, -1, -1), expected="psi0",
        description="diagonal condition 26+14+35 = +1, satisfied by the unconditioned ground state",
    ),
    "fig5b": Preset(
        "fig5b", reference_instance_fig1,
        ((("23", "12", "26", "34", "14", "16"), -4, None),),
        (-1, 1, -1, -1, -1, -1, -1, 1, -1), expected="psi0",
        description="six-qubit condition = -4 with several level crossings",
    ),
    "fig6": Preset(
        "fig6", reference_instance_fig1,
        ((("12", "16", "35"), 1, None),),
        (-1, -1, -1, 1, -1, 1, 1, -1, -1), expected="psi2",
        description="condition 12+16+35 = +1; conditioned ground state is the second excited state, small gap near s=0.8",
    ),
    "fig9a": Preset(
        "fig9a", reference_instance_fig1,
        ((("23", "12", "26"), -1, None), (("26", "34", "14"), -1, None)),
        (-1, -1, 1, -1, -1, 1, -1, 1, -1), expected="psi0",
        description="two conditions sharing qubit 26, union exchange graph",
    ),
    "fig9b": Preset(
        "fig9b", reference_instance_fig1,
        ((("23", "12", "26"), -1, None), (("26", "34", "14"), -1, None)),
        (-1, 1, -1, -1, 1, 1, -1, 1, -1), expected="psi3",
        description="two conditions sharing qubit 26 from an initial state that ends in the third excited state",
    ),
}
for _tag, _edges in DEGENERACY_VARIANTS.items():
    PRESETS[f"fig8-{_tag}"] = _deg_variant(f"fig8-{_tag}", _edges, _tag)


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def input_digest(payload: Mapping) -> str:
    text = json.dumps(payload, sort_keys=True, default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass
class ExperimentReport:
    experiment: str
    inputs: dict
    probabilities: dict[str, float] = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    trajectory: Trajectory | None = field(default=None, repr=False)

    def __post_init__(self):
        for name, p in self.probabilities.items():
            if not -1e-12 <= p <= 1 + 1e-9:
                raise ValueError(f"probability {name} = {p} outside [0, 1]")

    @property
    def digest(self) -> str:
        return input_digest(self.inputs)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "input_digest": self.digest,
            "inputs": self.inputs,
            "probabilities": self.probabilities,
            "summary": self.summary,
        }

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{self.experiment}-{self.digest}"
        paths = [out / f"{stem}.json"]
        paths[0].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable) + "\n")
        for name, (columns, rows) in self.tables.items():
            path = out / f"{stem}-{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["# input_digest", self.digest])
                w.writerow(columns)
                for row in rows:
                    w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
            paths.append(path)
        return paths


def _inputs(preset_name, instance, conditions, schedule, initial, dt, samples, extra=None) -> dict:
    d = {
        "preset": preset_name,
        "instance": instance_to_dict(instance, conditions),
        "gamma": float(schedule.gamma),
        "t_final": float(schedule.t_final),
        "initial_config": list(initial),
        "dt": float(dt),
        "samples": int(samples),
    }
    d.update(extra or {})
    return d


def level_crossing_summary(traj: Trajectory, spectrum, tol: float = 1e-6) -> dict:
    """How the evolved energy sits among the instantaneous levels.

    ``levels_exceeded`` is the largest ``n`` such that the evolved energy lies
    above the ``n``-th unconditioned level (0 = ground) at some sample;
    ``tracks_sector_ground`` says whether, at every sample, the evolved energy
    is closer to the lowest level of its own sector than to the second.
    """
    key = tuple(int(round(v)) for v in traj.conserved_sums[0])
    own = spectrum.levels[key]
    glob = spectrum.all_levels()
    exceeded = -1
    for k in range(len(traj.s)):
        above = np.flatnonzero(traj.energy[k] > glob[k] + tol)
        if above.size:
            exceeded = max(exceeded, int(above.max()))
    dist0 = np.abs(traj.energy - own[:, 0])
    if own.shape[1] > 1:
        dist1 = np.abs(traj.energy - own[:, 1])
        tracks = bool(np.all(dist0 <= dist1))
    else:
        tracks = True
    return {
        "sector": list(key),
        "levels_exceeded": exceeded,
        "tracks_sector_ground": tracks,
        "max_distance_to_sector_ground": float(dist0.max()),
    }


def run_sweep(
    preset: str | Preset,
    *,
    gamma: float | None = None,
    t_final: float | None = None,
    dt: float = 0.002,
    samples: int = 201,
    spectrum: bool = True,
    n_levels: int | None = None,
    initial_config: Sequence[int] | None = None,
    restrict_to_sector: bool = False,
) -> ExperimentReport:
    """Anneal a preset, record its trajectory and (optionally) the sector spectrum on the same grid."""
    p = get_preset(preset) if isinstance(preset, str) else preset
    inst, conds = p.build()
    init = tuple(initial_config) if initial_config is not None else p.initial_config
    sched = p.schedule(gamma, t_final)
    ham = build_annealing_hamiltonian(inst, conds, init)
    traj = evolve_schroedinger(
        inst, conds, sched, init, dt, samples=samples, track=p.labelled,
        restrict_to_sector=restrict_to_sector, hamiltonian=ham,
    )
    probs = traj.probabilities(p.labelled)
    levels = conditioned_levels(inst, conds)
    gs_states, gs_energy = levels[0][1], levels[0][0]
    names = {cfg: name for name, cfg in p.labelled.items()}
    summary = {
        "expected": p.expected,
        "final_best": max(probs, key=probs.get),
        "conditioned_ground_states": [names.get(tuple(c), list(c)) for c in gs_states],
        "conditioned_ground_energy": gs_energy,
        "p_conditioned_ground": float(sum(traj.probability(c) for c in gs_states)),
        "max_condition_deviation": [float(v) for v in np.abs(traj.magnetization - [c.value for c in conds]).max(axis=0)],
        "conserved_sets": [list(c) for c in traj.conserved_sets],
        "max_conserved_drift": [float(v) for v in np.ptp(traj.conserved_sums, axis=0)],
        "max_norm_drift": traj.max_norm_drift,
    }
    tables = {"trajectory": (traj.csv_columns(), traj.csv_rows())}
    if spectrum:
        spec = sector_spectrum(ham, sched, traj.s, n_levels)
        summary["level_crossings"] = level_crossing_summary(traj, spec)
        tables["spectrum"] = (["s", "sector", "level", "energy", "delta_E"], list(spec.csv_rows()))
    return ExperimentReport(
        p.name,
        _inputs(p.name, inst, conds, sched, init, dt, samples),
        probabilities=probs, tables=tables, summary=summary, trajectory=traj,
    )


# ---------------------------------------------------------------------------
# t_f scans
# ---------------------------------------------------------------------------


def _final_probabilities(args) -> np.ndarray:
    inst, conds, gamma, tf, init, dt, samples, configs, exchange = args
    if tf == 0:
        out = np.zeros(len(configs))
        b0 = basis_index(init)
        for j, cfg in enumerate(configs):
            out[j] = float(basis_index(cfg) == b0)
        return out
    traj = evolve_schroedinger(
        inst, conds, Schedule(gamma, tf), init, dt, samples=samples,
        exchange_coefficient=exchange, restrict_to_sector=True,
    )
    return np.array([traj.probability(c) for c in configs])


def _map(fn, items, jobs: int):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def success_vs_tf(
    instance: CompiledInstance,
    conditions: Sequence[SideCondition],
    initial_config: Sequence[int],
    gamma: float,
    tf_list: Sequence[float],
    *,
    dt: float = 0.002,
    samples: int = 21,
    jobs: int = 1,
) -> ExperimentReport:
    """Final probabilities of the conditioned ground and first excited levels per ``t_f``.

    Degenerate levels are summed over their members.  Sweeps integrate inside
    the initial sector, which no term of the Hamiltonian leaves.
    """
    tf_list = [float(t) for t in tf_list]
    if not tf_list:
        raise ValueError("tf_list is empty")
    levels = conditioned_levels(instance, conditions)
    gs = levels[0][1]
    first = levels[1][1] if len(levels) > 1 else []
    configs = list(gs) + list(first)
    args = [(instance, list(conditions), gamma, tf, tuple(initial_config), dt, samples, configs, 0.5) for tf in tf_list]
    results = _map(_final_probabilities, args, jobs)
    rows = []
    for tf, pr in zip(tf_list, results):
        rows.append([tf, float(pr[: len(gs)].sum()), float(pr[len(gs):].sum())])
    ham = build_annealing_hamiltonian(instance, conditions, initial_config)
    spec = sector_spectrum(ham, Schedule(gamma, 1.0), 201, n_levels=2)
    gap, s_gap = min_conditioned_gap(spec, ham.initial_sector)
    return ExperimentReport(
        "tf-scan",
        _inputs(None, instance, conditions, Schedule(gamma, 0.0), initial_config, dt, samples, {"tf_list": tf_list}),
        tables={"curve": (["t_f", "P_gs", "P_1"], rows)},
        summary={
            "conditioned_ground_states": [list(c) for c in gs],
            "first_excited_conditioned": [list(c) for c in first],
            "delta_min": gap, "s_at_delta_min": s_gap,
        },
    )


def gap_scan(
    instance: CompiledInstance,
    conditions: Sequence[SideCondition],
    initial_config: Sequence[int],
    gammas: Sequence[float],
    s_samples: int = 201,
) -> ExperimentReport:
    """Minimum conditioned gap for every ``gamma``."""
    ham = build_annealing_hamiltonian(instance, conditions, initial_config)
    rows = []
    for g in gammas:
        spec = sector_spectrum(ham, Schedule(float(g), 1.0), s_samples, n_levels=2)
        gap, s_gap = min_conditioned_gap(spec, ham.initial_sector)
        rows.append([float(g), gap, s_gap])
    return ExperimentReport(
        "gap-scan",
        _inputs(None, instance, conditions, Schedule(0.0, 0.0), initial_config, 0.0, s_samples,
                {"gammas": [float(g) for g in gammas]}),
        tables={"gaps": (["gamma", "delta_min", "s_at_min"], rows)},
        summary={"delta_min": {repr(r[0]): r[1] for r in rows}},
    )


def degeneracy_distribution(
    variant: str,
    tf_list: Sequence[float] | None = None,
    initial_config: Sequence[int] | None = None,
    *,
    gamma: float = 4.0,
    dt: float = 0.002,
    samples: int = 21,
    jobs: int = 1,
) -> ExperimentReport:
    """Final probabilities on the degenerate conditioned levels for one exchange graph.

    ``tf_list`` defaults to 50 uniform points from 0 to 3010.
    """
    if variant not in DEGENERACY_VARIANTS:
        raise KeyError(f"unknown exchange variant {variant!r}; choose from {sorted(DEGENERACY_VARIANTS)}")
    p = PRESETS[f"fig8-{variant}"]
    inst, conds = p.build()
    init = tuple(initial_config) if initial_config is not None else p.initial_config
    tf_list = list(np.linspace(0.0, 3010.0, 50)) if tf_list is None else [float(t) for t in tf_list]
    names = ("psi3", "psi4", "psi5")
    configs = [DEGENERACY_EIGENSTATES[n] for n in names]
    args = [(inst, conds, gamma, tf, init, dt, samples, configs, 0.5) for tf in tf_list]
    results = _map(_final_probabilities, args, jobs)
    rows = [[tf, *map(float, pr), float(pr.sum())] for tf, pr in zip(tf_list, results)]
    return ExperimentReport(
        f"degeneracy-{variant}",
        _inputs(p.name, inst, conds, Schedule(gamma, 0.0), init, dt, samples,
                {"tf_list": tf_list, "exchange_edges": [list(e) for e in conds[0].exchange_edges]}),
        probabilities=dict(zip(names, map(float, results[-1]))),
        tables={"distribution": (["t_f", *(f"P_{n}" for n in names), "P_total"], rows)},
        summary={"variant": variant},
    )


def overlapping_conditions_run(
    initial_config: Sequence[int],
    *,
    conserved_set: Sequence[int] | None = None,
    t_final: float = 500.0,
    gamma: float = 4.0,
    dt: float = 0.002,
    samples: int = 201,
) -> ExperimentReport:
    """Anneal with the two conditions sharing qubit 26 and their union exchange graph.

    ``conserved_set`` names the qubits whose sum is reported as the conserved
    quantity; it defaults to the union of the condition members.
    """
    p = PRESETS["fig9a"]
    inst, conds = p.build()
    init = tuple(initial_config)
    union = sorted({m for c in conds for m in c.members}) if conserved_set is None else sorted(conserved_set)
    sched = Schedule(gamma, t_final)
    traj = evolve_schroedinger(inst, conds, sched, init, dt, samples=samples, track=p.labelled)
    probs = traj.probabilities(p.labelled)
    spins = np.asarray(init)
    union_sum_init = int(spins[union].sum())
    union_track = traj.sz[:, union].sum(axis=1)
    per_cond = traj.magnetization
    return ExperimentReport(
        "overlap",
        _inputs("fig9", inst, conds, sched, init, dt, samples, {"conserved_set": union}),
        probabilities=probs,
        tables={"trajectory": (traj.csv_columns() + ["m_union"],
                               [row + [float(u)] for row, u in zip(traj.csv_rows(), union_track)])},
        summary={
            "final_best": max(probs, key=probs.get),
            "conserved_set": union,
            "union_sum_initial": union_sum_init,
            "union_max_deviation": float(np.abs(union_track - union_sum_init).max()),
            "per_condition_max_deviation": [float(v) for v in np.abs(per_cond - [c.value for c in conds]).max(axis=0)],
        },
        trajectory=traj,
    )


__all__ = [
    "DEGENERACY_VARIANTS", "ExperimentReport", "PRESETS", "Preset", "degeneracy_distribution",
    "gap_scan", "get_preset", "input_digest", "level_crossing_summary", "overlapping_conditions_run",
    "run_sweep", "success_vs_tf",
]
