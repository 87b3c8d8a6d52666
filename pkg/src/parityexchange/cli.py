"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or failed validation, 2 numeric
tolerance failure (integrator norm drift or a requested probability floor
not reached).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .evolve import ConditionViolationError, NormDriftError, Schedule, sector_spectrum
from .experiments import (
    DEGENERACY_VARIANTS,
    PRESETS,
    ExperimentReport,
    Preset,
    _jsonable,
    degeneracy_distribution,
    gap_scan,
    get_preset,
    overlapping_conditions_run,
    run_sweep,
    success_vs_tf,
)
from .model import BUILTIN_INSTANCES, InfeasibleError, InstanceError, instance_to_dict, load_instance
from .operators import build_annealing_hamiltonian
from .qaoa import compare_protocols
from .reference import fixture_report

DEFAULT_SEED = 7


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _spins(text: str) -> tuple[int, ...]:
    vals = tuple(int(v) for v in text.split(","))
    if not all(v in (-1, 1) for v in vals):
        raise argparse.ArgumentTypeError("spins must be +1 or -1")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--builtin", choices=sorted(BUILTIN_INSTANCES), help="built-in instance")
    src.add_argument("--instance", type=Path, help="instance JSON file")
    common.add_argument("--preset", help=f"named setup, one of {', '.join(sorted(PRESETS))}")
    common.add_argument("--gamma", type=_positive(float), help="drive amplitude (preset default 4)")
    common.add_argument("--t-final", type=_positive(float), help="annealing time")
    common.add_argument("--dt", type=_positive(float), default=0.002, help="maximum integrator step")
    common.add_argument("--samples", type=_positive(int), default=201, help="points on the s grid")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed")
    common.add_argument("--jobs", type=_positive(int), default=1, help="worker processes")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--init", type=_spins, help="initial spins, comma separated (with --instance)")

    parser = argparse.ArgumentParser(prog="parityexchange", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check instance invariants and eigenstate listings")
    p = sub.add_parser("anneal", parents=[common], help="anneal a preset and record the trajectory")
    p.add_argument("--min-probability", type=float, help="exit 2 if the conditioned ground state ends below this")
    p.add_argument("--no-spectrum", action="store_true", help="skip the instantaneous spectrum")
    p = sub.add_parser("spectrum", parents=[common], help="sector-resolved instantaneous spectrum")
    p.add_argument("--levels", type=_positive(int), help="levels kept per sector")
    p = sub.add_parser("gap-scan", parents=[common], help="minimum conditioned gap per gamma")
    p.add_argument("--gammas", type=_float_list, default=[4.0, 5.0, 6.0])
    p = sub.add_parser("tf-scan", parents=[common], help="final probabilities versus annealing time")
    p.add_argument("--tf-list", type=_float_list, default=[50, 100, 250, 500, 1000, 2000, 4000])
    p = sub.add_parser("degeneracy", parents=[common], help="distribution over the degenerate conditioned levels")
    p.add_argument("--variant", choices=[*DEGENERACY_VARIANTS, "all"], default="all")
    p.add_argument("--tf-list", type=_float_list, help="annealing times (default 50 points up to 3010)")
    p = sub.add_parser("overlap", parents=[common], help="two side conditions sharing a qubit")
    p.add_argument("--start", choices=["a", "b"], default="a", help="which reference initial state")
    p.add_argument("--conserved-set", help="comma-separated qubit names whose sum is reported")
    p = sub.add_parser("qaoa-compare", parents=[common], help="exchange versus penalty protocol")
    p.add_argument("--restarts", type=_positive(int), default=100)
    p.add_argument("--iters", type=_positive(int), default=2000)
    return parser


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _metadata(args: argparse.Namespace, digests: list[str], files: list[Path]) -> dict:
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())}
    return {"version": __version__, "parameters": params, "input_digests": digests,
            "files": sorted(p.name for p in files)}


def _preset_or_instance(args, default_preset: str | None = None):
    """(instance, conditions, initial configuration, gamma, t_final) from the flags."""
    if args.instance is not None:
        inst, conds = load_instance(args.instance)
        if args.init is None:
            raise InstanceError("--init is required with --instance")
        return inst, conds, args.init, args.gamma or 4.0, args.t_final or 500.0, None
    preset = get_preset(args.preset or default_preset) if (args.preset or default_preset) else None
    if preset is None:
        raise InstanceError("choose --preset or --instance")
    inst, conds = preset.build()
    if args.builtin and inst != BUILTIN_INSTANCES[args.builtin]():
        raise InstanceError(f"preset {preset.name} does not use the built-in instance {args.builtin}")
    init = args.init or preset.initial_config
    return inst, conds, init, args.gamma or preset.gamma, args.t_final or preset.t_final, preset


def cmd_validate(args) -> tuple[int, list[ExperimentReport]]:
    if args.instance is not None:
        inst, conds = load_instance(args.instance)
        print(f"{args.instance}: {inst.n_qubits} qubits, {len(inst.constraints)} constraints, "
              f"{len(conds)} side conditions: valid")
        return 0, []
    name = args.builtin or "fig1"
    rows = fixture_report(name)
    ok = True
    table = []
    for r in rows:
        status = "ok" if r.ok(1e-12) else "MISMATCH"
        ok &= r.ok(1e-12)
        note = "" if r.satisfies_constraints else "  violates a parity constraint"
        print(f"{r.name}: listed {r.listed_energy:+.4f}  computed {r.field_energy:+.4f}  {status}{note}")
        table.append([r.name, r.listed_energy, r.field_energy, int(r.satisfies_constraints), status])
    print(f"{name}: {'all listed eigenstates confirmed' if ok else 'listing disagrees with the instance'}")
    report = ExperimentReport(
        f"validate-{name}", {"builtin": name, "instance": instance_to_dict(BUILTIN_INSTANCES[name]())},
        tables={"fixtures": (["state", "listed", "computed", "satisfies_constraints", "status"], table)},
        summary={"all_ok": bool(ok)},
    )
    return (0 if ok else 1), [report]


def cmd_anneal(args):
    inst, conds, init, gamma, tf, preset = _preset_or_instance(args)
    if preset is None:
        preset = Preset("custom", lambda: inst, tuple((tuple(c.members), c.value, c.exchange_edges) for c in conds),
                        tuple(init), gamma, tf, labelled={})
        report = run_sweep(preset, dt=args.dt, samples=args.samples, spectrum=not args.no_spectrum)
    else:
        report = run_sweep(preset, gamma=gamma, t_final=tf, dt=args.dt, samples=args.samples,
                           spectrum=not args.no_spectrum, initial_config=init)
    s = report.summary
    print(f"{report.experiment}: most likely final state {s['final_best']}, "
          f"P(conditioned ground) = {s['p_conditioned_ground']:.6f}")
    code = 0
    if args.min_probability is not None and s["p_conditioned_ground"] < args.min_probability:
        print(f"conditioned ground state probability below {args.min_probability}", file=sys.stderr)
        code = 2
    return code, [report]


def cmd_spectrum(args):
    inst, conds, init, gamma, tf, preset = _preset_or_instance(args)
    ham = build_annealing_hamiltonian(inst, conds, init)
    spec = sector_spectrum(ham, Schedule(gamma, tf), args.samples, args.levels)
    inputs = {"instance": instance_to_dict(inst, conds), "initial_config": list(init), "gamma": gamma,
              "samples": args.samples, "levels": args.levels}
    report = ExperimentReport(
        f"spectrum-{preset.name if preset else 'custom'}", inputs,
        tables={"spectrum": (["s", "sector", "level", "energy", "delta_E"], list(spec.csv_rows()))},
        summary={"sectors": [list(k) for k in spec.sectors], "initial_sector": list(ham.initial_sector)},
    )
    print(f"{len(spec.sectors)} sectors, {len(spec.s)} samples")
    return 0, [report]


def cmd_gap_scan(args):
    inst, conds, init, _, _, _ = _preset_or_instance(args, "fig6")
    report = gap_scan(inst, conds, init, args.gammas, args.samples)
    for g, gap, s in report.tables["gaps"][1]:
        print(f"gamma {g:g}: delta_min {gap:.6f} at s = {s:.4f}")
    return 0, [report]


def cmd_tf_scan(args):
    inst, conds, init, gamma, _, _ = _preset_or_instance(args, "fig6")
    report = success_vs_tf(inst, conds, init, gamma, args.tf_list, dt=args.dt, jobs=args.jobs)
    for tf, pg, p1 in report.tables["curve"][1]:
        print(f"t_f {tf:g}: P_gs {pg:.6f}  P_1 {p1:.6f}")
    return 0, [report]


def cmd_degeneracy(args):
    variants = list(DEGENERACY_VARIANTS) if args.variant == "all" else [args.variant]
    reports = []
    for v in variants:
        r = degeneracy_distribution(v, args.tf_list, args.init, gamma=args.gamma or 4.0, dt=args.dt, jobs=args.jobs)
        last = r.tables["distribution"][1][-1]
        print(f"variant {v}: t_f {last[0]:g}  P(psi3) {last[1]:.4f}  P(psi4) {last[2]:.4f}  "
              f"P(psi5) {last[3]:.4f}  total {last[4]:.4f}")
        reports.append(r)
    return 0, reports


def cmd_overlap(args):
    start = {"a": PRESETS["fig9a"], "b": PRESETS["fig9b"]}[args.start]
    init = args.init or start.initial_config
    inst, _ = start.build()
    cset = None
    if args.conserved_set:
        cset = [inst.index_of(n.strip()) for n in args.conserved_set.split(",")]
    r = overlapping_conditions_run(init, conserved_set=cset, t_final=args.t_final or 500.0,
                                   gamma=args.gamma or 4.0, dt=args.dt, samples=args.samples)
    s = r.summary
    print(f"final state {s['final_best']} (P = {r.probabilities[s['final_best']]:.6f}); "
          f"conserved sum {s['union_sum_initial']}, max deviation {s['union_max_deviation']:.2e}")
    return 0, [r]


def cmd_qaoa_compare(args):
    inst = BUILTIN_INSTANCES[args.builtin or "fig1"]() if args.instance is None else load_instance(args.instance)[0]
    rows = compare_protocols(inst, seed=args.seed, restarts=args.restarts, iters_per_restart=args.iters, jobs=args.jobs)
    inputs = {"instance": instance_to_dict(inst), "seed": args.seed, "restarts": args.restarts, "iters": args.iters}
    table = [[r.case_id, " ".join(r.members), r.c, r.p_exchange, r.p_penalty] for r in rows]
    traces = {
        r.case_id: {
            "exchange_edges": [list(e) for e in r.exchange.exchange_edges],
            "degenerate_target": r.degenerate_target,
            "exchange": r.exchange.best_curve(),
            "penalty": r.penalty.best_curve(),
        }
        for r in rows
    }
    report = ExperimentReport(
        "qaoa-compare", inputs,
        tables={"scatter": (["case_id", "members", "c", "P_exchange", "P_penalty"], table)},
        summary={
            "ground_state_satisfies": {r.case_id: r.ground_state_satisfies for r in rows},
            "max_sector_leakage": max(r.max_leakage for r in rows),
            "traces": traces,
        },
    )
    for r in rows:
        print(f"{r.case_id:6s} {' '.join(r.members):10s} c={r.c:+d}  P_exchange {r.p_exchange:.4f}  "
              f"P_penalty {r.p_penalty:.4f}")
    return 0, [report]


COMMANDS = {
    "validate": cmd_validate,
    "anneal": cmd_anneal,
    "spectrum": cmd_spectrum,
    "gap-scan": cmd_gap_scan,
    "tf-scan": cmd_tf_scan,
    "degeneracy": cmd_degeneracy,
    "overlap": cmd_overlap,
    "qaoa-compare": cmd_qaoa_compare,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code, reports = COMMANDS[args.command](args)
    except (InstanceError, InfeasibleError, ConditionViolationError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return 1
    except NormDriftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    files: list[Path] = []
    for r in reports:
        files += r.write(args.out)
    if reports:
        _write_json(args.out / "metadata.json", _metadata(args, [r.digest for r in reports], files))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
