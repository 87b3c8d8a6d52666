"""Parity-encoded spin problems with side conditions: annealing with exchange drivers and digital protocols."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    CompiledInstance,
    InfeasibleError,
    InstanceError,
    LogicalProblem,
    ParityConstraint,
    ParityQubit,
    SideCondition,
    basis_index,
    conditioned_ground_states,
    config_of,
    constraint_is_valid,
    load_instance,
    parse_instance,
    parity_energy,
    reference_instance_degeneracy,
    reference_instance_fig1,
)
from .evolve import Schedule, evolve_schroedinger, min_conditioned_gap, schedule_weights, sector_spectrum  # noqa: E402
from .operators import apply_hamiltonian, build_annealing_hamiltonian, dense_matrix  # noqa: E402

__all__ = [
    "CompiledInstance", "InfeasibleError", "InstanceError", "LogicalProblem", "ParityConstraint",
    "ParityQubit", "Schedule", "SideCondition", "apply_hamiltonian", "basis_index",
    "build_annealing_hamiltonian", "conditioned_ground_states", "config_of", "constraint_is_valid",
    "dense_matrix", "evolve_schroedinger", "load_instance", "min_conditioned_gap", "parse_instance",
    "parity_energy", "reference_instance_degeneracy", "reference_instance_fig1", "schedule_weights",
    "sector_spectrum",
]
