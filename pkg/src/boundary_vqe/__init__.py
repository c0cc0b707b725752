"""VQE and free-fermion study of boundary-field transitions in the transverse-field Ising chain."""

__version__ = "0.1.0"

from .ansatz import HvaConfig, build_circuit, run_ansatz
from .criticality import (
    EnergyCurve,
    ScalingSeries,
    classify_gap_decay,
    find_second_derivative_minimum,
    finite_size_scaling,
    relative_error_series,
    rms,
    spline_derivative,
)
from .free_fermion import (
    dense_ed,
    ground_energy,
    sector_gap,
    sector_ground_energy,
    single_particle_spectrum,
)
from .spin_model import (
    IsingChainSpec,
    Observable,
    PauliString,
    build_hamiltonian,
    build_kink_operator,
    build_local_magnetization,
)
from .statevector import StateVector, apply_gate, expectation, init_zero, sample_expectation
from .vqe import VqeConfig, VqeResult, cost, gradient, minimize, sweep

__all__ = [
    "EnergyCurve",
    "HvaConfig",
    "IsingChainSpec",
    "Observable",
    "PauliString",
    "ScalingSeries",
    "StateVector",
    "VqeConfig",
    "VqeResult",
    "apply_gate",
    "build_circuit",
    "build_hamiltonian",
    "build_kink_operator",
    "build_local_magnetization",
    "classify_gap_decay",
    "cost",
    "dense_ed",
    "expectation",
    "find_second_derivative_minimum",
    "finite_size_scaling",
    "gradient",
    "ground_energy",
    "init_zero",
    "minimize",
    "relative_error_series",
    "rms",
    "run_ansatz",
    "sample_expectation",
    "sector_gap",
    "sector_ground_energy",
    "single_particle_spectrum",
    "spline_derivative",
    "sweep",
]
