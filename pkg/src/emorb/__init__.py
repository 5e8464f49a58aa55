"""Entanglement-minimized orbitals for fermionic Hamiltonians.

A block-sparse U(1)xU(1) tensor backend, two-dot DMRG, entanglement
measurement/manipulation with Givens-rotation gates, a basin-hopping
orbital optimizer, and wavefunction diagnostics, wired together behind
an `emorb` command-line entry point.
"""

from .analysis import (
    AnalysisReport,
    amplitude,
    exact_diag,
    ipr,
    largest_det,
    natural_orbitals,
    one_rdm,
    perfect_sample,
)
from .basinhop import (
    OptimizerState,
    RunConfig,
    TraceRecord,
    accept_reject,
    propose_move,
    run_emo,
)
from .dmrg import SweepConfig, dmrg_run, expectation
from .entangle import (
    GateLayer,
    GivensGate,
    SchmidtSpectrum,
    apply_gate,
    disentangle_sweep,
    gate_matrix,
    optimize_theta,
    random_swap_layer,
    renyi,
    schmidt_all,
    total_entropy,
)
from .estimator import EmoTransformer
from .model import (
    FcidumpError,
    HubbardSpec,
    IntegralSet,
    build_hubbard,
    parse_fcidump,
    transform_integrals,
    write_fcidump,
)
from .mpo import MPO, build_mpo
from .mps import MPS, product_state, random_mps

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport", "EmoTransformer", "FcidumpError", "GateLayer",
    "GivensGate", "HubbardSpec", "IntegralSet", "MPO", "MPS",
    "OptimizerState", "RunConfig", "SchmidtSpectrum", "SweepConfig",
    "TraceRecord", "accept_reject", "amplitude", "apply_gate",
    "build_hubbard", "build_mpo", "disentangle_sweep", "dmrg_run",
    "exact_diag", "expectation", "gate_matrix", "ipr", "largest_det",
    "natural_orbitals", "one_rdm", "optimize_theta", "parse_fcidump",
    "perfect_sample", "product_state", "propose_move", "random_mps",
    "random_swap_layer", "renyi", "run_emo", "schmidt_all",
    "total_entropy", "transform_integrals", "write_fcidump",
]
