"""Readout-error mitigation with a three-unitary collective twirl and
depolarization-inverse post-processing, on a dense density-matrix simulator."""
from ._kernels import get_backend, set_backend
from .algorithms import (
    BvInstance,
    EstimatorResult,
    QaeInstance,
    build_bv,
    build_deutsch,
    build_qae,
    qae_estimate,
    qft_gates,
    qft_matrix,
)
from .channels import (
    DEFAULT_TWIRL_SET,
    Channel,
    PauliChannel,
    TwirlSet,
    adjoint_channel,
    apply_channel,
    axis_channel,
    collective_twirl_sim,
    depolarizing,
    eta_of_pauli,
    noise_circuit_fragment,
    pauli_channel,
    twirl3,
    twirl_haar_mc,
)
from .circuit import Circuit, Histogram, MeasurementModel, marginal, run_exact, run_with_twirl, sample
from .mitigation import (
    MitigationConfig,
    QuasiDistribution,
    calibrate_eta,
    correct_joint,
    correct_marginal,
    mitigate_pipeline,
    premeasure_twirl_pass,
    project_to_simplex,
)
from .qcore import DensityMatrix, apply_gate, gate_matrix, partial_trace, tensor

__all__ = [
    "BvInstance",
    "Channel",
    "Circuit",
    "DEFAULT_TWIRL_SET",
    "DensityMatrix",
    "EstimatorResult",
    "Histogram",
    "MeasurementModel",
    "MitigationConfig",
    "PauliChannel",
    "QaeInstance",
    "QuasiDistribution",
    "TwirlSet",
    "adjoint_channel",
    "apply_channel",
    "apply_gate",
    "axis_channel",
    "build_bv",
    "build_deutsch",
    "build_qae",
    "calibrate_eta",
    "collective_twirl_sim",
    "correct_joint",
    "correct_marginal",
    "depolarizing",
    "eta_of_pauli",
    "gate_matrix",
    "get_backend",
    "marginal",
    "mitigate_pipeline",
    "noise_circuit_fragment",
    "partial_trace",
    "pauli_channel",
    "premeasure_twirl_pass",
    "project_to_simplex",
    "qae_estimate",
    "qft_gates",
    "qft_matrix",
    "run_exact",
    "run_with_twirl",
    "sample",
    "set_backend",
    "tensor",
    "twirl3",
    "twirl_haar_mc",
]

__version__ = "0.1.0"
