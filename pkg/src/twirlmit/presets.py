"""Pinned reconstructions of the BV and QAE mitigation experiments.

Noise is an axis flip with weight 0.3 placed before the detector; the
correction uses eta = 0.1 on the noisy qubits only. BV uses ``s = 10010001``
with noise on system qubits 5 and 8 (1-indexed, i.e. indices 4 and 7). QAE
uses ``m = 7``, ``p = 0.3`` and Y noise on evaluation qubit 1 (and 2), the
qubits that carry the two lowest bits of ``z``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algorithms import BvInstance, QaeInstance, build_bv, build_qae, eval_qubit, qae_estimate
from .channels import Channel, axis_channel, noise_circuit_fragment, theta_for_probability
from .circuit import Circuit
from .mitigation import MitigationConfig, bitstring_score

BV_SECRET = "10010001"
NOISE_P = 0.3
CORRECTION_ETA = 0.1
QAE_M = 7
QAE_P = 0.3


@dataclass(frozen=True)
class NoiseSpec:
    qubit: int
    axis: str  # X | Y | Z | DEP
    p: float

    def channel(self) -> Channel:
        if self.axis.upper() == "DEP":
            from .channels import depolarizing

            return depolarizing(self.p)
        return axis_channel(self.axis, self.p)


@dataclass(frozen=True)
class Experiment:
    name: str
    circuit: Circuit
    noise: tuple  # of NoiseSpec
    cfg: MitigationConfig
    score: Callable[[np.ndarray], float]
    kind: str  # "bv" | "qae"
    params: dict

    def noise_channels(self) -> dict:
        return {s.qubit: s.channel() for s in self.noise}


def qae_window_score(m: int, p: float) -> Callable[[np.ndarray], float]:
    return lambda t: qae_estimate(t, m).window_mass(p)


def bv_experiment(s: str, noise: tuple, eta: float = CORRECTION_ETA, name: str = "bv") -> Experiment:
    circ = build_bv(BvInstance(s))
    cfg = MitigationConfig(eta={spec.qubit: eta for spec in noise})
    return Experiment(name, circ, tuple(noise), cfg, bitstring_score(s), "bv", {"s": s})


def qae_experiment(m: int, p: float, noise: tuple, eta: float = CORRECTION_ETA, name: str = "qae") -> Experiment:
    circ = build_qae(QaeInstance(m, p))
    cfg = MitigationConfig(eta={spec.qubit: eta for spec in noise})
    return Experiment(name, circ, tuple(noise), cfg, qae_window_score(m, p), "qae", {"m": m, "p": p})


def _bv_noise(*system_qubits_1based):
    return tuple(NoiseSpec(k - 1, "X", NOISE_P) for k in system_qubits_1based)


def _qae_noise(*eval_qubits):
    return tuple(NoiseSpec(eval_qubit(j, QAE_M), "Y", NOISE_P) for j in eval_qubits)


PRESETS = {
    "fig3-single": lambda: bv_experiment(BV_SECRET, _bv_noise(5), name="fig3-single"),
    "fig3-double": lambda: bv_experiment(BV_SECRET, _bv_noise(5, 8), name="fig3-double"),
    "fig4-single": lambda: qae_experiment(QAE_M, QAE_P, _qae_noise(1), name="fig4-single"),
    "fig4-double": lambda: qae_experiment(QAE_M, QAE_P, _qae_noise(1, 2), name="fig4-double"),
}


def get_preset(name: str) -> Experiment:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]()


def with_ancilla_noise(circ: Circuit, noise) -> Circuit:
    """Copy of ``circ`` with each noise spec realized by an ancilla fragment.

    One fresh ancilla per spec is appended after the existing qubits; the
    fragment gates are flagged as noise so the twirl pass wraps them.
    """
    noise = list(noise)
    out = Circuit(circ.n_qubits + len(noise), circ.name + "+anc", circ.description)
    out.ops = list(circ.ops)
    for i, spec in enumerate(noise):
        if spec.axis.upper() not in ("X", "Y", "Z"):
            raise ValueError("only axis flips have an ancilla realization")
        frag = noise_circuit_fragment(spec.axis, theta_for_probability(spec.p))
        out.compose(frag, [spec.qubit, circ.n_qubits + i], noise=True)
    out.measure(circ.measured)
    return out
