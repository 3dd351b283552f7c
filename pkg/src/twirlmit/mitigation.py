"""Readout-error mitigation: twirl pre-pass and depolarization-inverse post-processing."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _kernels
from .channels import DEFAULT_TWIRL_SET, Channel, TwirlSet
from .circuit import (
    OUTPUT_TOL,
    Circuit,
    Histogram,
    MeasurementModel,
    dict_to_table,
    make_rng,
    run_exact,
    run_with_twirl,
    sample,
    strip_noise,
    table_to_dict,
    twirl_branches,
    twirl_schedule,
)

ETA_PRESETS = {"ibm-low": 0.02, "ibm-high": 0.05}
POLICIES = ("quasi", "clip_renormalize")
MAX_DENSE_BITS = 24


@dataclass(frozen=True, eq=False)
class MitigationConfig:
    """Per-qubit depolarization strengths used by the correction.

    ``eta`` is keyed by qubit index; qubits not listed get ``default_eta``.
    """

    eta: Mapping[int, float] = field(default_factory=dict)
    default_eta: float = 0.0
    twirl_set: TwirlSet = DEFAULT_TWIRL_SET
    negative_policy: str = "quasi"

    def __post_init__(self):
        for q, e in {**self.eta, "default": self.default_eta}.items():
            if not 0.0 <= e < 1.0:
                raise ValueError(f"eta for {q} must lie in [0, 1), got {e}")
        if self.negative_policy not in POLICIES:
            raise ValueError(f"unknown negative policy {self.negative_policy!r}")

    def eta_for(self, qubit: int) -> float:
        return float(self.eta.get(qubit, self.default_eta))

    @classmethod
    def preset(cls, name: str, **kw) -> "MitigationConfig":
        if name not in ETA_PRESETS:
            raise ValueError(f"unknown eta preset {name!r}; choose from {sorted(ETA_PRESETS)}")
        return cls(default_eta=ETA_PRESETS[name], **kw)


@dataclass
class QuasiDistribution:
    n_bits: int
    weights: np.ndarray
    policy: str = "quasi"
    tv_clip_loss: float = 0.0

    def __post_init__(self):
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {self.weights.sum()!r}")

    def to_dict(self) -> dict:
        return table_to_dict(self.weights, OUTPUT_TOL)

    def to_json(self) -> str:
        return json.dumps(
            {"weights": self.to_dict(), "policy": self.policy, "tv_clip_loss": float(self.tv_clip_loss)},
            indent=2,
        )


def premeasure_twirl_pass(circ: Circuit, twirl_set: TwirlSet = DEFAULT_TWIRL_SET) -> list:
    """The three twirl branches of ``circ`` (see :func:`twirl_branches`)."""
    return twirl_branches(circ, twirl_set)


def randomized_schedule(shots: int, seed: int) -> np.ndarray:
    """Per-shot branch indices, the same draw :func:`run_with_twirl` makes."""
    return twirl_schedule(shots, make_rng(seed))


def correct_marginal(p_obs: float, eta: float) -> float:
    """Invert ``p -> (1 - eta) p + eta/2``."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    return (p_obs - eta / 2) / (1 - eta)


def response_matrix(eta: float) -> np.ndarray:
    """Symmetric bit-flip matrix with flip rate ``eta/2``."""
    f = eta / 2
    return np.array([[1 - f, f], [f, 1 - f]])


def inverse_response(eta: float) -> np.ndarray:
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    f = eta / 2
    return np.array([[1 - f, -f], [-f, 1 - f]]) / (1 - eta)


def _as_table(data) -> np.ndarray:
    if isinstance(data, Histogram):
        return data.probabilities()
    if isinstance(data, QuasiDistribution):
        return data.weights.astype(float)
    if isinstance(data, Mapping):
        return dict_to_table(data)
    return np.asarray(data, dtype=float)


def apply_per_bit(table: np.ndarray, mats: Sequence[np.ndarray | None]) -> np.ndarray:
    """Apply ``mats[k]`` to bit ``k`` of a ``2**n`` table (``None`` skips)."""
    n = len(mats)
    vec = np.ascontiguousarray(table, dtype=float)
    for k, m in enumerate(mats):
        if m is not None:
            vec = _kernels.apply_matrix(vec, n, m, [k])
    return vec


def project_to_simplex(q) -> tuple:
    """Clip negatives and renormalize. Returns ``(probabilities, tv_distance)``."""
    w = _as_table(q)
    p = np.clip(w, 0.0, None)
    total = p.sum()
    if total <= 0:
        raise ValueError("nothing left after clipping negative weights")
    p = p / total
    return p, float(0.5 * np.abs(p - w).sum())


def correct_joint(data, cfg: MitigationConfig, measured: Sequence[int] | None = None) -> QuasiDistribution:
    """Undo per-qubit depolarization on a joint outcome table.

    ``measured[j]`` is the qubit read into bit ``j`` (default: bit ``j`` is
    qubit ``j``); its strength comes from ``cfg``.
    """
    table = _as_table(data)
    n = int(round(np.log2(table.size)))
    if 2**n != table.size:
        raise ValueError("table length is not a power of two")
    if n > MAX_DENSE_BITS:
        raise ValueError(f"dense correction supports at most {MAX_DENSE_BITS} bits")
    measured = list(range(n)) if measured is None else list(measured)
    if len(measured) != n:
        raise ValueError(f"{len(measured)} measured qubits for a {n}-bit table")
    for q in cfg.eta:
        if q not in measured:
            raise ValueError(f"eta given for qubit {q}, which is not measured")
    mats = []
    for q in measured:
        e = cfg.eta_for(q)
        mats.append(inverse_response(e) if e > 0 else None)
    out = apply_per_bit(table, mats)
    if cfg.negative_policy == "clip_renormalize":
        clipped, tv = project_to_simplex(out)
        return QuasiDistribution(n, clipped, cfg.negative_policy, tv)
    return QuasiDistribution(n, out, cfg.negative_policy, 0.0)


# ---------------------------------------------------------------------------
# calibration

Runner = Callable[[Circuit, int, int], Histogram]


@dataclass
class CalibrationResult:
    eta: dict
    asymmetry: dict
    eps0: dict
    eps1: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                str(q): {"eta": self.eta[q], "asymmetry": self.asymmetry[q], "eps0": self.eps0[q], "eps1": self.eps1[q]}
                for q in sorted(self.eta)
            },
            indent=2,
        )


def calibration_circuits(n_qubits: int) -> tuple:
    zero = Circuit(n_qubits, name="cal_zero").measure()
    ones = Circuit(n_qubits, name="cal_ones")
    for q in range(n_qubits):
        ones.gate("X", q)
    return zero, ones.measure()


def calibrate_eta(runner: Runner, n_qubits: int, shots: int, seed: int) -> CalibrationResult:
    """Estimate symmetric readout depolarization from the all-0 and all-1 inputs.

    ``eta_k = eps0_k + eps1_k`` where ``eps{b}_k`` is the rate at which qubit
    ``k`` reads ``1 - b`` after being prepared in ``b``.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    zero, ones = calibration_circuits(n_qubits)
    h0 = runner(zero, shots, seed).probabilities().reshape((2,) * n_qubits)
    h1 = runner(ones, shots, seed + 1).probabilities().reshape((2,) * n_qubits)
    eta, asym, e0, e1 = {}, {}, {}, {}
    for k in range(n_qubits):
        axes = tuple(a for a in range(n_qubits) if a != k)
        m0 = h0.sum(axis=axes)
        m1 = h1.sum(axis=axes)
        e0[k] = float(m0[1])
        e1[k] = float(m1[0])
        eta[k] = e0[k] + e1[k]
        asym[k] = abs(e0[k] - e1[k])
    return CalibrationResult(eta, asym, e0, e1)


def simulator_runner(noise: Mapping[int, Channel] | None = None, mode: str = "state_noise") -> Runner:
    """Runner backed by the exact simulator plus multinomial sampling."""
    meas = MeasurementModel(mode, dict(noise or {})) if noise else MeasurementModel()

    def run(circ: Circuit, shots: int, seed: int) -> Histogram:
        return sample(run_exact(circ, meas), shots, seed)

    return run


# ---------------------------------------------------------------------------
# four-condition pipeline

CONDITIONS = ("ideal", "noisy", "twirled", "corrected")


@dataclass
class PipelineReport:
    n_bits: int
    exact: dict  # condition -> table
    sampled: dict  # condition -> table (empirical / corrected quasi)
    histograms: dict  # condition -> Histogram (sampled runs only)
    scores_exact: dict
    scores_sampled: dict
    violations: list
    meta: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        out = {
            "meta": self.meta,
            "n_bits": self.n_bits,
            "conditions": list(CONDITIONS),
            "exact": {c: table_to_dict(self.exact[c], OUTPUT_TOL) for c in CONDITIONS if c in self.exact},
            "scores_exact": self.scores_exact,
            "invariant_violations": self.violations,
        }
        if self.sampled:
            out["sampled"] = {c: table_to_dict(self.sampled[c], OUTPUT_TOL) for c in CONDITIONS if c in self.sampled}
            out["counts"] = {c: {"counts": h.counts, "shots": h.shots} for c, h in self.histograms.items()}
            out["scores_sampled"] = self.scores_sampled
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check_table(name: str, t: np.ndarray, violations: list, allow_negative: bool = False) -> None:
    if abs(t.sum() - 1.0) > 1e-9:
        violations.append(f"{name}: weights sum to {t.sum()!r}")
    if not allow_negative and t.min() < -1e-12:
        violations.append(f"{name}: negative probability {t.min()!r}")


def mitigate_pipeline(
    circ: Circuit,
    noise: Mapping[int, Channel],
    cfg: MitigationConfig,
    shots: int | None = None,
    seed: int = 0,
    score: Callable[[np.ndarray], float] | None = None,
    exact: bool = True,
) -> PipelineReport:
    """Ideal, noisy, noisy+twirl and noisy+twirl+correction on one circuit.

    Sampled runs use seeds ``seed, seed+1, seed+2`` for the ideal, noisy and
    twirled histograms; the corrected condition post-processes the twirled
    histogram.
    """
    meas = MeasurementModel("state_noise", dict(noise))
    ideal = run_exact(strip_noise(circ))
    noisy = run_exact(circ, meas)
    twirled = run_with_twirl(circ, meas, cfg.twirl_set, "exact_average")
    corrected = correct_joint(twirled, cfg, circ.measured).weights
    violations: list = []
    tables = {"ideal": ideal, "noisy": noisy, "twirled": twirled, "corrected": corrected}
    for c, t in tables.items():
        _check_table(f"exact/{c}", t, violations, allow_negative=c == "corrected")
    score = score or (lambda t: float(t.max()))
    out_exact = tables if exact else {}
    scores_exact = {c: score(t) for c, t in out_exact.items()}

    sampled, hists, scores_sampled = {}, {}, {}
    if shots:
        hists["ideal"] = sample(ideal, shots, seed)
        hists["noisy"] = sample(noisy, shots, seed + 1)
        hists["twirled"] = run_with_twirl(circ, meas, cfg.twirl_set, "per_shot", shots, seed + 2)
        for c, h in hists.items():
            sampled[c] = h.probabilities()
            if sum(h.counts.values()) != h.shots:
                violations.append(f"sampled/{c}: counts do not sum to shots")
        sampled["corrected"] = correct_joint(hists["twirled"], cfg, circ.measured).weights
        _check_table("sampled/corrected", sampled["corrected"], violations, allow_negative=True)
        scores_sampled = {c: score(t) for c, t in sampled.items()}
    meta = {
        "circuit": circ.name,
        "measured": list(circ.measured),
        "noise_qubits": sorted(int(q) for q in noise),
        "eta": {str(q): cfg.eta_for(q) for q in circ.measured if cfg.eta_for(q) > 0},
        "policy": cfg.negative_policy,
        "shots": shots,
        "seed": seed,
    }
    return PipelineReport(circ.n_bits, out_exact, sampled, hists, scores_exact, scores_sampled, violations, meta)


def bitstring_score(target: str) -> Callable[[np.ndarray], float]:
    idx = int(target, 2)
    return lambda t: float(t[idx])
