"""Circuit IR, exact density-matrix execution and shot sampling.

A circuit is an ordered list of operations followed by one terminal
measurement. Operations are gates, channels, or a ``noise_site`` marker
that says where the measurement model's state noise acts (default: right
before the measurement). Gates and channels that model noise carry
``noise=True``; the twirl pass treats everything after the last non-noise
operation as the span between the circuit and the detector.

Probability tables are numpy vectors of length ``2**len(measured)``; entry
``i`` is the probability of the bitstring ``format(i, "0mb")`` whose
character ``j`` is the outcome of ``measured[j]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .channels import (
    DEFAULT_TWIRL_SET,
    Channel,
    TwirlSet,
    adjoint_channel,
    channel_from_spec,
)
from .qcore import PROJ0, PROJ1, DensityMatrix, conjugate, gate_matrix, index_to_bits

MODES = ("ideal", "state_noise", "detector_noise")


@dataclass(frozen=True)
class Op:
    kind: str  # "gate" | "channel" | "noise_site"
    name: str = ""
    targets: tuple = ()
    params: tuple = ()
    noise: bool = False
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)
    channel: Channel | None = field(default=None, compare=False, repr=False)

    def operator(self) -> np.ndarray:
        return self.matrix if self.matrix is not None else gate_matrix(self.name, self.params)

    def resolve_channel(self) -> Channel:
        return self.channel if self.channel is not None else channel_from_spec(self.name, self.params)


class Circuit:
    """Builder for a gate/channel program on ``n_qubits`` with a terminal measurement."""

    def __init__(self, n_qubits: int, name: str = "", description: str = ""):
        if n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        self.n_qubits = n_qubits
        self.name = name
        self.description = description
        self.ops: list[Op] = []
        self.measured: tuple | None = None

    def _targets(self, targets) -> tuple:
        if isinstance(targets, (int, np.integer)):
            targets = (targets,)
        targets = tuple(int(t) for t in targets)
        if len(set(targets)) != len(targets):
            raise ValueError(f"duplicate targets {targets}")
        for t in targets:
            if not 0 <= t < self.n_qubits:
                raise IndexError(f"qubit {t} out of range for {self.n_qubits} qubits")
        return targets

    def _append(self, op: Op) -> "Circuit":
        if self.measured is not None:
            raise ValueError("cannot add operations after the measurement")
        self.ops.append(op)
        return self

    def gate(self, name: str, targets, params: Sequence[float] = (), *, noise: bool = False) -> "Circuit":
        targets = self._targets(targets)
        m = gate_matrix(name, params)
        if m.shape[0] != 2 ** len(targets):
            raise ValueError(f"gate {name} needs {int(np.log2(m.shape[0]))} target(s), got {len(targets)}")
        return self._append(Op("gate", name.upper(), targets, tuple(float(p) for p in params), noise))

    def noise_gate(self, name: str, targets, params: Sequence[float] = ()) -> "Circuit":
        return self.gate(name, targets, params, noise=True)

    def unitary(self, matrix: np.ndarray, targets, name: str = "U", *, noise: bool = False) -> "Circuit":
        targets = self._targets(targets)
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (2 ** len(targets),) * 2:
            raise ValueError("matrix size does not match targets")
        return self._append(Op("gate", name, targets, (), noise, matrix=matrix))

    def channel(self, ch: Channel | str, targets, params: Sequence[float] = ()) -> "Circuit":
        """Insert a noise channel (by object or by ``channel_from_spec`` name)."""
        targets = self._targets(targets)
        if isinstance(ch, str):
            obj = channel_from_spec(ch, params)
            op = Op("channel", ch.lower(), targets, tuple(float(p) for p in params), True, channel=obj)
        else:
            obj = ch
            op = Op("channel", "custom", targets, (), True, channel=ch)
        if obj.n_qubits != len(targets):
            raise ValueError(f"{obj.n_qubits}-qubit channel on {len(targets)} target(s)")
        return self._append(op)

    def noise_site(self) -> "Circuit":
        return self._append(Op("noise_site", noise=True))

    def compose(self, other: "Circuit", qubits: Sequence[int], *, noise: bool | None = None) -> "Circuit":
        """Append ``other``'s operations with its qubit ``i`` mapped to ``qubits[i]``."""
        qubits = self._targets(qubits)
        if len(qubits) != other.n_qubits:
            raise ValueError("qubit map does not match the composed circuit")
        for op in other.ops:
            mapped = tuple(qubits[t] for t in op.targets)
            flag = op.noise if noise is None else noise
            self._append(Op(op.kind, op.name, mapped, op.params, flag, op.matrix, op.channel))
        return self

    def measure(self, qubits=None) -> "Circuit":
        if self.measured is not None:
            raise ValueError("circuit is already measured")
        qubits = self._targets(range(self.n_qubits) if qubits is None else qubits)
        if not qubits:
            raise ValueError("measurement needs at least one qubit")
        self.measured = qubits
        return self

    def copy(self) -> "Circuit":
        c = Circuit(self.n_qubits, self.name, self.description)
        c.ops = list(self.ops)
        c.measured = self.measured
        return c

    @property
    def n_bits(self) -> int:
        return len(self.measured) if self.measured is not None else 0

    def __repr__(self):
        return f"Circuit({self.name or 'anon'}, n_qubits={self.n_qubits}, ops={len(self.ops)}, measured={self.measured})"


@dataclass(frozen=True)
class MeasurementModel:
    """How per-qubit readout noise enters: on the state, or on the detector.

    In ``detector_noise`` mode the stored channel's adjoint is applied to the
    POVM elements, so both modes give the same statistics for any channel.
    """

    mode: str = "ideal"
    per_qubit_noise: Mapping[int, Channel] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown measurement mode {self.mode!r}")
        for q, ch in self.per_qubit_noise.items():
            if ch.n_qubits != 1:
                raise ValueError(f"noise on qubit {q} must be a single-qubit channel")


IDEAL = MeasurementModel()


@dataclass
class Histogram:
    n_bits: int
    counts: dict
    shots: int

    def __post_init__(self):
        for k, v in self.counts.items():
            if len(k) != self.n_bits or set(k) - {"0", "1"}:
                raise ValueError(f"bad bitstring {k!r} for {self.n_bits} bits")
            if int(v) < 0:
                raise ValueError("counts must be non-negative")
        if sum(self.counts.values()) != self.shots:
            raise ValueError(f"counts sum to {sum(self.counts.values())}, but shots = {self.shots}")

    def probabilities(self) -> np.ndarray:
        if self.shots == 0:
            raise ValueError("empty histogram")
        p = np.zeros(2**self.n_bits)
        for k, v in self.counts.items():
            p[int(k, 2)] += v
        return p / self.shots

    def to_json(self) -> str:
        return json.dumps({"counts": dict(sorted(self.counts.items())), "shots": self.shots}, indent=2)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Histogram":
        counts = {str(k): int(v) for k, v in d["counts"].items()}
        if not counts:
            raise ValueError("histogram has no counts")
        n_bits = len(next(iter(counts)))
        shots = int(d.get("shots", sum(counts.values())))
        return cls(n_bits, counts, shots)


def _initial_state(n: int) -> np.ndarray:
    m = np.zeros((2**n, 2**n), dtype=complex)
    m[0, 0] = 1.0
    return m


def _apply_state_noise(m: np.ndarray, n: int, meas: MeasurementModel) -> np.ndarray:
    for q, ch in sorted(meas.per_qubit_noise.items()):
        m = sum(conjugate(m, k, [q], n) for k in ch.kraus)
    return m


def evolve(circ: Circuit, meas: MeasurementModel = IDEAL) -> DensityMatrix:
    """Final state right before the detectors (state noise included)."""
    n = circ.n_qubits
    for q in meas.per_qubit_noise:
        if not 0 <= q < n:
            raise IndexError(f"noise qubit {q} out of range")
    m = _initial_state(n)
    noise_done = meas.mode != "state_noise"
    for op in circ.ops:
        if op.kind == "gate":
            m = conjugate(m, op.operator(), op.targets, n)
        elif op.kind == "channel":
            ch = op.resolve_channel()
            m = sum(conjugate(m, k, op.targets, n) for k in ch.kraus)
        elif op.kind == "noise_site":
            if not noise_done:
                m = _apply_state_noise(m, n, meas)
                noise_done = True
        else:  # pragma: no cover
            raise ValueError(f"unknown op kind {op.kind}")
    if not noise_done:
        m = _apply_state_noise(m, n, meas)
    return DensityMatrix(m)


def outcome_probabilities(state: DensityMatrix, measured: Sequence[int], povms=None) -> np.ndarray:
    """Joint outcome distribution of computational-basis measurements.

    ``povms`` optionally maps a qubit to its pair ``(E0, E1)`` of effects,
    replacing the projectors on that qubit.
    """
    n = state.n_qubits
    measured = list(measured)
    povms = povms or {}
    t = state.matrix.reshape((2,) * (2 * n))
    row = list(range(n))
    col = list(range(n, 2 * n))
    for q in range(n):
        if q not in measured:
            col[q] = row[q]
    operands = [t, row + col]
    out_idx = []
    nxt = 2 * n
    for q in measured:
        e0, e1 = povms.get(q, (PROJ0, PROJ1))
        # tensor[x, c, r] = E_x[c, r]; tr(E rho) = sum_rc E[c, r] rho[r, c]
        operands += [np.stack([e0, e1]), [nxt, col[q], row[q]]]
        out_idx.append(nxt)
        nxt += 1
    p = np.einsum(*operands, out_idx, optimize=True).real.reshape(-1)
    return p


def run_exact(circ: Circuit, meas: MeasurementModel = IDEAL) -> np.ndarray:
    """Exact joint distribution over the measured qubits."""
    if circ.measured is None:
        raise ValueError("circuit has no measurement")
    state = evolve(circ, meas)
    povms = None
    if meas.mode == "detector_noise":
        povms = {}
        for q, ch in meas.per_qubit_noise.items():
            adj = adjoint_channel(ch)
            povms[q] = (adj(PROJ0), adj(PROJ1))
    p = outcome_probabilities(state, circ.measured, povms)
    if abs(p.sum() - 1) > 1e-10:
        raise ValueError(f"distribution sums to {p.sum()!r}")
    return np.clip(p, 0.0, None) / p.sum()


def marginal(dist: np.ndarray, k: int, measured: Sequence[int] | None = None) -> tuple:
    """``(P[0|k], P[1|k])``. ``k`` is a qubit when ``measured`` is given, else a bit position."""
    dist = np.asarray(dist)
    n_bits = int(round(np.log2(dist.size)))
    if measured is not None:
        measured = list(measured)
        if k not in measured:
            raise ValueError(f"qubit {k} is not measured")
        k = measured.index(k)
    if not 0 <= k < n_bits:
        raise ValueError(f"bit {k} not in a {n_bits}-bit table")
    t = dist.reshape((2,) * n_bits)
    axes = tuple(a for a in range(n_bits) if a != k)
    m = t.sum(axis=axes)
    return float(m[0]), float(m[1])


OUTPUT_TOL = 1e-15


def chop(dist: np.ndarray, tol: float = OUTPUT_TOL) -> np.ndarray:
    """Zero entries below ``tol`` in magnitude (float round-off in exact runs)."""
    dist = np.asarray(dist, dtype=float)
    return np.where(np.abs(dist) < tol, 0.0, dist)


def table_to_dict(dist: np.ndarray, tol: float = 0.0) -> dict:
    n = int(round(np.log2(len(dist))))
    return {index_to_bits(i, n): float(v) for i, v in enumerate(dist) if abs(v) > tol}


def dict_to_table(d: Mapping[str, float]) -> np.ndarray:
    n = len(next(iter(d)))
    out = np.zeros(2**n)
    for k, v in d.items():
        out[int(k, 2)] += v
    return out


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 seeded with a 64-bit integer; the only RNG used for sampling."""
    return np.random.Generator(np.random.PCG64(seed))


def _draw(dist: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    p = np.clip(np.asarray(dist, dtype=float), 0.0, None)
    p = p / p.sum()
    return rng.multinomial(shots, p)


def _counts_to_hist(counts: np.ndarray, shots: int) -> Histogram:
    n = int(round(np.log2(counts.size)))
    return Histogram(n, {index_to_bits(i, n): int(c) for i, c in enumerate(counts) if c}, shots)


def sample(dist: np.ndarray, shots: int, seed: int) -> Histogram:
    """Multinomial draw of ``shots`` outcomes; deterministic per ``seed``."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    return _counts_to_hist(_draw(dist, shots, make_rng(seed)), shots)


def strip_noise(circ: Circuit) -> Circuit:
    """Copy of ``circ`` without noise-flagged operations (the ideal reference)."""
    c = Circuit(circ.n_qubits, circ.name, circ.description)
    c.ops = [op for op in circ.ops if not op.noise]
    c.measured = circ.measured
    return c


def _gate_name(u: np.ndarray, fallback: str) -> str:
    for name in ("I", "V", "W", "VDG", "WDG"):
        if np.abs(gate_matrix(name) - u).max() < 1e-14:
            return name
    return fallback


def twirl_branches(circ: Circuit, twirl_set: TwirlSet = DEFAULT_TWIRL_SET) -> list:
    """One circuit per ``G``: ``G`` on every measured qubit after the last
    non-noise operation, ``G^dag`` right before the measurement."""
    if circ.measured is None:
        raise ValueError("circuit has no terminal measurement")
    last = max((i for i, op in enumerate(circ.ops) if not op.noise), default=-1)
    head, tail = circ.ops[: last + 1], circ.ops[last + 1:]
    has_site = any(op.kind == "noise_site" for op in tail)
    out = []
    for i, g in enumerate(twirl_set):
        name, name_dg = _gate_name(g, f"TWIRL{i}"), _gate_name(g.conj().T, f"TWIRL{i}DG")
        c = Circuit(circ.n_qubits, f"{circ.name}[twirl {name}]", circ.description)
        c.ops = list(head)
        for q in circ.measured:
            c.ops.append(Op("gate", name, (q,), (), False, matrix=g))
        c.ops.extend(tail)
        if not has_site:
            c.ops.append(Op("noise_site", noise=True))
        for q in circ.measured:
            c.ops.append(Op("gate", name_dg, (q,), (), False, matrix=g.conj().T))
        c.measured = circ.measured
        out.append(c)
    return out


def twirl_schedule(shots: int, rng: np.random.Generator) -> np.ndarray:
    """Branch index (0, 1, 2) for every shot, drawn uniformly."""
    return rng.integers(0, 3, size=shots)


def run_with_twirl(
    circ: Circuit,
    meas: MeasurementModel,
    twirl_set: TwirlSet = DEFAULT_TWIRL_SET,
    mode: str = "exact_average",
    shots: int | None = None,
    seed: int | None = None,
):
    """Run with the collective twirl around the pre-measurement noise.

    ``exact_average`` returns the mean of the three branch distributions.
    ``per_shot`` draws one ``G`` per shot (shared by all qubits) and returns a
    :class:`Histogram`.
    """
    if meas.mode == "detector_noise":
        raise ValueError(
            "twirl gates cannot be placed inside a detector; use state_noise mode "
            "(readout noise is modelled as acting on the state before the detector)"
        )
    dists = [run_exact(c, meas) for c in twirl_branches(circ, twirl_set)]
    if mode == "exact_average":
        return sum(dists) / 3
    if mode != "per_shot":
        raise ValueError(f"unknown twirl mode {mode!r}")
    if shots is None or shots < 1 or seed is None:
        raise ValueError("per_shot mode needs shots >= 1 and a seed")
    rng = make_rng(seed)
    branch = twirl_schedule(shots, rng)
    per_branch = np.bincount(branch, minlength=3)
    counts = np.zeros(dists[0].size, dtype=np.int64)
    for b in range(3):
        if per_branch[b]:
            counts += _draw(dists[b], int(per_branch[b]), rng)
    return _counts_to_hist(counts, shots)


# ---------------------------------------------------------------------------
# text format

def _fmt_num(x: float) -> str:
    return repr(float(x))


def dumps(circ: Circuit) -> str:
    lines = [f"QUBITS {circ.n_qubits}"]
    if circ.name:
        lines.append(f"NAME {circ.name}")
    for op in circ.ops:
        tgt = ",".join(str(t) for t in op.targets)
        params = " ".join(_fmt_num(p) for p in op.params)
        if op.kind == "noise_site":
            lines.append("NOISE")
            continue
        if op.kind == "gate" and op.matrix is not None:
            try:
                same = np.abs(gate_matrix(op.name, op.params) - op.matrix).max() < 1e-14
            except ValueError:
                same = False
            if not same:
                raise ValueError("gates given by raw matrices cannot be serialized")
        if op.kind == "channel" and op.name == "custom":
            raise ValueError("custom channels cannot be serialized")
        kw = {"gate": "NGATE" if op.noise else "GATE", "channel": "CHANNEL"}[op.kind]
        lines.append(" ".join(s for s in (kw, op.name, tgt, params) if s))
    if circ.measured is not None:
        lines.append("MEASURE " + ",".join(str(q) for q in circ.measured))
    return "\n".join(lines) + "\n"


class CircuitParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def loads(text: str) -> Circuit:
    circ = None
    name = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kw = parts[0].upper()
        try:
            if kw == "QUBITS":
                if circ is not None:
                    raise ValueError("QUBITS given twice")
                circ = Circuit(int(parts[1]), name=name)
                continue
            if kw == "NAME":
                name = line.split(None, 1)[1] if len(parts) > 1 else ""
                if circ is not None:
                    circ.name = name
                continue
            if circ is None:
                raise ValueError("QUBITS must come first")
            if kw == "NOISE":
                circ.noise_site()
            elif kw in ("GATE", "NGATE", "CHANNEL"):
                if len(parts) < 3:
                    raise ValueError(f"{kw} needs a name and targets")
                targets = [int(t) for t in parts[2].split(",")]
                params = [float(p) for p in parts[3:]]
                if kw == "CHANNEL":
                    circ.channel(parts[1], targets, params)
                else:
                    circ.gate(parts[1], targets, params, noise=kw == "NGATE")
            elif kw == "MEASURE":
                circ.measure([int(t) for t in parts[1].split(",")] if len(parts) > 1 else None)
            else:
                raise ValueError(f"unknown keyword {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            raise CircuitParseError(lineno, str(exc)) from None
    if circ is None:
        raise CircuitParseError(0, "empty circuit file")
    if circ.measured is None:
        raise CircuitParseError(0, "circuit has no MEASURE line")
    return circ
