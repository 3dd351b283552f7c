"""Circuit builders for Deutsch, Bernstein-Vazirani and amplitude estimation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Histogram
from .qcore import index_to_bits

DEUTSCH_CASES = ("constant0", "constant1", "balanced_id", "balanced_not")


def build_deutsch(case: str) -> Circuit:
    """System qubit 0, ancilla qubit 1 in |1>; measures f(0) xor f(1) on qubit 0."""
    if case not in DEUTSCH_CASES:
        raise ValueError(f"unknown Deutsch case {case!r}; choose from {DEUTSCH_CASES}")
    c = Circuit(2, name=f"deutsch_{case}")
    c.gate("X", 1).gate("H", 0).gate("H", 1)
    if case == "constant1":
        c.gate("X", 1)
    elif case == "balanced_id":
        c.gate("CX", [0, 1])
    elif case == "balanced_not":
        c.gate("CX", [0, 1]).gate("X", 1)
    c.gate("H", 0)
    return c.measure([0])


@dataclass(frozen=True)
class BvInstance:
    s: str

    def __post_init__(self):
        if not self.s or set(self.s) - {"0", "1"}:
            raise ValueError(f"hidden string must be a non-empty bitstring, got {self.s!r}")

    @property
    def n(self) -> int:
        return len(self.s)


def bv_function(x: str, s: str) -> int:
    """Parity oracle ``sum_i x_i s_i mod 2``."""
    if len(x) != len(s):
        raise ValueError("x and s differ in length")
    return sum(int(a) & int(b) for a, b in zip(x, s)) % 2


def bv_oracle(c: Circuit, s: str, ancilla: int) -> Circuit:
    for i, bit in enumerate(s):
        if bit == "1":
            c.gate("CX", [i, ancilla])
    return c


def build_bv(inst: BvInstance | str, *, measure: bool = True) -> Circuit:
    """System qubits ``0..n-1`` and an ancilla ``n`` prepared in |1>."""
    s = inst.s if isinstance(inst, BvInstance) else BvInstance(inst).s
    n = len(s)
    c = Circuit(n + 1, name=f"bv_{s}", description=f"Bernstein-Vazirani, s={s}")
    c.gate("X", n)
    for q in range(n + 1):
        c.gate("H", q)
    bv_oracle(c, s, n)
    for q in range(n):
        c.gate("H", q)
    if measure:
        c.measure(range(n))
    return c


def qft_matrix(m: int, inverse: bool = False) -> np.ndarray:
    """``|x> -> 2^{-m/2} sum_y exp(2 pi i x y / 2^m) |y>``."""
    if not 1 <= m <= 12:
        raise ValueError("QFT size must be between 1 and 12 qubits")
    n = 2**m
    k = np.arange(n)
    f = np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
    return f.conj().T if inverse else f


def qft_gates(m: int, inverse: bool = False) -> list:
    """H / controlled-phase / swap sequence for the QFT on qubits ``0..m-1``.

    Qubit 0 is the most significant bit. The inverse reverses the sequence
    and negates every phase.
    """
    if not 1 <= m <= 12:
        raise ValueError("QFT size must be between 1 and 12 qubits")
    seq = []
    for j in range(m):
        seq.append(("H", (j,), ()))
        for k in range(j + 1, m):
            seq.append(("CP", (k, j), (2 * np.pi / 2 ** (k - j + 1),)))
    for j in range(m // 2):
        seq.append(("SWAP", (j, m - 1 - j), ()))
    if inverse:
        seq = [(name, tgt, tuple(-p for p in params)) for name, tgt, params in reversed(seq)]
    return seq


def append_qft(c: Circuit, qubits, inverse: bool = False) -> Circuit:
    qubits = list(qubits)
    for name, tgt, params in qft_gates(len(qubits), inverse):
        c.gate(name, [qubits[t] for t in tgt], params)
    return c


@dataclass(frozen=True)
class QaeInstance:
    m: int
    p: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one evaluation qubit")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"amplitude must lie in [0, 1], got {self.p}")

    @property
    def theta0(self) -> float:
        return float(2 * np.arcsin(np.sqrt(self.p)))


def eval_qubit(j: int, m: int) -> int:
    """Circuit index of evaluation qubit ``j`` (1-indexed), which controls
    ``Q^(2^(j-1))`` and carries bit ``2^(j-1)`` of the estimate ``z``."""
    if not 1 <= j <= m:
        raise ValueError(f"evaluation qubit {j} out of range 1..{m}")
    return m - j


def append_controlled_ry(c: Circuit, control: int, target: int, angle: float) -> Circuit:
    """Controlled-Ry(angle) as Ry(angle/2), CX, Ry(-angle/2), CX."""
    c.gate("RY", target, [angle / 2])
    c.gate("CX", [control, target])
    c.gate("RY", target, [-angle / 2])
    c.gate("CX", [control, target])
    return c


def build_qae(inst: QaeInstance, *, measure: bool = True) -> Circuit:
    """Amplitude estimation with ``A = Ry(theta0)`` and ``Q = Ry(2 theta0)``.

    Evaluation qubits are ``0..m-1`` (read MSB first as ``z``); the state
    qubit is ``m``.
    """
    m = inst.m
    th = inst.theta0
    c = Circuit(m + 1, name=f"qae_m{m}_p{inst.p}", description=f"amplitude estimation, m={m}, p={inst.p}")
    for q in range(m):
        c.gate("H", q)
    c.gate("RY", m, [th])
    for j in range(1, m + 1):
        # Q^(2^(j-1)) = Ry(2^j theta0)
        append_controlled_ry(c, eval_qubit(j, m), m, 2**j * th)
    append_qft(c, range(m), inverse=True)
    if measure:
        c.measure(range(m))
    return c


def p_tilde(z, m: int):
    return np.sin(np.asarray(z) * np.pi / 2**m) ** 2


@dataclass
class EstimatorResult:
    m: int
    mass: np.ndarray  # per z, normalized
    p_tilde: np.ndarray  # per z
    peak_z: int
    peak_mass: float
    raw: dict = field(default_factory=dict)

    def binned(self) -> dict:
        """Mass per distinct estimate (``z`` and ``2^m - z`` merge)."""
        out: dict = {}
        n = 2**self.m
        for z in range(n):
            key = min(z, n - z) if z else 0
            out[key] = out.get(key, 0.0) + float(self.mass[z])
        return out

    def peak_bin(self) -> tuple:
        b = self.binned()
        z = max(b, key=lambda k: (b[k], -k))
        return z, b[z]

    def window_mass(self, p: float) -> float:
        """Mass on the two grid estimates that straddle ``p``.

        Averaging those two grid values gives the "peak" a figure-style bar
        chart centres on when ``p`` is off the grid.
        """
        n = 2**self.m
        pos = n * np.arcsin(np.sqrt(p)) / np.pi
        lo = int(np.floor(pos))
        zs = {lo, lo + 1} if lo < n // 2 else {lo}
        zs |= {(n - z) % n for z in zs}
        return float(sum(self.mass[z] for z in zs if 0 <= z < n))

    def estimate(self) -> float:
        return float(self.p_tilde[self.peak_z])


def qae_estimate(data, m: int) -> EstimatorResult:
    """Map a QAE outcome table (exact vector or :class:`Histogram`) to estimates."""
    if isinstance(data, Histogram):
        if data.n_bits != m:
            raise ValueError(f"histogram has {data.n_bits} bits, expected {m}")
        mass = data.probabilities()
        raw = dict(data.counts)
    else:
        mass = np.asarray(data, dtype=float)
        if mass.size != 2**m:
            raise ValueError(f"table has {mass.size} entries, expected {2**m}")
        mass = mass / mass.sum()
        raw = {index_to_bits(z, m): float(v) for z, v in enumerate(mass) if v}
    z = int(np.argmax(mass))
    return EstimatorResult(m, mass, p_tilde(np.arange(2**m), m), z, float(mass[z]), raw)
