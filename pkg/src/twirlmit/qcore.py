"""Dense qubit linear algebra and the gate vocabulary.

Conventions used across the package:

* qubit 0 is the leftmost character of a printed bitstring and the most
  significant bit of a basis-state integer;
* operators are plain ``complex128`` numpy arrays;
* a density matrix on ``n`` qubits is wrapped in :class:`DensityMatrix`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels

ATOL = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

# The two non-trivial members of the three-element twirl set.
V = 0.5 * np.array([[1 - 1j, -1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
W = 0.5 * np.array([[-1 - 1j, -1 - 1j], [1 - 1j, -1 + 1j]], dtype=complex)

PROJ0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ1 = np.array([[0, 0], [0, 1]], dtype=complex)


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c],
        ],
        dtype=complex,
    )


def u2(phi: float, lam: float) -> np.ndarray:
    r = 1 / np.sqrt(2)
    return np.array(
        [[r, -np.exp(1j * lam) * r], [np.exp(1j * phi) * r, np.exp(1j * (lam + phi)) * r]],
        dtype=complex,
    )


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def phase(lam: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=complex)


def controlled(u: np.ndarray) -> np.ndarray:
    """|0><0| (x) I + |1><1| (x) U, control first."""
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out


H = u2(0.0, np.pi)
SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

_FIXED = {
    "I": I2,
    "X": X,
    "Y": Y,
    "Z": Z,
    "H": H,
    "V": V,
    "W": W,
    "SX": SX,
    "VDG": V.conj().T,
    "WDG": W.conj().T,
    "CX": controlled(X),
    "CNOT": controlled(X),
    "CY": controlled(Y),
    "CZ": controlled(Z),
    "SWAP": SWAP,
}

_PARAM = {
    "RY": (1, lambda t: ry(t)),
    "U2": (2, lambda a, b: u2(a, b)),
    "U3": (3, lambda a, b, c: u3(a, b, c)),
    "P": (1, lambda t: phase(t)),
    "PHASE": (1, lambda t: phase(t)),
    "CP": (1, lambda t: controlled(phase(t))),
    "CRY": (1, lambda t: controlled(ry(t))),
}

GATE_NAMES = tuple(sorted(set(_FIXED) | set(_PARAM)))


def gate_matrix(name: str, params: Sequence[float] = ()) -> np.ndarray:
    """Matrix of a named gate.

    >>> np.allclose(gate_matrix("RY", [np.pi]), [[0, -1], [1, 0]])
    True
    """
    key = name.upper()
    params = tuple(float(p) for p in params)
    if key in _FIXED:
        if params:
            raise ValueError(f"gate {name} takes no parameters, got {len(params)}")
        return _FIXED[key].copy()
    if key in _PARAM:
        arity, fn = _PARAM[key]
        if len(params) != arity:
            raise ValueError(f"gate {name} takes {arity} parameter(s), got {len(params)}")
        return fn(*params)
    raise ValueError(f"unknown gate {name!r}")


def gate_arity(name: str, params: Sequence[float] = ()) -> int:
    """Number of qubits the named gate acts on."""
    return int(np.log2(gate_matrix(name, params).shape[0]))


def is_unitary(u: np.ndarray, tol: float = ATOL) -> bool:
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < tol:
        return np.allclose(a, b, atol=tol)
    ph = a[idx] / b[idx]
    if not np.isclose(abs(ph), 1.0, atol=tol):
        return False
    return np.allclose(a, ph * b, atol=tol)


def tensor(*ops: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def bits_to_index(bits: str) -> int:
    return int(bits, 2) if bits else 0


def index_to_bits(index: int, n: int) -> str:
    return format(index, f"0{n}b") if n else ""


def statevector(bits: str) -> np.ndarray:
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[bits_to_index(bits)] = 1.0
    return psi


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A normalized, Hermitian, PSD ``2**n x 2**n`` matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        n = int(round(np.log2(m.shape[0])))
        if 2**n != m.shape[0]:
            raise ValueError("dimension must be a power of two")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.matrix.shape[0])))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_bits(cls, bits: str) -> "DensityMatrix":
        return cls.from_statevector(statevector(bits))

    @classmethod
    def zero(cls, n: int) -> "DensityMatrix":
        return cls.from_bits("0" * n)

    @classmethod
    def from_statevector(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    def check(self, tol: float = ATOL, eig_floor: float = -1e-10) -> None:
        """Raise ``ValueError`` if any state invariant is violated."""
        m = self.matrix
        if np.abs(m - m.conj().T).max() > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > tol:
            raise ValueError(f"density matrix trace is {np.trace(m).real:.3g}, not 1")
        if np.linalg.eigvalsh(m).min() < eig_floor:
            raise ValueError("density matrix has a negative eigenvalue")

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.matrix)), 0.0, None)

    def __matmul__(self, other):  # tensor product of states
        return DensityMatrix(np.kron(self.matrix, other.matrix))


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} out of range for {n} qubits")
    return targets


def conjugate(matrix: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """``A M B^dagger`` with ``A = B = op`` embedded on ``targets``.

    Works on the flattened ``2n``-qubit tensor: ``op`` on the row qubits and
    ``conj(op)`` on the column qubits. ``op`` need not be unitary.
    """
    dtype = np.result_type(matrix, op)
    return _kernels.conjugate(np.asarray(matrix, dtype=dtype), n, np.asarray(op, dtype=dtype), list(targets))


def apply_gate(state: DensityMatrix, gate: np.ndarray, targets: Sequence[int]) -> DensityMatrix:
    n = state.n_qubits
    targets = _check_targets(targets, n)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2 ** len(targets),) * 2:
        raise ValueError(f"gate of shape {gate.shape} does not act on {len(targets)} qubit(s)")
    return DensityMatrix(conjugate(state.matrix, gate, targets, n))


def partial_trace(state: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep``, in the order given."""
    n = state.n_qubits
    if len(keep) == 0:
        raise ValueError("keep must name at least one qubit")
    keep = _check_targets(keep, n)
    t = state.matrix.reshape((2,) * (2 * n))
    row = list(range(n))
    col = list(range(n, 2 * n))
    for q in range(n):
        if q not in keep:
            col[q] = row[q]
    out_idx = [row[q] for q in keep] + [col[q] for q in keep]
    red = np.einsum(t, row + col, out_idx)
    d = 2 ** len(keep)
    return DensityMatrix(red.reshape(d, d))
