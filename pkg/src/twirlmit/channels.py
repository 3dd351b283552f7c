"""Quantum channels in Kraus form and the twirls that turn them depolarizing.

Superoperators use column stacking: ``vec(K rho K^dag) = (conj(K) (x) K) vec(rho)``.
They are only used to compare channels and to rebuild Kraus sets.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qcore import (
    ATOL,
    I2,
    PAULIS,
    DensityMatrix,
    V,
    W,
    X,
    Y,
    Z,
    _check_targets,
    conjugate,
    is_unitary,
    tensor,
)

TP_TOL = 1e-10
CHOI_CUTOFF = 1e-12


@dataclass(frozen=True, eq=False)
class Channel:
    """A CPTP map given by Kraus operators.

    ``observable_map`` marks a Heisenberg-picture map (the adjoint of a
    channel), which is unital rather than trace preserving and is exempt from
    the trace-preservation check.
    """

    kraus: tuple
    observable_map: bool = False

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        n = int(round(np.log2(d)))
        if 2**n != d or any(k.shape != (d, d) for k in ops):
            raise ValueError("Kraus operators must be square with power-of-two dimension")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        if not self.observable_map:
            s = sum(k.conj().T @ k for k in ops)
            if np.abs(s - np.eye(d)).max() > TP_TOL:
                raise ValueError("Kraus operators are not trace preserving")

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.dim)))

    def __call__(self, m: np.ndarray) -> np.ndarray:
        return sum(k @ m @ k.conj().T for k in self.kraus)

    def superoperator(self) -> np.ndarray:
        return sum(np.kron(k.conj(), k) for k in self.kraus)

    def choi(self) -> np.ndarray:
        return superop_to_choi(self.superoperator())

    def is_unital(self, tol: float = TP_TOL) -> bool:
        return np.abs(self(np.eye(self.dim)) - np.eye(self.dim)).max() <= tol

    def compose(self, after: "Channel") -> "Channel":
        """The channel ``after o self``."""
        return Channel(tuple(b @ a for a in self.kraus for b in after.kraus))


@dataclass(frozen=True)
class PauliChannel:
    p0: float
    px: float
    py: float
    pz: float

    def __post_init__(self):
        ps = self.probs
        if min(ps) < 0:
            raise ValueError(f"Pauli probabilities must be non-negative, got {ps}")
        if abs(sum(ps) - 1) > ATOL:
            raise ValueError(f"Pauli probabilities must sum to 1, got {sum(ps)!r}")

    @property
    def probs(self) -> tuple:
        return (self.p0, self.px, self.py, self.pz)


def _check_twirl_member(u: np.ndarray) -> None:
    if not is_unitary(u):
        raise ValueError("twirl set members must be unitary")
    images = []
    for p in (X, Y, Z):
        img = u.conj().T @ p @ u
        hit = None
        for name, q in (("X", X), ("Y", Y), ("Z", Z)):
            for sign in (1, -1):
                if np.abs(img - sign * q).max() < 1e-10:
                    hit = name
        if hit is None:
            raise ValueError("twirl set member does not map Paulis to Paulis")
        images.append(hit)
    if sorted(images) != ["X", "Y", "Z"]:
        raise ValueError("twirl set member does not permute the Paulis")


@dataclass(frozen=True, eq=False)
class TwirlSet:
    """Three single-qubit unitaries that each permute {X, Y, Z} up to sign."""

    unitaries: tuple

    def __post_init__(self):
        us = tuple(np.array(u, dtype=complex) for u in self.unitaries)
        if len(us) != 3 or any(u.shape != (2, 2) for u in us):
            raise ValueError("a twirl set is exactly three 2x2 unitaries")
        for u in us:
            _check_twirl_member(u)
        object.__setattr__(self, "unitaries", us)

    def __iter__(self):
        return iter(self.unitaries)

    def __len__(self):
        return 3


DEFAULT_TWIRL_SET = TwirlSet((I2, V, W))


def pauli_permutation(u: np.ndarray) -> dict:
    """Images of X, Y, Z under ``P -> u^dag P u`` as ``{name: (sign, name)}``."""
    out = {}
    for pname, p in (("X", X), ("Y", Y), ("Z", Z)):
        img = u.conj().T @ p @ u
        for qname, q in (("X", X), ("Y", Y), ("Z", Z)):
            for sign in (1, -1):
                if np.abs(img - sign * q).max() < 1e-10:
                    out[pname] = (sign, qname)
    return out


def depolarizing(eta: float) -> Channel:
    """``rho -> (1 - eta) rho + eta I/2`` for ``0 <= eta <= 1``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"depolarizing strength must lie in [0, 1], got {eta}")
    a = np.sqrt(1 - 3 * eta / 4)
    b = np.sqrt(eta / 4)
    return Channel((a * I2, b * X, b * Y, b * Z))


def pauli_channel(p: PauliChannel | Sequence[float]) -> Channel:
    if not isinstance(p, PauliChannel):
        p = PauliChannel(*p)
    return Channel(tuple(np.sqrt(w) * m for w, m in zip(p.probs, (I2, X, Y, Z))))


def axis_channel(axis: str, p: float) -> Channel:
    """``(1 - p) id + p U . U^dag`` for a Pauli axis ``U``."""
    axis = axis.upper()
    if axis not in ("X", "Y", "Z"):
        raise ValueError(f"unknown axis {axis!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"flip probability must lie in [0, 1], got {p}")
    return Channel((np.sqrt(1 - p) * I2, np.sqrt(p) * PAULIS[axis]))


def identity_channel(n_qubits: int = 1) -> Channel:
    return Channel((np.eye(2**n_qubits, dtype=complex),))


def unitary_channel(u: np.ndarray) -> Channel:
    return Channel((np.asarray(u, dtype=complex),))


def channel_from_spec(name: str, params: Sequence[float] = ()) -> Channel:
    """Build a channel from a textual name, as used by circuit files and the CLI.

    Names: ``identity``, ``depolarizing eta``, ``pauli p0 px py pz``,
    ``flip_x p`` / ``flip_y p`` / ``flip_z p``.
    """
    key = name.lower()
    params = [float(v) for v in params]
    expected = {"identity": 0, "depolarizing": 1, "pauli": 4, "flip_x": 1, "flip_y": 1, "flip_z": 1}
    if key not in expected:
        raise ValueError(f"unknown channel {name!r}")
    if len(params) != expected[key]:
        raise ValueError(f"channel {name} takes {expected[key]} parameter(s), got {len(params)}")
    if key == "identity":
        return identity_channel()
    if key == "depolarizing":
        return depolarizing(params[0])
    if key == "pauli":
        return pauli_channel(params)
    return axis_channel(key[-1], params[0])


def apply_channel(state: DensityMatrix, ch: Channel, targets: Sequence[int]) -> DensityMatrix:
    n = state.n_qubits
    targets = _check_targets(targets, n)
    if ch.n_qubits != len(targets):
        raise ValueError(f"{ch.n_qubits}-qubit channel applied to {len(targets)} target(s)")
    m = state.matrix
    out = sum(conjugate(m, k, targets, n) for k in ch.kraus)
    return DensityMatrix(out)


def adjoint_channel(ch: Channel) -> Channel:
    """Heisenberg-picture map ``M -> sum K^dag M K``."""
    return Channel(tuple(k.conj().T for k in ch.kraus), observable_map=not ch.observable_map)


def superop_to_choi(s: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(s.shape[0])))
    # s[(b, a), (j, i)] = Lambda(|i><j|)[a, b];  choi[(i, a), (j, b)]
    return s.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


def choi_to_superop(j: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(j.shape[0])))
    return j.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


def kraus_from_choi(choi: np.ndarray, cutoff: float = CHOI_CUTOFF) -> tuple:
    d = int(round(np.sqrt(choi.shape[0])))
    choi = (choi + choi.conj().T) / 2
    vals, vecs = np.linalg.eigh(choi)
    if vals.min() < -1e-10:
        raise ValueError(f"Choi matrix is not positive (min eigenvalue {vals.min():.3g})")
    ops = []
    for lam, v in zip(vals, vecs.T):
        if lam > cutoff:
            ops.append(np.sqrt(lam) * v.reshape(d, d).T)
    return tuple(ops)


def channel_from_superop(s: np.ndarray) -> Channel:
    return Channel(kraus_from_choi(superop_to_choi(s)))


def _twirl_superop(s: np.ndarray, unitaries) -> np.ndarray:
    acc = np.zeros_like(s)
    for g in unitaries:
        sg = np.kron(g.conj(), g)
        sgd = sg.conj().T
        acc = acc + sgd @ s @ sg
    return acc / len(unitaries)


def twirl3(ch: Channel, twirl_set: TwirlSet = DEFAULT_TWIRL_SET) -> Channel:
    """``rho -> 1/3 sum_G G^dag ch[G rho G^dag] G`` over the three-element set."""
    if ch.n_qubits != 1:
        raise ValueError("the three-unitary twirl acts on single-qubit channels")
    return channel_from_superop(_twirl_superop(ch.superoperator(), twirl_set.unitaries))


def haar_unitaries(n_samples: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitaries via QR of a complex Ginibre matrix with phase fix."""
    z = (rng.standard_normal((n_samples, dim, dim)) + 1j * rng.standard_normal((n_samples, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def twirl_haar_superop(ch: Channel, n_samples: int, seed: int, chunk: int = 8192) -> np.ndarray:
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if ch.n_qubits != 1:
        raise ValueError("the Haar twirl is implemented for single-qubit channels")
    rng = np.random.default_rng(seed)
    s = ch.superoperator()
    acc = np.zeros_like(s)
    done = 0
    while done < n_samples:
        b = min(chunk, n_samples - done)
        u = haar_unitaries(b, 2, rng)
        # batched kron(conj(U), U)
        su = np.einsum("nac,nbd->nabcd", u.conj(), u).reshape(b, 4, 4)
        acc = acc + np.einsum("nji,jk,nkl->il", su.conj(), s, su)
        done += b
    return acc / n_samples


def twirl_haar_mc(ch: Channel, n_samples: int, seed: int) -> Channel:
    """Monte-Carlo estimate of the Haar twirl ``int dU U^dag ch[U rho U^dag] U``."""
    return channel_from_superop(twirl_haar_superop(ch, n_samples, seed))


def eta_of_pauli(p: PauliChannel | Sequence[float]) -> float:
    """Depolarizing strength produced by twirling a Pauli channel.

    Each of V and W cycles X, Y, Z, so the twirl spreads the non-identity
    weight evenly; a depolarizing channel puts ``eta/4`` on each Pauli, hence
    ``eta = 4/3 (px + py + pz)``.
    """
    if not isinstance(p, PauliChannel):
        p = PauliChannel(*p)
    return 4.0 * (p.px + p.py + p.pz) / 3.0


def collective_twirl_sim(
    state: DensityMatrix,
    per_qubit_channels: Sequence[Channel],
    twirl_set: TwirlSet = DEFAULT_TWIRL_SET,
) -> DensityMatrix:
    """Average of ``(G^n)^dag Lambda[G^n rho (G^n)^dag] G^n`` over the set,
    with ``Lambda`` the product of the given single-qubit channels."""
    n = state.n_qubits
    if len(per_qubit_channels) != n:
        raise ValueError(f"need {n} channels, got {len(per_qubit_channels)}")
    acc = np.zeros_like(state.matrix)
    for g in twirl_set:
        m = state.matrix
        for q in range(n):
            m = conjugate(m, g, [q], n)
        for q, ch in enumerate(per_qubit_channels):
            m = sum(conjugate(m, k, [q], n) for k in ch.kraus)
        gd = g.conj().T
        for q in range(n):
            m = conjugate(m, gd, [q], n)
        acc = acc + m
    return DensityMatrix(acc / len(twirl_set))


def noise_circuit_fragment(axis: str, theta: float):
    """Two-qubit circuit (system 0, ancilla 1) realizing ``axis_channel(axis, sin^2(theta/2))``.

    The ancilla starts in |0>, is rotated by ``Ry(theta)`` and then controls
    the axis Pauli on the system. Tracing out the ancilla leaves
    ``(1 - p) rho + p U rho U^dag`` with ``p = sin^2(theta/2)``.
    """
    from .circuit import Circuit

    axis = axis.upper()
    if axis not in ("X", "Y", "Z"):
        raise ValueError(f"unknown axis {axis!r}")
    c = Circuit(2, name=f"noise_{axis.lower()}", description=f"{axis}-flip via ancilla, theta={theta}")
    c.noise_gate("RY", [1], [theta])
    c.noise_gate("C" + axis, [1, 0])
    c.measure([0])
    return c


def fragment_probability(theta: float) -> float:
    return float(np.sin(theta / 2) ** 2)


def theta_for_probability(p: float) -> float:
    return float(2 * np.arcsin(np.sqrt(p)))


def superop_distance(a: Channel, b: Channel) -> float:
    return float(np.abs(a.superoperator() - b.superoperator()).max())


def product_channel(channels: Sequence[Channel]) -> Channel:
    """Tensor product of channels (exponential in Kraus count; small n only)."""
    ops = [np.eye(1, dtype=complex)]
    for ch in channels:
        ops = [tensor(a, k) for a in ops for k in ch.kraus]
    return Channel(tuple(ops))
