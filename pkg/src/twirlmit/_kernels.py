"""Hot loops: applying a small matrix to selected qubits of a flat tensor.

Two interchangeable backends. The numba one walks the basis with bit
arithmetic; the numpy one reshapes and calls ``tensordot``. The numba path is
used when numba imports cleanly and ``TWIRLMIT_DISABLE_NUMBA`` is unset (or
``0``). ``set_backend`` switches at runtime, which the tests and the benchmark
use to compare both.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    njit = None

_DISABLED = os.environ.get("TWIRLMIT_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

BACKEND = "numba" if (njit is not None and not _DISABLED) else "numpy"


def set_backend(name: str) -> None:
    global BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and njit is None:
        raise RuntimeError("numba is not installed")
    BACKEND = name


def get_backend() -> str:
    return BACKEND


def _apply_matrix_numpy(vec, n, mat, targets):
    k = len(targets)
    t = vec.reshape((2,) * n)
    m = mat.reshape((2,) * (2 * k))
    t = np.tensordot(m, t, axes=(tuple(range(k, 2 * k)), tuple(targets)))
    t = np.moveaxis(t, tuple(range(k)), tuple(targets))
    return np.ascontiguousarray(t).reshape(-1)


def _conjugate_numpy(m, n, op, targets):
    vec = _apply_matrix_numpy(m.reshape(-1), 2 * n, op, targets)
    vec = _apply_matrix_numpy(vec, 2 * n, op.conj(), [n + t for t in targets])
    return vec.reshape(m.shape)


if njit is not None:

    @njit(cache=True)
    def _offsets(n, targets):
        k = targets.shape[0]
        dim_k = 1 << k
        # qubit 0 is the most significant bit
        shifts = np.empty(k, np.int64)
        for j in range(k):
            shifts[j] = n - 1 - targets[j]
        offsets = np.zeros(dim_k, np.int64)
        for a in range(dim_k):
            off = 0
            for j in range(k):
                if (a >> (k - 1 - j)) & 1:
                    off |= 1 << shifts[j]
            offsets[a] = off
        return np.sort(shifts), offsets

    @njit(cache=True)
    def _insert_zeros(r, ordered):
        base = r
        for s in ordered:
            low = base & ((1 << s) - 1)
            base = ((base >> s) << (s + 1)) | low
        return base

    @njit(cache=True)
    def _conjugate_1q(m, n, op, t):
        dim = 1 << n
        mask = 1 << (n - 1 - t)
        u00, u01, u10, u11 = op[0, 0], op[0, 1], op[1, 0], op[1, 1]
        c00, c01, c10, c11 = u00.conjugate(), u01.conjugate(), u10.conjugate(), u11.conjugate()
        out = np.empty_like(m)
        for hi in range(0, dim, 2 * mask):
            for lo in range(mask):
                i0 = hi + lo
                i1 = i0 + mask
                for hj in range(0, dim, 2 * mask):
                    for lj in range(mask):
                        j0 = hj + lj
                        j1 = j0 + mask
                        a, b = m[i0, j0], m[i0, j1]
                        c, d = m[i1, j0], m[i1, j1]
                        # rows: op @ block
                        r00 = u00 * a + u01 * c
                        r01 = u00 * b + u01 * d
                        r10 = u10 * a + u11 * c
                        r11 = u10 * b + u11 * d
                        # columns: block @ op^dagger
                        out[i0, j0] = r00 * c00 + r01 * c01
                        out[i0, j1] = r00 * c10 + r01 * c11
                        out[i1, j0] = r10 * c00 + r11 * c01
                        out[i1, j1] = r10 * c10 + r11 * c11
        return out

    @njit(cache=True)
    def _conjugate_2q(m, n, op, targets):
        ordered, offsets = _offsets(n, targets)
        opc = op.conj()
        groups = 1 << (n - 2)
        out = np.empty_like(m)
        blk = np.empty((4, 4), m.dtype)
        tmp = np.empty((4, 4), m.dtype)
        for r in range(groups):
            rb = _insert_zeros(r, ordered)
            for c in range(groups):
                cb = _insert_zeros(c, ordered)
                for a in range(4):
                    for b in range(4):
                        blk[a, b] = m[rb + offsets[a], cb + offsets[b]]
                for a in range(4):
                    for b in range(4):
                        tmp[a, b] = op[a, 0] * blk[0, b] + op[a, 1] * blk[1, b] + op[a, 2] * blk[2, b] + op[a, 3] * blk[3, b]
                for a in range(4):
                    for b in range(4):
                        out[rb + offsets[a], cb + offsets[b]] = (
                            tmp[a, 0] * opc[b, 0] + tmp[a, 1] * opc[b, 1] + tmp[a, 2] * opc[b, 2] + tmp[a, 3] * opc[b, 3]
                        )
        return out

    @njit(cache=True)
    def _conjugate_numba(m, n, op, targets):
        k = targets.shape[0]
        if k == 1:
            return _conjugate_1q(m, n, op, targets[0])
        if k == 2:
            return _conjugate_2q(m, n, op, targets)
        dim_k = 1 << k
        groups = 1 << (n - k)
        ordered, offsets = _offsets(n, targets)
        opc = op.conj()
        out = np.empty_like(m)
        for r in range(groups):
            rb = _insert_zeros(r, ordered)
            blk = np.empty((dim_k, dim_k), m.dtype)
            tmp = np.empty((dim_k, dim_k), m.dtype)
            for c in range(groups):
                cb = _insert_zeros(c, ordered)
                for a in range(dim_k):
                    for b in range(dim_k):
                        blk[a, b] = m[rb + offsets[a], cb + offsets[b]]
                # tmp = op @ blk ; out block = tmp @ op^dagger
                for a in range(dim_k):
                    for b in range(dim_k):
                        acc = op[a, 0] * blk[0, b]
                        for j in range(1, dim_k):
                            acc += op[a, j] * blk[j, b]
                        tmp[a, b] = acc
                for a in range(dim_k):
                    for b in range(dim_k):
                        acc = tmp[a, 0] * opc[b, 0]
                        for j in range(1, dim_k):
                            acc += tmp[a, j] * opc[b, j]
                        out[rb + offsets[a], cb + offsets[b]] = acc
        return out

    @njit(cache=True)
    def _apply_1q(vec, n, mat, t):
        dim = 1 << n
        mask = 1 << (n - 1 - t)
        m00, m01, m10, m11 = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
        out = np.empty_like(vec)
        for hi in range(0, dim, 2 * mask):
            for lo in range(mask):
                i0 = hi + lo
                i1 = i0 + mask
                a, b = vec[i0], vec[i1]
                out[i0] = m00 * a + m01 * b
                out[i1] = m10 * a + m11 * b
        return out

    @njit(cache=True)
    def _apply_matrix_numba(vec, n, mat, targets):
        k = targets.shape[0]
        if k == 1:
            return _apply_1q(vec, n, mat, targets[0])
        dim_k = 1 << k
        ordered, offsets = _offsets(n, targets)
        out = np.empty_like(vec)
        buf = np.empty(dim_k, vec.dtype)
        for r in range(1 << (n - k)):
            base = _insert_zeros(r, ordered)
            for a in range(dim_k):
                buf[a] = vec[base + offsets[a]]
            for a in range(dim_k):
                acc = mat[a, 0] * buf[0]
                for b in range(1, dim_k):
                    acc += mat[a, b] * buf[b]
                out[base + offsets[a]] = acc
        return out


def apply_matrix(vec: np.ndarray, n: int, mat: np.ndarray, targets) -> np.ndarray:
    """Return ``vec`` with ``mat`` applied on ``targets`` of an ``n``-qubit tensor.

    ``targets[0]`` is the most significant qubit of ``mat``. Input is not
    modified. ``vec`` and ``mat`` must share a dtype.
    """
    targets = np.asarray(targets, dtype=np.int64)
    mat = np.ascontiguousarray(mat, dtype=vec.dtype)
    if BACKEND == "numba":
        return _apply_matrix_numba(np.ascontiguousarray(vec), n, mat, targets)
    return _apply_matrix_numpy(vec, n, mat, [int(t) for t in targets])


def conjugate(m: np.ndarray, n: int, op: np.ndarray, targets) -> np.ndarray:
    """``A m A^dagger`` for a ``2^n`` square ``m``, with ``A`` = ``op`` on ``targets``.

    The numba path does both sides in one pass over ``m``.
    """
    targets = np.asarray(targets, dtype=np.int64)
    op = np.ascontiguousarray(op, dtype=m.dtype)
    if BACKEND == "numba":
        return _conjugate_numba(np.ascontiguousarray(m), n, op, targets)
    return _conjugate_numpy(m, n, op, [int(t) for t in targets])
