import os
import subprocess
import sys

import numpy as np
import pytest

from twirlmit import _kernels


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    old = _kernels.get_backend()
    _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(old)


def _dense_embed(mat, targets, n):
    # independent oracle: build the full operator by permuting a kron product
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(mat, np.eye(2 ** (n - k)))
    order = list(targets) + rest
    perm = np.argsort(order)
    t = full.reshape((2,) * (2 * n))
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


@pytest.mark.parametrize("n,targets", [(1, [0]), (3, [1]), (3, [2, 0]), (4, [3, 1]), (5, [0, 4, 2])])
def test_apply_matrix_matches_dense_embedding(backend, n, targets, rng):
    k = len(targets)
    mat = rng.standard_normal((2**k, 2**k)) + 1j * rng.standard_normal((2**k, 2**k))
    vec = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    got = _kernels.apply_matrix(vec, n, mat, targets)
    assert np.allclose(got, _dense_embed(mat, targets, n) @ vec, atol=1e-12)


def test_real_dtype(backend, rng):
    vec = rng.random(16)
    mat = np.array([[0.9, 0.1], [0.1, 0.9]])
    got = _kernels.apply_matrix(vec, 4, mat, [2])
    assert got.dtype == np.float64
    assert np.allclose(got, _dense_embed(mat, [2], 4) @ vec)


def test_backends_agree(rng):
    vec = rng.standard_normal(2**10) + 0j
    mat = np.linalg.qr(rng.standard_normal((4, 4)))[0].astype(complex)
    out = {}
    for b in ("numba", "numpy"):
        _kernels.set_backend(b)
        out[b] = _kernels.apply_matrix(vec, 10, mat, [7, 2])
    _kernels.set_backend("numba")
    assert np.allclose(out["numba"], out["numpy"], atol=1e-13)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.set_backend("cuda")


def test_env_flag_selects_numpy():
    env = dict(os.environ, TWIRLMIT_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "import twirlmit; print(twirlmit.get_backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


@pytest.mark.parametrize("n,targets", [(1, [0]), (3, [0]), (3, [2]), (4, [3, 1]), (4, [0, 2, 3])])
def test_conjugate_matches_dense(backend, n, targets, rng):
    k = len(targets)
    op = rng.standard_normal((2**k, 2**k)) + 1j * rng.standard_normal((2**k, 2**k))
    m = rng.standard_normal((2**n, 2**n)) + 1j * rng.standard_normal((2**n, 2**n))
    big = _dense_embed(op, targets, n)
    got = _kernels.conjugate(m, n, op, targets)
    assert np.allclose(got, big @ m @ big.conj().T, atol=1e-12)


def test_conjugate_promotes_real_input():
    from twirlmit.qcore import Y, conjugate

    out = conjugate(np.diag([1.0, 0.0]), Y, [0], 1)
    assert np.allclose(out, np.diag([0, 1]))
    out = conjugate(np.array([[0.5, 0.5], [0.5, 0.5]]), np.diag([1, 1j]), [0], 1)
    assert out[0, 1] == pytest.approx(-0.5j)


@pytest.mark.parametrize("preset", ["fig3-double", "fig4-single"])
def test_backends_agree_on_presets(preset):
    from twirlmit.mitigation import mitigate_pipeline
    from twirlmit.presets import get_preset

    exp = get_preset(preset)
    out = {}
    old = _kernels.get_backend()
    for b in ("numba", "numpy"):
        _kernels.set_backend(b)
        out[b] = mitigate_pipeline(exp.circuit, exp.noise_channels(), exp.cfg, score=exp.score)
    _kernels.set_backend(old)
    for c in out["numba"].exact:
        assert np.abs(out["numba"].exact[c] - out["numpy"].exact[c]).max() < 1e-12
