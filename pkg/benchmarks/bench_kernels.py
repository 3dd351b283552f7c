"""Time the numba and numpy backends on kernels and on full preset runs.

    python3 benchmarks/bench_kernels.py --qubits 6 8 10 --repeat 5
"""
import argparse
import time

import numpy as np

from twirlmit import _kernels
from twirlmit.circuit import MeasurementModel, run_with_twirl
from twirlmit.presets import get_preset
from twirlmit.qcore import gate_matrix


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_layer(n, gate, repeat, rng):
    # one conjugation per qubit (H layer) or per neighbouring pair (CX ring)
    m = rng.standard_normal((2**n, 2**n)) + 1j * rng.standard_normal((2**n, 2**n))
    u = gate_matrix(gate)
    k = int(np.log2(u.shape[0]))
    targets = [[(q + j) % n for j in range(k)] for q in range(n)]

    def work():
        out = m
        for t in targets:
            out = _kernels.conjugate(out, n, u, t)
        return out

    return best_of(work, repeat)


def bench_correction(n_bits, repeat, rng):
    # the per-bit response inverse over a dense 2^n outcome table
    table = rng.dirichlet(np.ones(2**n_bits))
    inv = np.array([[0.95, -0.05], [-0.05, 0.95]]) / 0.9

    def work():
        v = table
        for k in range(n_bits):
            v = _kernels.apply_matrix(v, n_bits, inv, [k])
        return v

    return best_of(work, repeat)


def bench_preset(name, repeat):
    exp = get_preset(name)
    meas = MeasurementModel("state_noise", exp.noise_channels())
    return best_of(lambda: run_with_twirl(exp.circuit, meas), repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, nargs="+", default=[6, 8, 10])
    ap.add_argument("--bits", type=int, nargs="+", default=[16, 20])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--presets", nargs="*", default=["fig3-double", "fig4-single"])
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    initial = _kernels.get_backend()

    # warm the JIT so compile time is not charged to the first row
    _kernels.set_backend("numba")
    _kernels.apply_matrix(np.zeros(4, complex), 2, np.eye(2, dtype=complex), [0])
    _kernels.apply_matrix(np.zeros(4), 2, np.eye(2), [0])
    for k in (1, 2, 3):
        _kernels.conjugate(np.zeros((8, 8), complex), 3, np.eye(2**k, dtype=complex), list(range(k)))

    print(f"{'case':<22}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    rows = []
    for n in args.qubits:
        rows.append((f"H layer, n={n}", lambda n=n: bench_layer(n, "H", args.repeat, rng)))
        rows.append((f"CX ring, n={n}", lambda n=n: bench_layer(n, "CX", args.repeat, rng)))
    rows += [(f"correction, {b} bits", lambda b=b: bench_correction(b, args.repeat, rng)) for b in args.bits]
    rows += [(f"twirl run {p}", lambda p=p: bench_preset(p, args.repeat)) for p in args.presets]
    for label, fn in rows:
        t = {}
        for backend in ("numba", "numpy"):
            _kernels.set_backend(backend)
            t[backend] = fn()
        print(f"{label:<22}{t['numba']:>12.4f}{t['numpy']:>12.4f}{t['numpy'] / t['numba']:>10.2f}")
    _kernels.set_backend(initial)


if __name__ == "__main__":
    main()
