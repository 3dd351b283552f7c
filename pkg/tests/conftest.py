import numpy as np
import pytest

from twirlmit.circuit import Circuit
from twirlmit.qcore import DensityMatrix


def random_density(n, rng, rank=None):
    d = 2**n
    rank = rank or d
    a = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = a @ a.conj().T
    return DensityMatrix(m / np.trace(m))


def random_unitary(d, rng):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_circuit(n, rng, depth=6, measure=True):
    c = Circuit(n, name="random")
    for _ in range(depth):
        for q in range(n):
            c.gate("U3", q, rng.uniform(0, 2 * np.pi, 3))
        if n > 1:
            a, b = rng.choice(n, 2, replace=False)
            c.gate("CX", [int(a), int(b)])
    if measure:
        c.measure()
    return c


def random_pauli_probs(rng, min_p0=0.0):
    while True:
        p = rng.dirichlet(np.ones(4))
        if p[0] >= min_p0:
            return tuple(float(x) for x in p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --- acceptance reporting ---------------------------------------------------------

ACCEPTANCE_LINES = []
SUITE_BUDGET_S = 600.0
_session = {}


@pytest.fixture
def record():
    def _record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _record


def pytest_sessionstart(session):
    import time

    _session["t0"] = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    import time

    if not ACCEPTANCE_LINES:
        return
    elapsed = time.perf_counter() - _session["t0"]
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        tr.write_line(line)
    ok = elapsed < SUITE_BUDGET_S
    tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion 8 (suite runtime): {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)")
