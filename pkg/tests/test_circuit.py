import json

import numpy as np
import pytest

from twirlmit.algorithms import build_bv
from twirlmit.channels import axis_channel, collective_twirl_sim, depolarizing, identity_channel, pauli_channel
from twirlmit.circuit import (
    Circuit,
    CircuitParseError,
    Histogram,
    MeasurementModel,
    dumps,
    evolve,
    loads,
    marginal,
    run_exact,
    run_with_twirl,
    sample,
    twirl_branches,
)
from twirlmit.qcore import partial_trace

from conftest import random_circuit, random_pauli_probs

S = "10010001"


def test_empty_circuit():
    assert np.array_equal(run_exact(Circuit(1).measure()), [1.0, 0.0])


def test_hadamard_distribution():
    p = run_exact(Circuit(1).gate("H", 0).measure())
    assert np.abs(p - 0.5).max() < 1e-12


@pytest.mark.parametrize("mode", ["state_noise", "detector_noise"])
def test_x_noise_both_placements(mode):
    p = run_exact(Circuit(1).measure(), MeasurementModel(mode, {0: axis_channel("X", 0.3)}))
    assert np.allclose(p, [0.7, 0.3], atol=1e-12)


def test_measured_subset_order():
    c = Circuit(3).gate("X", 2).measure([2, 0])
    p = run_exact(c)
    assert p[0b10] == pytest.approx(1)


def test_builder_validation():
    c = Circuit(2)
    with pytest.raises(IndexError):
        c.gate("X", 2)
    with pytest.raises(ValueError):
        c.gate("CX", [0, 0])
    with pytest.raises(ValueError):
        c.measure([0, 0])
    with pytest.raises(ValueError):
        run_exact(Circuit(1))


def test_channels_are_noise_ops():
    c = Circuit(1).channel("depolarizing", 0, [0.2])
    assert c.ops[0].noise


# --- marginal ------------------------------------------------------------------------

def test_marginal_examples():
    assert marginal(np.full(4, 0.25), 0) == pytest.approx((0.5, 0.5))
    assert marginal(np.array([0, 0, 1.0, 0]), 0) == pytest.approx((0, 1))
    with pytest.raises(ValueError):
        marginal(np.full(4, 0.25), 2, measured=[0, 1])


def test_marginal_bv():
    p = run_exact(build_bv(S))
    for k, bit in enumerate(S):
        m = marginal(p, k, measured=list(range(8)))
        assert m == pytest.approx((0.0, 1.0) if bit == "1" else (1.0, 0.0), abs=1e-12)


def test_depolarized_marginal_relation(rng):
    for _ in range(20):
        n = int(rng.integers(1, 5))
        c = random_circuit(n, rng, depth=3)
        k = int(rng.integers(n))
        eta = float(rng.uniform(0, 1))
        ideal = marginal(run_exact(c), k)
        noisy = marginal(run_exact(c, MeasurementModel("state_noise", {k: depolarizing(eta)})), k)
        for x in (0, 1):
            assert abs(noisy[x] - ((1 - eta) * ideal[x] + eta / 2)) < 1e-10


# --- sampling --------------------------------------------------------------------------

def test_sample_point_distribution():
    h = sample(np.array([0, 0, 1.0, 0]), 100, seed=1)
    assert h.counts == {"10": 100}


def test_sample_band_and_repeat():
    h = sample(np.array([0.7, 0.3]), 8192, seed=7)
    assert 0.685 <= h.counts["0"] / 8192 <= 0.715
    assert sample(np.array([0.7, 0.3]), 8192, seed=7) == h
    assert sum(h.counts.values()) == h.shots


def test_histogram_validation_and_json():
    with pytest.raises(ValueError):
        Histogram(2, {"01": 3}, 4)
    with pytest.raises(ValueError):
        Histogram(2, {"1": 4}, 4)
    h = Histogram(2, {"01": 3, "11": 1}, 4)
    d = json.loads(h.to_json())
    assert d["shots"] == 4 and d["counts"]["01"] == 3
    assert Histogram.from_dict(d) == h


# --- duality ----------------------------------------------------------------------------

def test_duality_random_circuits(rng):
    for _ in range(20):
        n = int(rng.integers(1, 5))
        c = random_circuit(n, rng, depth=4)
        noise = {q: pauli_channel(random_pauli_probs(rng)) for q in range(n) if rng.random() < 0.7}
        a = run_exact(c, MeasurementModel("state_noise", noise))
        b = run_exact(c, MeasurementModel("detector_noise", noise))
        assert np.abs(a - b).max() < 1e-10
        assert abs(a.sum() - 1) < 1e-10


def test_noise_site_position_matters():
    # noise before the final H is not readout noise
    c = Circuit(1).gate("H", 0).noise_site().gate("H", 0).measure()
    meas = MeasurementModel("state_noise", {0: axis_channel("X", 0.3)})
    assert np.allclose(run_exact(c, meas), [1, 0], atol=1e-12)
    c2 = Circuit(1).gate("H", 0).gate("H", 0).measure()
    assert np.allclose(run_exact(c2, meas), [0.7, 0.3])


# --- twirl ------------------------------------------------------------------------------

def test_twirl_noiseless_is_identity(rng):
    c = random_circuit(3, rng)
    got = run_with_twirl(c, MeasurementModel("state_noise", {}))
    assert np.abs(got - run_exact(c)).max() < 1e-12


def test_twirl_bv_single_noise_exact():
    c = build_bv(S)
    meas = MeasurementModel("state_noise", {4: axis_channel("X", 0.3)})
    assert run_with_twirl(c, meas)[int(S, 2)] == pytest.approx(0.8, abs=1e-12)


def test_twirl_bv_per_shot():
    c = build_bv(S)
    meas = MeasurementModel("state_noise", {4: axis_channel("X", 0.3)})
    h = run_with_twirl(c, meas, mode="per_shot", shots=8192, seed=11)
    assert abs(h.counts.get(S, 0) / 8192 - 0.8) <= 0.015
    again = run_with_twirl(c, meas, mode="per_shot", shots=8192, seed=11)
    assert again == h


def test_twirl_matches_collective_sim(rng):
    for _ in range(5):
        n = 3
        c = random_circuit(n, rng, depth=3)
        chans = [pauli_channel(random_pauli_probs(rng)) for _ in range(n)]
        got = run_with_twirl(c, MeasurementModel("state_noise", dict(enumerate(chans))))
        unmeasured = Circuit(n)
        unmeasured.ops = list(c.ops)
        want = collective_twirl_sim(evolve(unmeasured.measure()), chans).probabilities()
        assert np.abs(got - want).max() < 1e-10


def test_twirl_rejects_detector_mode():
    c = Circuit(1).measure()
    with pytest.raises(ValueError, match="detector"):
        run_with_twirl(c, MeasurementModel("detector_noise", {0: identity_channel()}))


def test_twirl_branch_layout():
    c = build_bv("101")
    branches = twirl_branches(c)
    assert [b.ops[-1].name for b in branches] == ["I", "VDG", "WDG"]
    kinds = [op.kind for op in branches[1].ops]
    assert kinds.count("noise_site") == 1


def test_twirl_wraps_ancilla_noise_fragment():
    from twirlmit.presets import NoiseSpec, with_ancilla_noise

    c = with_ancilla_noise(build_bv(S), [NoiseSpec(4, "X", 0.3)])
    assert run_exact(c)[int(S, 2)] == pytest.approx(0.7, abs=1e-12)
    assert run_with_twirl(c, MeasurementModel("state_noise", {}))[int(S, 2)] == pytest.approx(0.8, abs=1e-12)


# --- text format --------------------------------------------------------------------------

def test_roundtrip(rng):
    c = random_circuit(3, rng, measure=False)
    c.noise_site().channel("pauli", 1, [0.7, 0.1, 0.1, 0.1]).noise_gate("X", 2).measure([2, 0])
    again = loads(dumps(c))
    assert dumps(again) == dumps(c)
    meas = MeasurementModel("state_noise", {0: depolarizing(0.2)})
    assert np.array_equal(run_exact(again, meas), run_exact(c, meas))


def test_roundtrip_twirl_branches():
    for b in twirl_branches(build_bv("11")):
        assert np.array_equal(run_exact(loads(dumps(b))), run_exact(b))


def test_loads_comments_and_case():
    text = "# bell\nqubits 2\ngate H 0   # hadamard\nGATE CX 0,1\nmeasure\n"
    p = run_exact(loads(text))
    assert p == pytest.approx([0.5, 0, 0, 0.5])


@pytest.mark.parametrize(
    "text,lineno",
    [
        ("GATE H 0\n", 1),
        ("QUBITS 1\nGATE FOO 0\nMEASURE 0\n", 2),
        ("QUBITS 1\nGATE H 3\nMEASURE 0\n", 2),
        ("QUBITS 1\nGATE RY 0 abc\nMEASURE 0\n", 2),
        ("QUBITS 1\nBLAH\n", 2),
        ("QUBITS 1\nCHANNEL depolarizing 0 1.5\nMEASURE 0\n", 2),
        ("QUBITS 1\nGATE H 0\n", 0),
        ("", 0),
    ],
)
def test_parse_errors(text, lineno):
    with pytest.raises(CircuitParseError) as exc:
        loads(text)
    assert exc.value.lineno == lineno


def test_evolve_trace_out_ancilla():
    c = Circuit(2).gate("H", 0).gate("CX", [0, 1]).measure([0])
    assert np.allclose(partial_trace(evolve(c), [0]).matrix, np.eye(2) / 2)
