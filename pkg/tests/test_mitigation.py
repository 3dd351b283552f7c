import json

import numpy as np
import pytest

from twirlmit.algorithms import build_bv
from twirlmit.channels import axis_channel, depolarizing, eta_of_pauli, identity_channel, pauli_channel
from twirlmit.circuit import Circuit, Histogram, MeasurementModel, marginal, run_exact, run_with_twirl
from twirlmit.mitigation import (
    ETA_PRESETS,
    MitigationConfig,
    QuasiDistribution,
    calibrate_eta,
    correct_joint,
    correct_marginal,
    inverse_response,
    mitigate_pipeline,
    premeasure_twirl_pass,
    project_to_simplex,
    randomized_schedule,
    response_matrix,
    simulator_runner,
)
from twirlmit.presets import get_preset

from conftest import random_circuit

S = "10010001"
IDX = int(S, 2)


# --- config ----------------------------------------------------------------------------

def test_presets_and_validation():
    assert MitigationConfig.preset("ibm-low").default_eta == 0.02
    assert MitigationConfig.preset("ibm-high").eta_for(5) == 0.05
    assert set(ETA_PRESETS) == {"ibm-low", "ibm-high"}
    with pytest.raises(ValueError):
        MitigationConfig(eta={0: 1.0})
    with pytest.raises(ValueError):
        MitigationConfig(negative_policy="drop")
    with pytest.raises(ValueError):
        MitigationConfig.preset("ibm-mid")


def test_quasi_distribution_sum_checked():
    with pytest.raises(ValueError):
        QuasiDistribution(1, np.array([0.5, 0.4]))


# --- twirl pass -------------------------------------------------------------------------

def test_premeasure_pass_identity_branch():
    c = build_bv("101")
    branches = premeasure_twirl_pass(c)
    first = branches[0]
    assert len(first.ops) == len(c.ops) + 2 * 3 + 1
    assert np.array_equal(run_exact(first), run_exact(c))


def test_premeasure_pass_noiseless_average(rng):
    c = random_circuit(3, rng)
    avg = sum(run_exact(b) for b in premeasure_twirl_pass(c)) / 3
    assert np.abs(avg - run_exact(c)).max() < 1e-12


def test_premeasure_pass_matches_run_with_twirl():
    c = build_bv(S)
    meas = MeasurementModel("state_noise", {4: axis_channel("X", 0.3), 7: axis_channel("X", 0.3)})
    avg = sum(run_exact(b, meas) for b in premeasure_twirl_pass(c)) / 3
    assert np.abs(avg - run_with_twirl(c, meas)).max() < 1e-10
    # one shared G per branch: (0.7^2 + 1 + 0.7^2) / 3
    assert avg[IDX] == pytest.approx(0.66, abs=1e-12)


def test_premeasure_pass_needs_measurement():
    with pytest.raises(ValueError):
        premeasure_twirl_pass(Circuit(1))


def test_randomized_schedule_deterministic():
    a = randomized_schedule(1000, 3)
    assert np.array_equal(a, randomized_schedule(1000, 3))
    assert set(np.unique(a)) == {0, 1, 2}


# --- marginal correction ------------------------------------------------------------------

@pytest.mark.parametrize("p_obs,eta,want", [(0.5, 0.3, 0.5), (0.8, 0.4, 1.0), (0.8, 0.1, 0.75 / 0.9)])
def test_correct_marginal_examples(p_obs, eta, want):
    assert correct_marginal(p_obs, eta) == pytest.approx(want, abs=1e-12)


def test_correct_marginal_inverse_and_monotone(rng):
    for _ in range(100):
        p, eta = rng.random(), rng.uniform(0, 0.99)
        assert abs(correct_marginal((1 - eta) * p + eta / 2, eta) - p) < 1e-12
    xs = np.linspace(0, 1, 11)
    ys = [correct_marginal(x, 0.3) for x in xs]
    assert all(b > a for a, b in zip(ys, ys[1:]))
    with pytest.raises(ValueError):
        correct_marginal(0.5, 1.0)


def test_response_inverse():
    for eta in (0.0, 0.1, 0.9):
        assert np.allclose(response_matrix(eta) @ inverse_response(eta), np.eye(2))


# --- joint correction ----------------------------------------------------------------------

def _bv_depolarized(eta):
    meas = MeasurementModel("state_noise", {4: depolarizing(eta), 7: depolarizing(eta)})
    return run_exact(build_bv(S), meas)


def test_correct_joint_zero_eta(rng):
    t = rng.dirichlet(np.ones(8))
    assert np.array_equal(correct_joint(t, MitigationConfig()).weights, t)


def test_correct_joint_examples():
    noisy = _bv_depolarized(0.4)
    assert noisy[IDX] == pytest.approx(0.64, abs=1e-12)
    full = correct_joint(noisy, MitigationConfig(eta={4: 0.4, 7: 0.4}))
    assert full.weights[IDX] == pytest.approx(1.0, abs=1e-9)
    under = correct_joint(noisy, MitigationConfig(eta={4: 0.1, 7: 0.1}))
    assert under.weights[IDX] == pytest.approx((0.75 / 0.9) ** 2, abs=1e-9)
    assert round(under.weights[IDX], 4) == 0.6944


def test_correct_joint_on_collectively_twirled_bv():
    c = build_bv(S)
    meas = MeasurementModel("state_noise", {4: axis_channel("X", 0.3), 7: axis_channel("X", 0.3)})
    tw = run_with_twirl(c, meas)
    w = correct_joint(tw, MitigationConfig(eta={4: 0.4, 7: 0.4})).weights
    # correlated flips survive the per-bit inverse: marginals are exact, the joint overshoots
    for k in (4, 7):
        assert marginal(w, k)[int(S[k])] == pytest.approx(1.0, abs=1e-12)
    # flip-pattern weights (none, one, one, both) = (0.66, 0.14, 0.14, 0.06); invert rate 0.2 on each bit
    want = (0.8 * 0.8 * 0.66 - 2 * 0.8 * 0.2 * 0.14 + 0.2 * 0.2 * 0.06) / 0.36
    assert want == pytest.approx(0.38 / 0.36)
    assert w[IDX] == pytest.approx(want, abs=1e-12)


def test_correct_joint_accepts_histogram_and_dict():
    h = Histogram(1, {"0": 5734, "1": 2458}, 8192)
    a = correct_joint(h, MitigationConfig(default_eta=0.4))
    b = correct_joint({"0": 5734 / 8192, "1": 2458 / 8192}, MitigationConfig(default_eta=0.4))
    assert a.weights[0] == pytest.approx(0.8333, abs=1e-4)
    assert np.allclose(a.weights, b.weights)


def test_correct_joint_errors():
    with pytest.raises(ValueError):
        correct_joint(np.ones(3) / 3, MitigationConfig())
    with pytest.raises(ValueError):
        correct_joint(np.ones(4) / 4, MitigationConfig(eta={5: 0.1}))
    with pytest.raises(ValueError):
        correct_joint(np.ones(4) / 4, MitigationConfig(), measured=[0])


def test_exact_inverse_random_circuits(rng):
    for i in range(20):
        n = int(rng.integers(1, 5))
        c = random_circuit(n, rng, depth=3)
        eta = (0.1, 0.4)[i % 2]
        noisy = run_exact(c, MeasurementModel("state_noise", {q: depolarizing(eta) for q in range(n)}))
        got = correct_joint(noisy, MitigationConfig(default_eta=eta)).weights
        assert np.abs(got - run_exact(c)).max() < 1e-9


def test_marginal_consistency(rng):
    for _ in range(30):
        n = int(rng.integers(1, 6))
        t = rng.dirichlet(np.ones(2**n))
        etas = {q: float(rng.uniform(0, 0.9)) for q in range(n)}
        w = correct_joint(t, MitigationConfig(eta=etas)).weights
        assert abs(w.sum() - 1) < 1e-9
        for k in range(n):
            want = correct_marginal(marginal(t, k)[1], etas[k])
            assert abs(marginal(w, k)[1] - want) < 1e-9


def _product_table(probs_one):
    t = np.array([1.0])
    for a in probs_one:
        t = np.kron(t, [1 - a, a])
    return t


def test_argmax_preserved_on_product_tables(rng):
    for _ in range(50):
        n = int(rng.integers(1, 6))
        t = _product_table(rng.random(n))
        eta = float(rng.uniform(0, 0.95))
        w = correct_joint(t, MitigationConfig(default_eta=eta)).weights
        assert np.argmax(w) == np.argmax(t)


def test_argmax_not_preserved_in_general():
    t = np.array([0.4, 0.39, 0.21, 0.0])
    w = correct_joint(t, MitigationConfig(default_eta=0.8)).weights
    assert np.argmax(t) == 0
    assert np.argmax(w) == 1


def test_twirl_and_correction_never_hurt_bv(rng):
    for _ in range(40):
        n = int(rng.integers(1, 7))
        s = "".join(rng.choice(["0", "1"], n))
        c = build_bv(s)
        noise, eta_used = {}, {}
        for q in range(n):
            if rng.random() < 0.5:
                px, py = rng.uniform(0, 0.25, 2)
                pz = rng.uniform(0, (px + py) / 2)
                p = (1 - px - py - pz, px, py, pz)
                noise[q] = pauli_channel(p)
                eta_used[q] = float(rng.uniform(0, 1)) * eta_of_pauli(p)
        meas = MeasurementModel("state_noise", noise)
        noisy = run_exact(c, meas)[int(s, 2)]
        cor = correct_joint(run_with_twirl(c, meas), MitigationConfig(eta=eta_used), c.measured)
        assert cor.weights[int(s, 2)] >= noisy - 1e-12


def test_z_noise_counterexample_to_monotonicity():
    # Z noise is invisible to the readout but the twirl turns it into flips
    c = build_bv(S)
    meas = MeasurementModel("state_noise", {4: axis_channel("Z", 0.3)})
    assert run_exact(c, meas)[IDX] == pytest.approx(1.0)
    cor = correct_joint(run_with_twirl(c, meas), MitigationConfig(eta={4: 0.1}))
    assert cor.weights[IDX] < 1.0


# --- simplex projection ----------------------------------------------------------------------

def test_project_examples():
    p, tv = project_to_simplex(np.array([0.2, 0.8]))
    assert np.array_equal(p, [0.2, 0.8]) and tv == 0
    q = QuasiDistribution(2, np.array([1.06, -0.06, 0.0, 0.0]))
    p, tv = project_to_simplex(q)
    assert np.allclose(p, [1, 0, 0, 0]) and tv == pytest.approx(0.06)
    p, _ = project_to_simplex(np.full(4, 0.25))
    assert np.allclose(p, 0.25)
    with pytest.raises(ValueError):
        project_to_simplex(np.array([-0.5, 0.0]))


def test_clip_policy():
    t = np.array([0.4, 0.39, 0.21, 0.0])
    out = correct_joint(t, MitigationConfig(default_eta=0.8, negative_policy="clip_renormalize"))
    assert out.weights.min() >= 0 and out.tv_clip_loss > 0
    assert json.loads(out.to_json())["policy"] == "clip_renormalize"


# --- calibration ---------------------------------------------------------------------------------

def test_calibrate_noiseless():
    res = calibrate_eta(simulator_runner(), 2, 1000, seed=1)
    assert res.eta == {0: 0.0, 1: 0.0}


def test_calibrate_depolarizing():
    res = calibrate_eta(simulator_runner({0: depolarizing(0.4), 1: depolarizing(0.4)}), 2, 100_000, seed=3)
    assert all(0.39 <= e <= 0.41 for e in res.eta.values())


def test_calibrate_x_flip():
    res = calibrate_eta(simulator_runner({0: axis_channel("X", 0.3)}), 1, 100_000, seed=4)
    assert res.eta[0] == pytest.approx(0.6, abs=0.01)
    assert res.asymmetry[0] < 0.01


def test_calibrate_detector_mode_same_as_state():
    noise = {0: axis_channel("X", 0.2)}
    a = calibrate_eta(simulator_runner(noise, "state_noise"), 1, 5000, seed=9)
    b = calibrate_eta(simulator_runner(noise, "detector_noise"), 1, 5000, seed=9)
    assert a.eta == b.eta


def test_calibrate_needs_shots():
    with pytest.raises(ValueError):
        calibrate_eta(simulator_runner(), 1, 0, seed=0)


# --- pipeline --------------------------------------------------------------------------------------

def test_pipeline_fig3_single_exact():
    exp = get_preset("fig3-single")
    rep = mitigate_pipeline(exp.circuit, exp.noise_channels(), exp.cfg, score=exp.score)
    want = {"ideal": 1.0, "noisy": 0.7, "twirled": 0.8, "corrected": 0.75 / 0.9}
    for c, v in want.items():
        assert rep.scores_exact[c] == pytest.approx(v, abs=1e-9)
    assert rep.ok


def test_pipeline_noiseless(rng):
    c = random_circuit(3, rng)
    rep = mitigate_pipeline(c, {}, MitigationConfig())
    for t in rep.exact.values():
        assert np.abs(t - rep.exact["ideal"]).max() < 1e-10


def test_pipeline_identity_noise_with_eta_zero(rng):
    c = random_circuit(2, rng)
    rep = mitigate_pipeline(c, {0: identity_channel()}, MitigationConfig())
    assert np.abs(rep.exact["corrected"] - rep.exact["ideal"]).max() < 1e-10


@pytest.mark.parametrize("name", ["fig4-single", "fig4-double"])
def test_pipeline_qae_ordering(name):
    exp = get_preset(name)
    rep = mitigate_pipeline(exp.circuit, exp.noise_channels(), exp.cfg, score=exp.score)
    s = rep.scores_exact
    assert s["noisy"] < s["twirled"] < s["corrected"] < s["ideal"]


def test_pipeline_sampled_deterministic():
    exp = get_preset("fig3-single")
    a = mitigate_pipeline(exp.circuit, exp.noise_channels(), exp.cfg, shots=2048, seed=5, score=exp.score)
    b = mitigate_pipeline(exp.circuit, exp.noise_channels(), exp.cfg, shots=2048, seed=5, score=exp.score)
    assert a.to_json() == b.to_json()
    for h in a.histograms.values():
        assert sum(h.counts.values()) == 2048
