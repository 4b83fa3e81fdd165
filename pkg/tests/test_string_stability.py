import cmath

import numpy as np
import pytest

from conftest import CASES
from lcc.car_following import LinearGains
from lcc.errors import InvalidTopology, PoleAtEvaluationPoint
from lcc.string_stability import (
    STABLE,
    UNSTABLE,
    OmegaGrid,
    classify_peak,
    evaluate,
    frequency_response,
    gamma_head_to_tail,
    hdv_peak,
    magnitude_peak,
    phi_gamma,
    plant_stability,
    string_stability_verdict,
)
from lcc.system_builder import FeedbackGains, LccTopology, build


def hand_closed_loop(n, m, g, fb):
    """Vehicle-by-vehicle closed loop, written out without the library builder.

    Vehicles -m..n, state (s_i, v_i) each, head velocity as the input.
    """
    vehicles = list(range(-m, n + 1))
    N = 2 * len(vehicles)
    A = np.zeros((N, N))
    E = np.zeros(N)
    for j, veh in enumerate(vehicles):
        s, v = 2 * j, 2 * j + 1
        # spacing rate: predecessor velocity minus own velocity
        A[s, v] = -1.0
        if j == 0:
            E[s] = 1.0
        else:
            A[s, v - 2] = 1.0
        A[v, s] = g.alpha1
        A[v, v] = -g.alpha2
        if j == 0:
            E[v] = g.alpha3
        else:
            A[v, v - 2] = g.alpha3
        if veh == 0:
            for other, mu in fb.mu.items():
                A[v, 2 * vehicles.index(other)] += mu
            for other, k in fb.k.items():
                A[v, 2 * vehicles.index(other) + 1] += k
    return A, E, 2 * (len(vehicles) - 1) + 1


def hand_response(n, m, g, fb, w):
    A, E, row = hand_closed_loop(n, m, g, fb)
    return np.linalg.solve(1j * w * np.eye(A.shape[0]) - A, E)[row]


def random_fb(rng, topo, scale=2.0):
    idx = list(topo.preceding) + list(topo.followers)
    return FeedbackGains({i: rng.uniform(-scale, scale) for i in idx},
                         {i: rng.uniform(-scale, scale) for i in idx})


def test_phi_gamma_examples():
    g = LinearGains(0.9425, 1.5, 0.9)
    assert phi_gamma(g, 0) == (0.9425, 0.9425)
    phi, gam = phi_gamma(g, 1j)
    assert phi == pytest.approx(0.9425 + 0.9j, abs=1e-15)
    assert gam == pytest.approx((0.9425 - 1) + 1.5j, abs=1e-15)


def test_zero_gains_is_hdv_platoon(gains):
    rng = np.random.default_rng(5)
    topo = LccTopology(2, 2)
    for w in rng.uniform(1e-3, 10, 200):
        s = 1j * w
        r = (gains.alpha3 * s + gains.alpha1) / (s * s + gains.alpha2 * s + gains.alpha1)
        assert abs(gamma_head_to_tail(topo, gains, FeedbackGains(), s) - r ** 5) <= 1e-12 * max(1, abs(r ** 5))


def test_look_ahead_only_matches_ccc_form(gains):
    rng = np.random.default_rng(6)
    topo = LccTopology(2, 3)
    fb = FeedbackGains({-1: 1.3, -3: -0.4}, {-2: 0.7, -3: 0.2})
    for w in rng.uniform(1e-2, 5, 50):
        s = 1j * w
        phi = 0.9 * s + gains.alpha1
        gam = s * s + 1.5 * s + gains.alpha1
        total = phi
        for i in (-1, -2, -3):
            h = fb.mu.get(i, 0) * (gam / phi - 1) + fb.k.get(i, 0) * s
            total += h * (phi / gam) ** (i + 1)
        expect = total / gam * (phi / gam) ** 5
        assert abs(gamma_head_to_tail(topo, gains, fb, s) - expect) <= 1e-12 * max(1, abs(expect))


def test_look_behind_only_matches_form(gains):
    rng = np.random.default_rng(7)
    topo = LccTopology(3, 1)
    fb = FeedbackGains({1: -1.0, 3: 0.5}, {2: -1.0})
    for w in rng.uniform(1e-2, 5, 50):
        s = 1j * w
        phi = 0.9 * s + gains.alpha1
        gam = s * s + 1.5 * s + gains.alpha1
        den = gam
        for i in (1, 2, 3):
            den -= (fb.mu.get(i, 0) * (gam / phi - 1) + fb.k.get(i, 0) * s) * (phi / gam) ** i
        expect = phi / den * (phi / gam) ** 4
        assert abs(gamma_head_to_tail(topo, gains, fb, s) - expect) <= 1e-12 * max(1, abs(expect))


@pytest.mark.parametrize("n,m", [(1, 1), (2, 2), (3, 1), (1, 3)])
def test_formula_matches_hand_state_space(gains, n, m):
    rng = np.random.default_rng(10 * n + m)
    topo = LccTopology(n, m)
    for _ in range(5):
        fb = random_fb(rng, topo)
        for w in rng.uniform(1e-2, 10, 10):
            try:
                got = gamma_head_to_tail(topo, gains, fb, 1j * w)
            except PoleAtEvaluationPoint:
                continue
            ref = hand_response(n, m, gains, fb, w)
            assert abs(got - ref) <= 1e-8 * max(1.0, abs(ref))


def test_library_realization_matches_hand(gains):
    rng = np.random.default_rng(3)
    topo = LccTopology(2, 2)
    sys = build(topo, gains)
    fb = random_fb(rng, topo)
    ws = rng.uniform(1e-2, 10, 20)
    lib = frequency_response(sys, fb, ws)
    ref = np.array([hand_response(2, 2, gains, fb, w) for w in ws])
    assert np.allclose(lib, ref, rtol=1e-10, atol=1e-12)


def test_cf_variant_matches_hand(gains):
    # CF-LCC: n followers, no preceding HDVs, head directly ahead of the CAV
    topo = LccTopology(3, 0, "car_following")
    fb = FeedbackGains({2: 0.4}, {1: -0.8})
    for w in (0.1, 0.7, 2.0):
        got = gamma_head_to_tail(topo, gains, fb, 1j * w)
        assert abs(got - hand_response(3, 0, gains, fb, w)) < 1e-10


def test_dc_limit_and_symmetry(gains):
    rng = np.random.default_rng(11)
    topo = LccTopology(2, 2)
    for _ in range(20):
        fb = random_fb(rng, topo, 5.0)
        assert abs(gamma_head_to_tail(topo, gains, fb, 1e-6j) - 1) < 1e-4
        w = rng.uniform(0.05, 5)
        try:
            a = gamma_head_to_tail(topo, gains, fb, 1j * w)
            b = gamma_head_to_tail(topo, gains, fb, -1j * w)
        except PoleAtEvaluationPoint:
            continue
        assert b == pytest.approx(a.conjugate(), rel=1e-12)


def test_vectorized_matches_scalar(gains):
    topo = LccTopology(2, 2)
    ws = np.linspace(0.1, 3, 7)
    vec = gamma_head_to_tail(topo, gains, CASES["C"], 1j * ws)
    for w, z in zip(ws, vec):
        assert cmath.isclose(z, gamma_head_to_tail(topo, gains, CASES["C"], 1j * w), rel_tol=1e-14)


def test_evaluate_record(gains):
    rec = evaluate(LccTopology(1, 1), gains, FeedbackGains(), 0.5)
    assert rec.omega == 0.5
    assert rec.magnitude_sq == pytest.approx(abs(rec.gamma_value) ** 2)


def test_pole_detected():
    g = LinearGains(1.0, 2.0, 1.0)
    # phi(s) = s + 1 vanishes at s = -1
    with pytest.raises(PoleAtEvaluationPoint):
        gamma_head_to_tail(LccTopology(1, 1), g, FeedbackGains(), -1.0 + 0j)


def test_free_driving_has_no_gamma(gains):
    with pytest.raises(InvalidTopology):
        gamma_head_to_tail(LccTopology(2, 0, "free_driving"), gains, FeedbackGains(), 1j)


def test_hdv_local_string_unstable(gains):
    peak, w = hdv_peak(gains)
    assert peak > 1.0
    # brute-force the same peak on a dense grid
    ws = np.linspace(1e-3, 5, 200001)
    s = 1j * ws
    dense = np.max(np.abs((0.9 * s + gains.alpha1) / (s * s + 1.5 * s + gains.alpha1)))
    assert peak == pytest.approx(dense, rel=1e-8)
    assert 0.1 < w < 2.0


def test_hdv_chain_verdict(gains):
    v = string_stability_verdict(LccTopology(2, 2), gains, FeedbackGains())
    assert v.string_stable == UNSTABLE and v.peak_magnitude > 1
    assert v.plant_stable == STABLE and v.max_real_eigenvalue < 0


def test_table_cases(gains):
    topo = LccTopology(2, 2)
    verdicts = {c: string_stability_verdict(topo, gains, fb) for c, fb in CASES.items()}
    assert verdicts["A"].string_stable == STABLE
    assert verdicts["A"].peak_magnitude < 1
    assert verdicts["C"].peak_magnitude < verdicts["B"].peak_magnitude < verdicts["A"].peak_magnitude
    for v in verdicts.values():
        assert v.plant_stable == STABLE


def test_peak_never_below_dense_grid(gains):
    rng = np.random.default_rng(2)
    topo = LccTopology(2, 2)
    for _ in range(10):
        fb = random_fb(rng, topo)
        try:
            peak, _, _ = magnitude_peak(topo, gains, fb)
        except Exception:
            continue
        ws = np.logspace(-3, 2, 20000)
        dense = np.max(np.abs(gamma_head_to_tail(topo, gains, fb, 1j * ws)))
        assert peak >= dense * (1 - 1e-9)


def test_classify_peak_band():
    assert classify_peak(0.5, False, 1e-6) == STABLE
    assert classify_peak(1.5, False, 1e-6) == UNSTABLE
    assert classify_peak(1.0 + 1e-8, False, 1e-6) == "marginal"
    assert classify_peak(1.0 - 1e-8, True, 1e-6) == STABLE


def test_fd_plant_verdict_excludes_free_modes(gains):
    sys = build(LccTopology(1, 0, "free_driving"), gains)
    verdict, max_re = plant_stability(sys, FeedbackGains())
    assert verdict == STABLE and max_re < 0


def test_omega_grid_validation():
    with pytest.raises(ValueError):
        OmegaGrid(omega_min=1.0, omega_max=0.5)
    with pytest.raises(ValueError):
        OmegaGrid(points=2)
