import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcpnc.channel import apply_channel, generate_phase_walk
from mcpnc.eks import (
    ANCHOR_PRECISION,
    UNINFORMATIVE_VAR,
    SoftSymbolStats,
    ekf_forward,
    rtss_backward,
    single_step_phase_estimate,
    smooth,
)
from mcpnc.errors import ZeroSymbol
from mcpnc.model import CovarianceSpec, build_covariance, make_qam
from mcpnc.oracles import ekf_forward_product_form, grid_bayes_smoother


def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


def _all_pilot_frame(rng, n=200, q=1e-4, sigma2=0.05, order=4):
    c = make_qam(order)
    s = c.points[rng.integers(order, size=(1, n))]
    cov = CovarianceSpec([[q]], sigma2)
    theta = generate_phase_walk(cov.q, n, rng)
    r = apply_channel(s, theta, cov, rng)
    return r, s, cov, theta


def test_zero_mean_slot_is_erased(rng):
    r, s, cov, _ = _all_pilot_frame(rng, n=10)
    mean = s.copy()
    mean[0, 4] = 0
    post = ekf_forward(r, SoftSymbolStats(mean, np.full(s.shape, 0.05)), cov)
    assert post.forward_cov[4, 0, 0] == pytest.approx(post.pred_cov[4, 0, 0])
    assert post.forward_mean[0, 4] == post.forward_mean[0, 3]


def test_zero_residual_keeps_mean():
    s = np.array([[1.0 + 0j, (1 + 1j) / np.sqrt(2)]])
    theta_prev = 0.7
    r = s * np.exp(1j * theta_prev)
    cov = CovarianceSpec([[1e-3]], 0.1)
    post = ekf_forward(r, SoftSymbolStats(s, np.full(s.shape, 0.1)), cov)
    assert post.forward_mean[0, 1] == pytest.approx(theta_prev, abs=1e-12)


def test_filter_matches_grid_oracle(rng):
    diffs = []
    for _ in range(10):
        r, s, cov, _ = _all_pilot_frame(rng)
        post = ekf_forward(r, SoftSymbolStats(s, np.full(s.shape, 0.05)), cov)
        grid = grid_bayes_smoother(r, s, 1e-4, 0.05, num_points=1024)
        diffs.append(np.mean(np.abs(_wrap(post.forward_mean[0] - grid["filtered_mean"]))))
    assert np.mean(diffs) < 0.01


def test_smoother_matches_grid_oracle(rng):
    for _ in range(5):
        r, s, cov, _ = _all_pilot_frame(rng)
        post = smooth(r, SoftSymbolStats(s, np.full(s.shape, 0.05)), cov)
        grid = grid_bayes_smoother(r, s, 1e-4, 0.05)
        assert np.mean(np.abs(_wrap(post.mean[0] - grid["smoothed_mean"]))) < 0.01
        rel = np.abs(post.var[0] - grid["smoothed_var"]) / grid["smoothed_var"]
        assert np.mean(rel) < 0.10


def test_last_smoothed_equals_forward(rng):
    r, s, cov, _ = _all_pilot_frame(rng, n=30)
    post = smooth(r, SoftSymbolStats(s, np.full(s.shape, 0.05)), cov)
    assert post.mean[0, -1] == post.forward_mean[0, -1]
    assert post.cov[-1, 0, 0] == post.forward_cov[-1, 0, 0]


def test_static_phase_limit(rng):
    n = 40
    c = make_qam(4)
    s = c.points[rng.integers(4, size=(2, n))]
    cov = CovarianceSpec(1e-15 * np.eye(2), 0.05)
    r = apply_channel(s, np.full((2, n), 0.3), cov, rng)
    post = smooth(r, SoftSymbolStats(s, np.full(s.shape, 0.05)), cov)
    assert np.max(np.abs(np.diff(post.mean, axis=1))) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(2, 20), st.integers(0, 2**31))
def test_matches_product_of_gaussians_form(dim, n, seed):
    r_ = np.random.default_rng(seed)
    c = make_qam(16)
    q = build_covariance(r_.uniform(1e-5, 1e-2), r_.uniform(1e-6, 1e-3), dim)
    cov = CovarianceSpec(q, r_.uniform(0.01, 0.2, size=dim))
    mean = c.points[r_.integers(16, size=(dim, n))] * r_.uniform(0.3, 1.0, size=(dim, n))
    eff = cov.sigma2[:, None] + r_.uniform(0, 0.3, size=(dim, n))
    # the product form starts every channel at k=1, so the first slot must be strong enough to anchor
    eff[:, 0] = np.abs(mean[:, 0]) ** 2 / (2 * ANCHOR_PRECISION)
    theta = generate_phase_walk(q, n, r_)
    r = apply_channel(mean, theta, cov, r_)
    stats = SoftSymbolStats(mean, eff)
    fast = ekf_forward(r, stats, cov)
    ref_mean, ref_cov = ekf_forward_product_form(r, stats, cov)
    np.testing.assert_allclose(fast.forward_mean, ref_mean, atol=1e-9)
    np.testing.assert_allclose(fast.forward_cov, ref_cov, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31))
def test_covariance_monotonicity_and_dominance(dim, seed):
    r_ = np.random.default_rng(seed)
    n = 60
    c = make_qam(16)
    q = build_covariance(3e-4, 3e-7, dim)
    cov = CovarianceSpec(q, 0.05)
    mean = c.points[r_.integers(16, size=(dim, n))]
    mean[r_.random((dim, n)) < 0.3] = 0
    r = apply_channel(mean, generate_phase_walk(q, n, r_), cov, r_)
    post = smooth(r, SoftSymbolStats(mean, np.full((dim, n), 0.05)), cov)
    f_diag = np.diagonal(post.forward_cov, axis1=1, axis2=2)
    p_diag = np.diagonal(post.pred_cov, axis1=1, axis2=2)
    assert np.all(f_diag[1:] <= p_diag[1:] + 1e-12)
    s_diag = np.diagonal(post.cov, axis1=1, axis2=2)
    assert np.all(s_diag <= f_diag + 1e-12)
    assert np.all(s_diag > 0)
    for m in post.cov:
        np.testing.assert_allclose(m, m.T, atol=1e-15)
        assert np.linalg.eigvalsh(m).min() > -1e-12


def test_uninformative_start_is_anchored(rng):
    # channel 1 has no symbol information until slot 5
    n = 40
    c = make_qam(4)
    s = c.points[rng.integers(4, size=(2, n))]
    cov = CovarianceSpec(build_covariance(1e-4, 1e-6, 2), 0.02)
    theta = generate_phase_walk(cov.q, n, rng)
    r = apply_channel(s, theta, cov, rng)
    mean = s.copy()
    mean[1, :5] = 0
    post = smooth(r, SoftSymbolStats(mean, np.full((2, n), 0.02)), cov)
    assert post.forward_cov[0, 1, 1] == UNINFORMATIVE_VAR
    assert post.forward_cov[5, 1, 1] < 0.1
    err = _wrap(post.mean - theta)
    assert np.max(np.abs(err[:, 5:])) < 0.3


def _sparse_second_channel(n, theta, pilot_slots, pilot_prec):
    # channel 0 is all pilots; channel 1 carries unit pilots at pilot_slots only
    s = np.ones((2, n), dtype=complex)
    r = s * np.exp(1j * theta)
    mean = s.copy()
    mask = np.zeros(n, dtype=bool)
    mask[pilot_slots] = True
    mean[1, ~mask] = 0
    eff = np.full((2, n), 0.02)
    eff[1] = 1 / pilot_prec
    return r, SoftSymbolStats(mean, eff)


def test_weak_channel_anchors_on_its_total_precision():
    n = 300
    slots = [20, 150, 280]
    theta = np.vstack([np.full(n, 0.3), np.full(n, 2.0)])
    r, stats = _sparse_second_channel(n, theta, slots, pilot_prec=3.0)
    assert 3 * 3.0 < ANCHOR_PRECISION
    cov = CovarianceSpec(build_covariance(1e-4, 1e-7, 2), 0.02)
    post = smooth(r, stats, cov)
    assert post.forward_cov[slots[1], 1, 1] == pytest.approx(UNINFORMATIVE_VAR, rel=0.01)
    assert post.forward_cov[slots[2], 1, 1] < 1.0
    assert np.max(np.abs(_wrap(post.mean[1] - 2.0))) < 0.05


def test_waiting_sum_follows_common_drift():
    # common phase ramps by 2.4 rad; the anchored angle must be the current one
    n = 400
    slots = [50, 200, 350]
    ramp = np.linspace(0.0, 2.4, n)
    theta = np.vstack([ramp, ramp - 1.0])
    r, stats = _sparse_second_channel(n, theta, slots, pilot_prec=6.0)
    cov = CovarianceSpec(build_covariance(1e-4, 1e-7, 2), 0.02)
    post = ekf_forward(r, stats, cov)
    k = slots[-1]
    assert abs(_wrap(post.forward_mean[1, k] - theta[1, k])) < 0.05


def test_single_step_examples():
    s = 0.7 - 0.2j
    assert single_step_phase_estimate(s * np.exp(0.4j), s, 0.4) == pytest.approx(0.4)
    est = single_step_phase_estimate(s * np.exp(1j * (0.4 + 0.01)), s, 0.4)
    assert est - 0.4 == pytest.approx(np.sin(0.01), abs=1e-15)
    assert est - 0.4 == pytest.approx(0.0099998, abs=1e-7)
    err = single_step_phase_estimate(np.exp(0.5j), 1.0, 0.0) - 0.5
    assert abs(err) == pytest.approx(0.0206, abs=1e-4)
    assert err**2 == pytest.approx(4.2e-4, rel=0.02)
    with pytest.raises(ZeroSymbol):
        single_step_phase_estimate(1.0, 0.0, 0.0)


def test_rtss_requires_forward(rng):
    r, s, cov, _ = _all_pilot_frame(rng, n=5)
    fwd = ekf_forward(r, SoftSymbolStats(s, np.full(s.shape, 0.05)), cov)
    back = rtss_backward(fwd, cov)
    assert back.mean.shape == (1, 5)
    with pytest.raises(ValueError):
        ekf_forward(r, SoftSymbolStats(s[:, :3], np.full((1, 3), 0.05)), cov)
