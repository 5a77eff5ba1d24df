import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from heatsoe.geometry import make_curve
from heatsoe.history import (HistoryState, SpatialSumPlan, compute_vk,
                             direct_history, exp_moments, panel_stencil,
                             panel_weights)
from heatsoe.kernel import build_dlp_kernel


def _cquad(f, a, b):
    re = quad(lambda v: f(v).real, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    im = quad(lambda v: f(v).imag, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return re + 1j * im


@pytest.mark.parametrize("zeta", [0.0, 1e-8, 0.3 - 0.2j, -0.99, -1.01, 2 + 5j,
                                  -40 + 100j, -700.0])
def test_exp_moments_quadrature(zeta):
    mu = exp_moments(np.array([zeta]), 4)[:, 0]
    for r in range(4):
        ref = _cquad(lambda v: v ** r * np.exp(zeta * (1 - v)), 0, 1)
        assert abs(mu[r] - ref) <= 1e-12 * max(1.0, abs(ref))


def test_exp_moments_continuous_across_switch():
    z = np.array([0.999999, 1.000001, -0.999999j, -1.000001j])
    mu = exp_moments(z, 4)
    np.testing.assert_allclose(mu[:, 0], mu[:, 1], rtol=1e-5)
    np.testing.assert_allclose(mu[:, 2], mu[:, 3], rtol=1e-5)


@pytest.mark.parametrize("k", [2, 3, 4])
@pytest.mark.parametrize("delay", [None, 5])
def test_panel_weights_polynomial_exactness(k, delay):
    # sum_i omega_i V(t_stencil_i) == int_panel exp(z (t - tau)) V(tau) dtau
    # for V a polynomial of degree < k
    dt = 0.05
    d = k - 1 if delay is None else delay
    off, ring = panel_stencil(k, d)
    assert ring == d + off + 1
    z = np.array([-3.0 + 20j])
    w = panel_weights(z, dt, k, d)[:, 0]
    rng = np.random.default_rng(k)
    poly = np.polynomial.Polynomial(rng.standard_normal(k))
    q = 10
    t_now = (q + 1) * dt
    stencil = [q - d - off + i for i in range(k)]
    lhs = sum(w[i] * poly(stencil[i] * dt) for i in range(k))
    a = (q - d) * dt
    rhs = _cquad(lambda tau: np.exp(z[0] * (t_now - tau)) * poly(tau), a, a + dt)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_stencil_rejects_short_delay():
    with pytest.raises(ValueError):
        panel_stencil(4, -2)


@pytest.fixture(scope="module")
def circle_setup():
    b = make_curve("circle", 64)
    b = b.__class__(**{**b.__dict__, "normals": -b.normals})
    plan = SpatialSumPlan.from_boundary(b)
    R = 1.001 * max(plan.distances.max(), 1.5)
    return b, plan, R


def test_direct_history_against_scipy(circle_setup):
    # reference: the zero-extended local interpolant of the samples on each
    # panel, integrated against the exact kernel by adaptive quadrature
    b, plan, _ = circle_setup
    dt, k, n = 0.05, 4, 12
    space = 1 + 0.5 * np.cos(b.theta)
    samples = [1 + 2 * m * dt + math.sin(5 * m * dt) for m in range(n)]
    sigmas = [space * v for v in samples]
    off, _ = panel_stencil(k, k - 1)
    i, j = 0, 20
    t = n * dt
    d = plan.dipole()[i, j] / plan.weights[j]
    r = plan.distances[i, j]
    ref = 0.0
    for a in range(n - (k - 1)):
        idx = np.arange(a - off, a - off + k)
        vals = [samples[m] if m >= 0 else 0.0 for m in idx]
        poly = np.polynomial.Polynomial.fit(idx * dt, vals, k - 1)

        def f(tau):
            u = t - tau
            return d * math.exp(-r * r / (4 * u)) / (8 * math.pi * u * u) * poly(tau)

        ref += quad(f, a * dt, (a + 1) * dt, epsabs=0, epsrel=1e-13)[0]
    mask = np.zeros_like(plan.dots)
    mask[i, j] = 1.0
    single = SpatialSumPlan(plan.distances, plan.dots * mask, plan.weights)
    one = direct_history(single, sigmas, dt, k, n)[i]
    assert one / plan.weights[j] == pytest.approx(ref * space[j], rel=1e-10)
    assert direct_history(plan, sigmas, dt, k, n).shape == (64,)


def test_recurrence_matches_direct(circle_setup):
    b, plan, R = circle_setup
    dt, k, n_t = 1.0 / 40, 4, 40
    kern = build_dlp_kernel(2, 1e-9, min(3 * dt, 1e-3), 1.0, R)
    tt = dt * np.arange(n_t + 1)
    sig = (np.sin(3 * tt) ** 2)[:, None] * (1 + 0.3 * np.cos(b.theta)
                                             + 0.1 * np.sin(2 * b.theta))[None]
    st_ = HistoryState(plan, kern, dt, k)
    worst = 0.0
    for n in range(1, n_t + 1):
        st_.advance(sigma=sig[n - 1])
        if n % 10 == 0:
            ref = direct_history(plan, sig[:n], dt, k, n)
            worst = max(worst, np.max(np.abs(st_.evaluate() - ref)))
    assert worst <= 1e-8
    assert st_.current_time == pytest.approx(1.0)


def test_compute_vk_consistent(circle_setup):
    b, plan, R = circle_setup
    kern = build_dlp_kernel(2, 1e-6, 1e-3, 1.0, R)
    st_ = HistoryState(plan, kern, 0.01, 4)
    sigma = np.cos(b.theta)
    v = st_.compute_v(sigma)
    np.testing.assert_allclose(v[3], compute_vk(plan, sigma, kern.inner.nodes[3]),
                               rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError):
        compute_vk(plan, sigma[:5], 1.0)


def test_prune_keeps_accuracy(circle_setup):
    b, plan, R = circle_setup
    kern = build_dlp_kernel(2, 1e-9, 1e-3, 1.0, R)
    full = HistoryState(plan, kern, 0.025, 4)
    cut = HistoryState(plan, kern, 0.025, 4, prune=1e-16)
    assert cut.z.size < full.z.size
    sig = np.outer(np.linspace(0, 1, 21) ** 2, 1 + 0.2 * np.cos(b.theta))
    for s in sig[:-1]:
        full.advance(sigma=s)
        cut.advance(sigma=s)
    np.testing.assert_allclose(cut.evaluate(), full.evaluate(), atol=1e-10)


def test_checkpoint_roundtrip(tmp_path, circle_setup):
    b, plan, R = circle_setup
    kern = build_dlp_kernel(2, 1e-6, 1e-3, 1.0, R)
    a = HistoryState(plan, kern, 0.05, 3)
    for m in range(7):
        a.advance(sigma=np.full(64, 1.0 + m))
    a.save(tmp_path / "h.bin")
    c = HistoryState(plan, kern, 0.05, 3).load(tmp_path / "h.bin")
    np.testing.assert_array_equal(c.modes, a.modes)
    a.advance(sigma=np.ones(64))
    c.advance(sigma=np.ones(64))
    np.testing.assert_array_equal(c.evaluate(), a.evaluate())
    other = HistoryState(plan, build_dlp_kernel(2, 1e-3, 1e-3, 1.0, R), 0.05, 3)
    with pytest.raises(ValueError):
        other.load(tmp_path / "h.bin")


def test_advance_checks(circle_setup):
    b, plan, R = circle_setup
    kern = build_dlp_kernel(2, 1e-6, 1e-3, 1.0, R)
    s = HistoryState(plan, kern, 0.05, 4)
    with pytest.raises(ValueError):
        s.advance()
    with pytest.raises(ValueError):
        s.advance(vk=np.zeros((2, 2)))
    with pytest.raises(FloatingPointError):
        for _ in range(5):
            s.advance(sigma=np.full(64, np.nan))


def test_zero_density_gives_zero(circle_setup):
    b, plan, R = circle_setup
    kern = build_dlp_kernel(2, 1e-6, 1e-3, 1.0, R)
    s = HistoryState(plan, kern, 0.05, 4)
    for _ in range(10):
        s.advance(sigma=np.zeros(64))
    assert np.all(s.evaluate() == 0.0)


@settings(max_examples=20, deadline=None)
@given(k=st.integers(2, 4), lam=st.floats(-50, 0), om=st.floats(-100, 100))
def test_panel_weights_constant_density(k, lam, om):
    # weights sum to the exact integral of the exponential over the panel
    z = np.array([lam + 1j * om])
    dt = 0.02
    w = panel_weights(z, dt, k, k - 1)[:, 0]
    start = (k - 1) * dt
    zz = z[0]
    ref = np.exp(zz * start) * (np.expm1(zz * dt) / zz if abs(zz) > 1e-12 else dt)
    assert abs(w.sum() - ref) <= 1e-12 * max(1.0, abs(ref))
