import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dvhj.diagnostics import discrete_plap
from dvhj.errors import ParameterDomainError, TabulationRangeError
from dvhj.profiles import (
    Params,
    barenblatt_constants,
    derived_constants,
    eval_barenblatt,
    eval_h_infty,
    eval_h_s,
    h_s_support_radius,
    sphere_measure,
    traveling_wave,
    wave_offset_mu,
)


def test_derived_constants_hand_values(p3q2):
    dc = derived_constants(p3q2)
    assert dc.gamma_q == pytest.approx(0.25, abs=1e-15)
    assert dc.q_star == pytest.approx(2.5)
    assert dc.alpha == pytest.approx(0.25)
    assert dc.beta == pytest.approx(0.25)
    assert dc.h_infty_support_coeff == pytest.approx(2.0)


@pytest.mark.parametrize("p,q", [(2.0, 2.0), (1.5, 1.2), (3.0, 1.0), (3.0, 0.5)])
def test_params_reject_domain(p, q):
    with pytest.raises(ParameterDomainError):
        Params(p, q)


def test_sphere_measure():
    assert sphere_measure(1) == pytest.approx(2.0)
    assert sphere_measure(2) == pytest.approx(2 * math.pi)
    assert sphere_measure(3) == pytest.approx(4 * math.pi)


def test_h_infty_examples(p3q2):
    assert eval_h_infty(7.0, 0.0, 1.3, p3q2) == 1.3
    assert eval_h_infty(1.0, 1.0, 1.0, p3q2) == pytest.approx(0.75)
    assert eval_h_infty(4.0, 4.0, 1.0, p3q2) == 0.0
    with pytest.raises(ParameterDomainError):
        eval_h_infty(0.0, 1.0, 1.0, p3q2)


@settings(max_examples=60, deadline=None)
@given(
    t=st.floats(0.01, 100.0),
    M=st.floats(0.0, 10.0),
    q=st.floats(1.2, 2.8),
)
def test_h_infty_shape(t, M, q):
    P = Params(3.0, q)
    R = h_s_support_radius(M, P) * t ** (1 / q)
    r = np.linspace(0.0, 2 * R + 1.0, 401)
    h = eval_h_infty(t, r, M, P)
    assert h[0] == M
    assert np.all(np.diff(h) <= 0)
    assert np.all(h[r >= R * (1 + 1e-12)] == 0)
    # self-similarity against the steady profile
    np.testing.assert_allclose(h, eval_h_s(r * t ** (-1 / q), M, P), rtol=1e-12, atol=1e-14)


def test_h_s_stationary_residual():
    for q in (1.5, 2.0, 2.5):
        P = Params(3.0, q)
        M = 1.0
        g = derived_constants(P).gamma_q
        k = q / (q - 1)
        y = np.linspace(0.05, 0.95, 50) * h_s_support_radius(M, P)
        assert np.all((eval_h_s(y, M, P) > 0) & (eval_h_s(y, M, P) < M))
        dh = -g * k * y ** (k - 1)
        res = -y * dh - q * np.abs(dh) ** q
        assert np.max(np.abs(res)) <= 1e-8


def test_barenblatt_mass_and_scaling(p3q2):
    A, k, r0 = barenblatt_constants(1.0, p3q2)
    assert k == pytest.approx(1 / 6)
    mass = 2 * integrate.quad(lambda r: eval_barenblatt(1.0, r, 1.0, p3q2), 0, r0,
                              epsabs=1e-13, epsrel=1e-13)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)
    r = np.linspace(0, 3 * r0, 301)
    for t in (0.3, 2.0, 17.0):
        lhs = eval_barenblatt(t, r, 1.0, p3q2)
        rhs = t ** -0.25 * eval_barenblatt(1.0, r * t ** -0.25, 1.0, p3q2)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("p,N,L", [(3.0, 1, 0.4), (2.5, 2, 1.0), (4.0, 3, 2.0)])
def test_barenblatt_mass_any_time(p, N, L):
    P = Params(p, 1.5, N)
    w = sphere_measure(N)
    for t in (0.5, 1.0, 10.0):
        R = barenblatt_constants(L, P)[2] * t ** derived_constants(P).beta
        m = integrate.quad(lambda r: w * r ** (N - 1) * eval_barenblatt(t, r, L, P), 0, R,
                           epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        assert m == pytest.approx(L, rel=1e-6)


def _barenblatt_residual(P, dr):
    r0 = barenblatt_constants(1.0, P)[2]
    r = np.arange(0.0, r0 + 1.0, dr)
    u = eval_barenblatt(1.0, r, 1.0, P)
    h = 1e-5
    ut = (eval_barenblatt(1 + h, r, 1.0, P) - eval_barenblatt(1 - h, r, 1.0, P)) / (2 * h)
    res = np.abs(ut[:-1] - discrete_plap(u, dr, 0.0, P))
    # the profile is singular in the second derivative at r=0 and at the edge
    band = (r[:-1] > 0.2 * r0) & (r[:-1] < 0.8 * r0)
    return float(np.max(res[band]))


def test_barenblatt_pde_residual_second_order(p3q2):
    e1 = _barenblatt_residual(p3q2, 1e-2)
    e2 = _barenblatt_residual(p3q2, 5e-3)
    assert e1 < 1e-5
    assert e1 / e2 > 3.5


def test_barenblatt_rejects_bad_input(p3q2):
    with pytest.raises(ParameterDomainError):
        eval_barenblatt(0.0, 1.0, 1.0, p3q2)
    with pytest.raises(ParameterDomainError):
        eval_barenblatt(1.0, 1.0, -1.0, p3q2)


def test_wave_closed_form_p3_q2(p3q2):
    tw = traveling_wave(p3q2, -20.0)
    exact = -np.expm1(tw.y_nodes / 2)
    assert np.max(np.abs(tw.f_values - exact)) <= 1e-8
    assert tw.f(-2 * math.log(2)) == pytest.approx(0.5, abs=1e-10)
    assert tw.f(0.5) == 0.0 and tw.F(0.5) == 0.0
    F_exact = -tw.y_nodes - 2 + 2 * np.exp(tw.y_nodes / 2)
    assert np.max(np.abs(tw.F_values - F_exact)) <= 1e-8


@pytest.mark.parametrize("p,q", [(3.0, 2.0), (2.5, 1.3), (4.0, 3.5), (3.0, 2.75)])
def test_wave_invariants(p, q):
    tw = traveling_wave(Params(p, q), -15.0, n_nodes=201)
    assert tw.y_nodes[-1] == 0.0 and tw.F_values[-1] == 0.0
    assert np.all(np.diff(tw.f_values) <= 0)
    assert np.all((tw.f_values >= 0) & (tw.f_values < 1))
    assert np.all(tw.F_values <= np.abs(tw.y_nodes) + 1e-12)
    assert np.max(tw.residuals()) <= 1e-10


def test_wave_requires_q_below_p():
    with pytest.raises(ParameterDomainError):
        traveling_wave(Params(3.0, 3.2), -5.0)


def test_wave_offset(p3q2):
    tw = traveling_wave(p3q2, -20.0)
    mu = wave_offset_mu(tw, 1.0, 1.0)
    s = mu + 1.0
    assert -s - 2 + 2 * math.exp(s / 2) == pytest.approx(1.0, abs=1e-9)
    assert mu == pytest.approx(-3.40, abs=5e-3)
    assert wave_offset_mu(tw, 1.0, 1e-9) == pytest.approx(-1.0, abs=1e-3)
    mus = [wave_offset_mu(tw, 1.0, M) for M in (0.1, 0.5, 1.0, 3.0)]
    assert all(a > b for a, b in zip(mus, mus[1:]))
    with pytest.raises(TabulationRangeError):
        wave_offset_mu(tw, 1.0, 100.0)
