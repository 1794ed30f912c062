from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from thermoshape import regularization as rg
from thermoshape.functions import ConvexF1, ExpAlpha, IndicatorF1, QuadraticF2, RationalG, TabulatedAlpha, TabulatedG, ZeroF1, ZeroG

EPS = (0.5, 0.2, 0.1, 0.05, 0.01)


def kernel_quad(eps, upper):
    s = math.sqrt(eps)
    cuts = sorted({0.0, min(eps, upper), min(s, upper), min(2 * s, upper), upper})
    return sum(quad(lambda r: float(rg.d_eps(eps, r)), a, b, epsabs=1e-14, epsrel=1e-14)[0] for a, b in zip(cuts, cuts[1:]))


@pytest.mark.parametrize("eps", EPS)
def test_kernel_is_density(eps):
    s = math.sqrt(eps)
    assert kernel_quad(eps, 3 * s) == pytest.approx(1.0, abs=1e-8)
    assert float(rg.d_eps(eps, 3 * s, 1)) == pytest.approx(1.0, abs=1e-12)
    assert np.all(rg.d_eps(eps, np.linspace(0, 3 * s, 1001)) >= 0)


@pytest.mark.parametrize("eps", (0.2, 0.05))
def test_kernel_antiderivatives_match_quadrature(eps):
    for r in np.linspace(0.0, 3 * math.sqrt(eps), 13):
        assert float(rg.d_eps(eps, r, 1)) == pytest.approx(kernel_quad(eps, r), abs=1e-11)
        d2 = quad(lambda x: float(rg.d_eps(eps, x, 1)), 0.0, r, epsabs=1e-13, points=[eps, math.sqrt(eps)] if r > eps else None)[0]
        assert float(rg.d_eps(eps, r, 2)) == pytest.approx(d2, abs=1e-10)


@pytest.mark.parametrize("eps", (0.3, 0.05))
def test_kernel_is_continuous(eps):
    s = math.sqrt(eps)
    for knot in (eps, s, 2 * s):
        for m in (0, 1, 2):
            lo, hi = rg.d_eps(eps, knot * (1 - 1e-12), m), rg.d_eps(eps, knot * (1 + 1e-12), m)
            assert float(lo) == pytest.approx(float(hi), abs=1e-9)


def test_lambda_eps():
    assert rg.lambda_eps(1.0) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        rg.lambda_eps(0.0)
    with pytest.raises(ValueError):
        rg.d_eps(0.1, -1.0)


def test_zeta_integrals_symbolic():
    x = sp.symbols("x")
    z = (1 - 4 * x) * (1 - x) ** 2
    z1 = sp.integrate(z, (x, 0, x))
    z2 = sp.integrate(z1, (x, 0, x))
    assert sp.integrate(z, (x, 0, 1)) == 0
    for xv in np.linspace(0, 1.5, 16):
        inside = min(xv, 1.0)
        assert float(rg.zeta_profile(xv, 1)) == pytest.approx(float(z1.subs(x, inside)), abs=1e-14)
        expect2 = float(z2.subs(x, inside)) + (0.0 if xv < 1 else 0.0)
        assert float(rg.zeta_profile(xv, 2)) == pytest.approx(expect2, abs=1e-14)
    grid = np.linspace(0, 1, 10001)
    assert rg.zeta_profile(0.0) == 1.0
    assert np.max(np.abs(rg.zeta_profile(grid))) <= 1.0


@pytest.mark.parametrize("eps", (0.2, 0.1, 0.05))
def test_alpha_eps_certificates(eps):
    model = rg.ModelFunctions()
    fam = rg.EpsFamily(model, eps)
    for k in (0, 1, 2):
        assert float(fam.alpha(0.0, k)) == 0.0
        assert np.all(fam.alpha(np.array([-1.0, -1e-3]), k) == 0.0)
    r = np.linspace(2 * math.sqrt(eps), 30.0, 5000)
    assert np.array_equal(fam.alpha(r, 1), model.alpha.d1(r))
    rs = np.linspace(0.0, 30.0, 20001)
    dev = np.max(np.abs(fam.alpha(rs) - model.alpha.value(rs)))
    assert dev <= 2 * math.sqrt(eps) * (abs(model.a1) + abs(model.a2))


@pytest.mark.parametrize("eps", (0.2, 0.05))
def test_alpha_eps_derivatives_consistent(eps):
    fam = rg.EpsFamily(rg.ModelFunctions(), eps)
    r = np.linspace(1e-3, 2.0, 400)
    h = 1e-6
    fd1 = (fam.alpha(r + h) - fam.alpha(r - h)) / (2 * h)
    fd2 = (fam.alpha(r + h, 1) - fam.alpha(r - h, 1)) / (2 * h)
    assert np.max(np.abs(fd1 - fam.alpha(r, 1))) <= 1e-6
    knots = np.array([eps, math.sqrt(eps), 2 * math.sqrt(eps)])
    away = np.min(np.abs(r[:, None] - knots[None, :]), axis=1) > 2 * h
    assert np.max(np.abs(fd2 - fam.alpha(r, 2))[away]) <= 1e-5


def brute_moreau(F1, eps, s):
    grid = np.linspace(-4, 4, 400_001)
    obj = (grid[None, :] - s[:, None]) ** 2 / (2 * eps) + F1.value(grid)[None, :]
    i = np.argmin(obj, axis=1)
    return obj[np.arange(s.size), i], (s - grid[i]) / eps


@pytest.mark.parametrize("eps", (0.5, 0.1, 0.02))
def test_moreau_indicator_matches_brute_force(eps):
    s = np.random.default_rng(5).uniform(-3, 3, 60)
    F, b, _ = IndicatorF1().envelope(eps, s)
    Fb, bb = brute_moreau(IndicatorF1(), eps, s)
    assert np.max(np.abs(F - Fb)) <= 1e-6
    assert np.max(np.abs(b - bb)) <= 2e-5 / eps


def test_moreau_convex_resolvent_matches_brute_force():
    F1 = ConvexF1(lambda s: s**4, lambda s: 4 * s**3, lambda s: 12 * s**2)
    s = np.linspace(-2, 2, 41)
    for eps in (0.5, 0.05):
        F, b, db = F1.envelope(eps, s)
        Fb, bb = brute_moreau(F1, eps, s)
        assert np.max(np.abs(F - Fb)) <= 1e-7
        assert np.max(np.abs(b - bb)) <= 1e-3
        h = 1e-6
        fd = (F1.envelope(eps, s + h)[1] - F1.envelope(eps, s - h)[1]) / (2 * h)
        assert np.max(np.abs(fd - db)) <= 1e-4 * (1 + np.max(np.abs(db)))


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-5, 5, allow_nan=False),
    st.floats(-5, 5, allow_nan=False),
    st.sampled_from([0.5, 0.1, 0.02]),
)
def test_beta_monotone_and_lipschitz(x, y, eps):
    fam = rg.EpsFamily(rg.ModelFunctions(), eps)
    bx, by = float(fam.beta(x)), float(fam.beta(y))
    assert (bx - by) * (x - y) >= 0
    assert abs(bx - by) <= abs(x - y) / eps + 1e-12


def test_zero_f1_envelope_vanishes():
    F, b, db = ZeroF1().envelope(0.1, np.linspace(-2, 2, 5))
    assert not np.any(F) and not np.any(b) and not np.any(db)


@pytest.mark.parametrize("eps", (0.2, 0.05))
def test_g_eps_vanishes_near_zero_and_is_smooth(eps):
    fam = rg.EpsFamily(rg.ModelFunctions(), eps)
    near = np.linspace(-0.49 * eps, 0.49 * eps, 101)
    assert np.all(fam.G(near) == 0.0) and np.all(fam.G(near, 1) == 0.0)
    s = np.linspace(-2, 2, 801)
    h = 1e-6
    fd = (fam.G(s + h) - fam.G(s - h)) / (2 * h)
    assert np.max(np.abs(fd - fam.G(s, 1))) <= 1e-6
    assert np.all(fam.G(s) >= 0) and np.max(fam.G(s)) <= fam.model.G.sup
    assert np.max(np.abs(fam.G(s, 1))) <= fam.lip_gamma + 1e-12
    assert np.max(np.abs(fam.G(s) - fam.model.G.value(s))) <= 2 * eps * fam.model.G.sup_d1


def test_gamma_eps_is_odd_and_lipschitz():
    fam = rg.EpsFamily(rg.ModelFunctions(), 0.1)
    s = np.linspace(-3, 3, 601)
    assert np.allclose(fam.gamma(-s), -fam.gamma(s))
    slopes = np.abs(np.diff(fam.gamma(s))) / np.diff(s)
    assert np.max(slopes) <= fam.lip_gamma + 1e-12


def test_phi_band_and_derivative():
    fam = rg.EpsFamily(rg.ModelFunctions(), 0.1)
    r = np.linspace(0, 20, 401)[:, None]
    s = np.linspace(-2, 2, 41)[None, :]
    a = fam.a(r, s)
    lo, hi = fam.check_band(a)
    assert lo >= fam.lambda_star and hi <= fam.C_star
    fam.check_phi_band(np.broadcast_to(r, a.shape), fam.phi(r, s))
    h = 1e-6
    fd = (fam.phi(r + h, s) - fam.phi(r - h, s)) / (2 * h)
    assert np.max(np.abs(fd - a)[1:]) <= 1e-5
    assert np.all(fam.phi(0.0, s) == 0.0)


def test_band_violation_raised():
    fam = rg.EpsFamily(rg.ModelFunctions(), 0.1)
    with pytest.raises(rg.BandViolation):
        fam.check_band(np.array([0.0]))
    with pytest.raises(rg.BandViolation):
        rg.ModelFunctions(alpha=ExpAlpha(-40.0)).certify()


def test_constants():
    model = rg.ModelFunctions()
    assert model.lambda0 == pytest.approx(0.9 * model.c0)
    assert model.tau_star == pytest.approx(1.0)
    assert rg.ModelFunctions(F2=QuadraticF2(0.0)).tau_star == math.inf
    fam = rg.EpsFamily(model, 0.1)
    assert fam.lambda_star == pytest.approx(0.45)
    info = model.certify()
    assert info["parabolicity_min"] >= model.lambda0


def test_rational_g_constants():
    G = RationalG()
    s = np.linspace(-50, 50, 200_001)
    assert np.max(G.value(s)) <= G.sup
    assert np.max(np.abs(G.d1(s))) == pytest.approx(G.sup_d1, rel=1e-6)
    assert np.all(ZeroG().value(s) == 0)


def test_tabulated_functions_follow_samples():
    r = np.linspace(0, 10, 201)
    ta = TabulatedAlpha(10.0, list(ExpAlpha().value(r)))
    mid = np.linspace(0, 10, 57)
    assert np.max(np.abs(ta.value(mid) - ExpAlpha().value(mid))) <= 1e-5
    s = np.linspace(-3, 3, 121)
    tg_ = TabulatedG(3.0, list(RationalG().value(s)))
    assert np.max(np.abs(tg_.value(mid / 4) - RationalG().value(mid / 4))) <= 1e-5
    with pytest.raises(ValueError):
        TabulatedG(3.0, [1.0, 0.0, 1.0])
