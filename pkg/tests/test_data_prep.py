from __future__ import annotations

import math

import numpy as np
import pytest

from thermoshape import grid as tg
from thermoshape import regularization as rg
from thermoshape.data_prep import (
    InitialData,
    build_u0eps,
    discretize_forcing,
    prepare,
    smooth_chi0,
    smooth_theta0,
    stress,
)
from thermoshape.functions import ConvexF1, ZeroG


def discrete_eig(g, k=1):
    h = g.spacing[0]
    return 4.0 / h**2 * math.sin(k * math.pi * h / 2) ** 2


def test_smooth_theta0_cosine_mode():
    g = tg.Grid.uniform(65)
    x = g.coords()[0]
    eps = 0.1
    th = smooth_theta0(g, 1.0 + 0.2 * np.cos(np.pi * x), eps)
    exact = 1.0 + 0.2 * np.cos(np.pi * x) / (1 + eps * discrete_eig(g))
    assert np.max(np.abs(th - exact)) <= 1e-11


def test_smooth_theta0_conserves_mass_and_positivity():
    rng = np.random.default_rng(0)
    g = tg.Grid.uniform((9, 17))
    th0 = rng.uniform(0.0, 2.0, g.shape)
    th = smooth_theta0(g, th0, 0.05)
    assert tg.integrate(g, th) == pytest.approx(tg.integrate(g, th0), rel=1e-11)
    assert th.min() >= th0.min() - 1e-10


def test_smooth_chi0_inactive_obstacle_is_linear():
    g = tg.Grid.uniform(65)
    x = g.coords()[0]
    fam = rg.EpsFamily(rg.ModelFunctions(), 0.1)
    res = smooth_chi0(g, 0.5 * np.cos(np.pi * x), fam)
    exact = 0.5 * np.cos(np.pi * x) / (1 + 0.1 * discrete_eig(g))
    assert np.max(np.abs(res.chi - exact)) <= 1e-10
    assert res.residuals[-1] <= 1e-10


def test_smooth_chi0_nonlinear_residual():
    g = tg.Grid.uniform(33)
    x = g.coords()[0]
    F1 = ConvexF1(lambda s: s**4, lambda s: 4 * s**3, lambda s: 12 * s**2)
    fam = rg.EpsFamily(rg.ModelFunctions(F1=F1), 0.2)
    chi0 = 2.0 * np.cos(np.pi * x)
    res = smooth_chi0(g, chi0, fam)
    v = res.chi
    r = v - 0.2 * tg.laplacian_neumann(g, v) + 0.2 * fam.beta(v) - chi0
    assert np.max(np.abs(r)) <= 1e-10
    assert res.iterations >= 1


def test_smooth_chi0_rejects_infeasible():
    g = tg.Grid.uniform(9)
    fam = rg.EpsFamily(rg.ModelFunctions(), 0.1)
    with pytest.raises(ValueError):
        smooth_chi0(g, g.full(1.5), fam)


def test_u0eps_without_coupling_is_helmholtz_smoothing():
    g = tg.Grid.uniform(65)
    x = g.coords()[0]
    fam = rg.EpsFamily(rg.ModelFunctions(G=ZeroG()), 0.1)
    u, sig = build_u0eps(g, np.cos(np.pi * x), g.full(0.3), fam)
    assert np.max(np.abs(u - np.cos(np.pi * x) / (1 + 0.1 * discrete_eig(g)))) <= 1e-11
    assert np.allclose(sig[0], tg.edge_gradient(g, u)[0])


def test_u0eps_equation_and_stress_with_coupling():
    g = tg.Grid.uniform((9, 11))
    rng = np.random.default_rng(1)
    fam = rg.EpsFamily(rg.ModelFunctions(e=(0.6, 0.8)), 0.1)
    chi = rng.uniform(-0.9, 0.9, g.shape)
    u0 = rng.normal(size=g.shape)
    u, sig = build_u0eps(g, u0, chi, fam)
    # u - eps div(sigma) = u0 with sigma = kappa D u - gamma(chi) e
    resid = u - 0.1 * tg.divergence(g, sig) - u0
    assert np.max(np.abs(resid)) <= 1e-9
    s2 = stress(g, fam, u, chi)
    assert all(np.array_equal(a, b) for a, b in zip(sig, s2))


def test_discretize_forcing():
    g = tg.Grid.uniform(5)
    data = InitialData(g, g.full(1.0), g.full(0.0), g.full(0.0), g.full(0.0),
                       R_Omega=lambda t: t**5, B_Omega=lambda t: 2 * t, b_Gamma=(1.0, -1.0))
    N, tau = 4, 0.25
    R, B, b = discretize_forcing(data, N, tau)
    for n in range(N):
        slab_mean = ((n + 1) ** 6 - n**6) * tau**6 / 6 / tau
        assert np.allclose(R[n], slab_mean, rtol=1e-13)
        assert np.allclose(B[n], 2 * n * tau)
    assert np.array_equal(b[:, 1:-1], np.zeros((N, 3)))
    assert np.all(b[:, 0] == 1.0) and np.all(b[:, -1] == -1.0)
    bad = InitialData(g, g.full(1.0), g.full(0.0), g.full(0.0), g.full(0.0), R_Omega=-1.0)
    with pytest.raises(ValueError):
        discretize_forcing(bad, 2, 0.5)


def test_initial_data_validation():
    g = tg.Grid.uniform(5)
    with pytest.raises(ValueError):
        InitialData(g, g.full(-1.0), 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        InitialData(g, g.full(np.nan), 0.0, 0.0, 0.0)


def test_prepare_default_and_floor():
    g = tg.Grid.uniform(33)
    x = g.coords()[0]
    fam = rg.EpsFamily(rg.ModelFunctions(), 0.1)
    data = InitialData(g, 1 + 0.2 * np.cos(np.pi * x), 0.5 * np.cos(np.pi * x), 0.0, 0.0, R_Omega=0.1)
    prep = prepare(data, fam, 1.0, 10)
    assert prep.tau == pytest.approx(0.1)
    assert prep.R.shape == (10, 33)
    assert not prep.theta_floor_applied
    assert np.allclose(prep.w0_eps, fam.phi(prep.theta0_eps, prep.chi0_eps))
    zero = InitialData(g, np.where(x < 0.5, 0.0, 1.0), 0.0, 0.0, 0.0)
    assert prepare(zero, fam, 1.0, 4, theta_floor=True).theta_floor_applied
    assert not prepare(zero, fam, 1.0, 4).theta_floor_applied
