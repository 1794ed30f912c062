from __future__ import annotations

import math

import numpy as np
import pytest

from thermoshape import grid as tg


def cos_error(n):
    g = tg.Grid.uniform(n)
    x = g.coords()[0]
    lap = tg.laplacian_neumann(g, np.cos(np.pi * x))
    return float(np.max(np.abs(lap + np.pi**2 * np.cos(np.pi * x))))


def test_laplacian_second_order():
    errs = [cos_error(n) for n in (17, 33, 65, 129)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.9 <= p <= 2.1 for p in orders)


@pytest.mark.parametrize("shape", [(9,), (7, 11)])
def test_laplacian_symmetric_nsd_conservative(shape):
    rng = np.random.default_rng(1)
    g = tg.Grid.uniform(shape, [1.0, 2.0][: len(shape)])
    f, h = rng.normal(size=(2,) + g.shape)
    lf = tg.laplacian_neumann(g, f)
    assert tg.inner(g, lf, h) == pytest.approx(tg.inner(g, f, tg.laplacian_neumann(g, h)), rel=1e-12)
    assert tg.inner(g, lf, f) <= 0
    assert abs(tg.integrate(g, lf)) <= 1e-12 * np.max(np.abs(lf))
    assert np.max(np.abs(tg.laplacian_neumann(g, g.full(3.0)))) <= 1e-12
    assert tg.norm(g, f, "H1semi") ** 2 == pytest.approx(-tg.inner(g, lf, f), rel=1e-12)


def test_edges_to_nodes_is_adjoint_of_edge_average():
    rng = np.random.default_rng(2)
    g = tg.Grid.uniform((6, 5))
    f = rng.normal(size=g.shape)
    q = tuple(rng.normal(size=g.edge_shape(a)) for a in range(g.dim))
    assert tg.inner(g, tg.edges_to_nodes(g, q), f) == pytest.approx(tg.edge_inner(g, q, tg.edge_average(g, f)), rel=1e-12)


def test_divergence_is_negative_adjoint_of_edge_gradient():
    rng = np.random.default_rng(3)
    g = tg.Grid.uniform((5, 8))
    f = rng.normal(size=g.shape)
    q = tuple(rng.normal(size=g.edge_shape(a)) for a in range(g.dim))
    assert tg.inner(g, tg.divergence(g, q), f) == pytest.approx(-tg.edge_inner(g, q, tg.edge_gradient(g, f)), rel=1e-12)


def test_boundary_pairing_perimeter():
    g = tg.Grid.uniform((5, 9), [1.0, 2.0])
    assert tg.boundary_pairing(g, 1.0, g.full(1.0)) == pytest.approx(6.0, rel=1e-14)
    g1 = tg.Grid.uniform(5)
    v = np.arange(5.0)
    assert tg.boundary_pairing(g1, (2.0, 3.0), v) == pytest.approx(2.0 * 0 + 3.0 * 4)


def test_norms_of_constant():
    g = tg.Grid.uniform((5, 5), [2.0, 1.0])
    f = g.full(-3.0)
    assert tg.integrate(g, g.full(1.0)) == pytest.approx(2.0)
    assert tg.norm(g, f, "L1") == pytest.approx(6.0)
    assert tg.norm(g, f, "L2") == pytest.approx(3.0 * math.sqrt(2.0))
    assert tg.norm(g, f, "Linf") == 3.0
    assert tg.norm(g, f, "Lq", 1.5) == pytest.approx((3.0**1.5 * 2.0) ** (1 / 1.5))
    assert tg.norm(g, f, "H1semi") == 0.0
    with pytest.raises(ValueError):
        tg.norm(g, f, "bogus")


def test_grad_exact_on_quadratics():
    g = tg.Grid.uniform(11)
    x = g.coords()[0]
    assert np.allclose(tg.grad(g, x**2)[0], 2 * x, atol=1e-12)


def test_helmholtz_convergence_and_residual():
    errs = []
    for n in (33, 65, 129):
        g = tg.Grid.uniform(n)
        x = g.coords()[0]
        exact = np.cos(np.pi * x)
        sol, info = tg.solve_helmholtz(g, 1.0, 1.0, (1 + np.pi**2) * exact, tol=1e-13, full_output=True)
        errs.append(float(np.max(np.abs(sol - exact))))
        assert info.residual <= 1e-13 * np.linalg.norm((1 + np.pi**2) * exact)
    assert all(1.9 <= math.log2(a / b) <= 2.1 for a, b in zip(errs, errs[1:]))


def test_helmholtz_variable_coefficient_2d():
    rng = np.random.default_rng(4)
    g = tg.Grid.uniform((9, 13))
    a = rng.uniform(0.5, 2.0, g.shape)
    x = rng.normal(size=g.shape)
    rhs = a * x - 0.3 * tg.laplacian_neumann(g, x)
    sol = tg.solve_helmholtz(g, a, 0.3, rhs, tol=1e-13)
    assert np.max(np.abs(sol - x)) <= 1e-9


def test_helmholtz_errors():
    g = tg.Grid.uniform(33)
    x = g.coords()[0]
    with pytest.raises(tg.SolverError) as exc:
        tg.solve_helmholtz(g, 1.0, 1.0, np.cos(np.pi * x), tol=1e-14, maxiter=1)
    assert exc.value.residual is not None
    with pytest.raises(ValueError):
        tg.solve_helmholtz(g, 0.0, 1.0, x)
    with pytest.raises(tg.GridMismatch):
        tg.solve_helmholtz(g, 1.0, 1.0, np.zeros(7))


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        tg.Grid.uniform(1)
    with pytest.raises(ValueError):
        tg.Grid.uniform((3, 3, 3))
    with pytest.raises(tg.GridMismatch):
        tg.Grid.uniform(5).check(np.zeros(4))
