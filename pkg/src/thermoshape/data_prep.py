"""Smoothed initial data and per-step forcing for the discrete scheme."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as tg
from .grid import Grid, SolverError
from .regularization import EpsFamily

__all__ = [
    "InitialData",
    "PreparedData",
    "smooth_theta0",
    "smooth_chi0",
    "build_u0eps",
    "build_w0eps",
    "discretize_forcing",
    "prepare",
    "ChiResult",
]

THETA_FLOOR = 1e-8


def _time_fn(x):
    """Wrap a constant (scalar or array) as a function of t."""
    if callable(x):
        return x
    return lambda t, _x=x: _x


@dataclass
class InitialData:
    """Raw data on a grid.

    ``R_Omega``, ``B_Omega`` and ``b_Gamma`` are either constants or callables
    ``t -> array``; ``b_Gamma`` is boundary data as accepted by
    :func:`thermoshape.grid.boundary_pairing`.
    """

    grid: Grid
    theta0: np.ndarray
    chi0: np.ndarray
    u0: np.ndarray
    u0_prime: np.ndarray
    R_Omega: object = 0.0
    B_Omega: object = 0.0
    b_Gamma: object = 0.0

    def __post_init__(self):
        g = self.grid
        for name in ("theta0", "chi0", "u0", "u0_prime"):
            setattr(self, name, np.array(np.broadcast_to(np.asarray(getattr(self, name), dtype=float), g.shape)))
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        if np.any(self.theta0 < 0):
            raise ValueError(f"theta0 must be nonnegative, min is {float(self.theta0.min())}")


@dataclass
class ChiResult:
    chi: np.ndarray
    iterations: int
    residuals: list[float] = field(default_factory=list)


@dataclass
class PreparedData:
    grid: Grid
    fam: EpsFamily
    T: float
    N: int
    theta0_eps: np.ndarray
    chi0_eps: np.ndarray
    u0_eps: np.ndarray
    u0_prime_eps: np.ndarray
    sigma0_eps: tuple
    w0_eps: np.ndarray
    R: np.ndarray  # (N,) + grid.shape, slab averages
    B: np.ndarray  # (N,) + grid.shape, interior load at n tau
    b: np.ndarray  # (N,) + grid.shape, boundary traction at n tau (boundary nodes only)
    theta_floor_applied: bool = False
    chi_iterations: int = 0

    @property
    def tau(self) -> float:
        return self.T / self.N


def smooth_theta0(g: Grid, theta0, eps: float, tol: float = 1e-12) -> np.ndarray:
    """theta - eps lap(theta) = theta0."""
    return tg.solve_helmholtz(g, 1.0, eps, g.check(theta0, "theta0"), tol=tol)


def _chi0_objective(g, fam, chi0, v):
    eps = fam.eps
    return float(
        np.sum(g.weights * (0.5 * v * v + eps * fam.F1eps(v) - chi0 * v))
        + 0.5 * eps * tg.norm(g, v, "H1semi") ** 2
    )


def smooth_chi0(
    g: Grid,
    chi0,
    fam: EpsFamily,
    tol: float = 1e-10,
    max_iter: int = 50,
    linear_tol: float = 1e-12,
) -> ChiResult:
    """chi - eps lap(chi) + eps beta_eps(chi) = chi0 by damped semismooth Newton.

    The equation is the optimality condition of a strictly convex functional,
    which supplies the Armijo merit.  Stops when the nodal residual max-norm
    is at most ``tol``.
    """
    chi0 = g.check(chi0, "chi0")
    if not np.all(np.isfinite(fam.model.F1.value(chi0))):
        raise ValueError("F1(chi0) is not finite at every node")
    eps = fam.eps
    v = chi0.copy()
    history = []
    for it in range(max_iter + 1):
        res = v - eps * tg.laplacian_neumann(g, v) + eps * fam.beta(v) - chi0
        rnorm = float(np.max(np.abs(res)))
        history.append(rnorm)
        if rnorm <= tol:
            return ChiResult(v, it, history)
        if it == max_iter:
            break
        d = tg.solve_helmholtz(g, 1.0 + eps * fam.dbeta(v), eps, -res, tol=linear_tol)
        slope = float(np.sum(g.weights * res * d))
        f0 = _chi0_objective(g, fam, chi0, v)
        step = 1.0
        while step > 1e-12:
            trial = v + step * d
            if _chi0_objective(g, fam, chi0, trial) <= f0 + 1e-4 * step * slope:
                break
            step *= 0.5
        v = v + step * d
    raise SolverError(f"chi0 smoothing stagnated, residual {history[-1]:.3e}", residual=history[-1], history=history)


def check_dims(g: Grid, fam: EpsFamily):
    if fam.model.dim != g.dim:
        raise tg.GridMismatch(f"direction e has {fam.model.dim} components, grid dim is {g.dim}")


def _gamma_edges(g: Grid, fam: EpsFamily, chi) -> tuple:
    """gamma_eps(chi) e on edges (arithmetic edge mean of the nodal values)."""
    check_dims(g, fam)
    gam = tg.edge_average(g, fam.gamma(chi))
    e = fam.model.e
    return tuple(e[a] * gam[a] for a in range(g.dim))


def stress(g: Grid, fam: EpsFamily, u, chi) -> tuple:
    """Edge stress kappa D u - gamma_eps(chi) e."""
    du = tg.edge_gradient(g, u)
    ge = _gamma_edges(g, fam, chi)
    k = fam.model.kappa
    return tuple(k * du[a] - ge[a] for a in range(g.dim))


def build_u0eps(g: Grid, u0, chi0_eps, fam: EpsFamily, tol: float = 1e-12):
    """u - eps kappa lap(u) = u0 - eps div(gamma_eps(chi0_eps) e); returns (u0_eps, sigma0_eps)."""
    u0 = g.check(u0, "u0")
    rhs = u0 - fam.eps * tg.divergence(g, _gamma_edges(g, fam, chi0_eps))
    u = tg.solve_helmholtz(g, 1.0, fam.eps * fam.model.kappa, rhs, tol=tol)
    return u, stress(g, fam, u, chi0_eps)


def build_w0eps(fam: EpsFamily, theta0_eps, chi0_eps, check: bool = True) -> np.ndarray:
    w = fam.phi(theta0_eps, chi0_eps)
    if check:
        fam.check_phi_band(theta0_eps, w)
    return w


_GAUSS3_X = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GAUSS3_W = np.array([5.0, 8.0, 5.0]) / 18.0  # normalised to sum 1


def discretize_forcing(data: InitialData, N: int, tau: float, eps: float | None = None):
    """Per-step forcing arrays (R, B, b), each of shape ``(N,) + grid.shape``.

    ``R[n]`` is the slab mean of R over ``[n tau, (n+1) tau]`` by 3-point
    Gauss (exact for polynomials of degree <= 5).  ``B[n]`` and ``b[n]`` are
    samples at ``n tau``; the loads are used as given, so ``eps`` is accepted
    for interface symmetry only.
    """
    g = data.grid
    R_fn = _time_fn(data.R_Omega)
    B_fn = _time_fn(data.B_Omega)
    b_fn = _time_fn(data.b_Gamma)
    R = np.empty((N,) + g.shape)
    B = np.empty((N,) + g.shape)
    b = np.empty((N,) + g.shape)
    bmask = g.boundary_weights > 0
    for n in range(N):
        acc = np.zeros(g.shape)
        for x, w in zip(_GAUSS3_X, _GAUSS3_W):
            sample = np.broadcast_to(np.asarray(R_fn((n + 0.5 + 0.5 * x) * tau), dtype=float), g.shape)
            if np.any(sample < 0):
                raise ValueError(f"R must be nonnegative; min {float(sample.min())} in slab {n}")
            acc = acc + w * sample
        R[n] = acc
        B[n] = np.broadcast_to(np.asarray(B_fn(n * tau), dtype=float), g.shape)
        b[n] = np.where(bmask, tg.boundary_values(g, b_fn(n * tau)), 0.0)
    return R, B, b


def prepare(
    data: InitialData,
    fam: EpsFamily,
    T: float,
    N: int,
    theta_floor: bool = False,
    tol: float = 1e-12,
) -> PreparedData:
    """Run the three elliptic smoothings, build w0 and discretise the forcing."""
    g = data.grid
    check_dims(g, fam)
    theta0 = data.theta0
    floored = False
    if theta_floor and np.any(theta0 <= 0):
        theta0 = theta0 + THETA_FLOOR
        floored = True
    th = smooth_theta0(g, theta0, fam.eps, tol=tol)
    chi = smooth_chi0(g, data.chi0, fam, linear_tol=tol)
    u, sig = build_u0eps(g, data.u0, chi.chi, fam, tol=tol)
    w = build_w0eps(fam, th, chi.chi)
    R, B, b = discretize_forcing(data, N, T / N, fam.eps)
    return PreparedData(
        grid=g,
        fam=fam,
        T=float(T),
        N=int(N),
        theta0_eps=th,
        chi0_eps=chi.chi,
        u0_eps=u,
        u0_prime_eps=data.u0_prime.copy(),
        sigma0_eps=sig,
        w0_eps=w,
        R=R,
        B=B,
        b=b,
        theta_floor_applied=floored,
        chi_iterations=chi.iterations,
    )
