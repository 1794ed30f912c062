"""The time-discrete scheme: one step solves for the phase, then temperature,
then displacement, then updates the stress.

All three substeps are solved in increment form (the unknown is the change
over the step, or its difference quotient) so that the linear-solver
tolerance is measured relative to the change, not to the state.  The stress
lives on grid edges; see :func:`thermoshape.data_prep.stress`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as tg
from .data_prep import PreparedData, check_dims, stress
from .grid import Grid, SolverError
from .regularization import BandViolation, EpsFamily

__all__ = [
    "SchemeParams",
    "DiscreteState",
    "StepRecord",
    "Trajectory",
    "StepError",
    "init_state",
    "chi_step",
    "theta_step",
    "u_step",
    "advance",
    "run",
    "sigma_dot_e",
]


class StepError(SolverError):
    """A substep failed; carries the level index."""


@dataclass(frozen=True)
class SchemeParams:
    """Time discretisation and solver controls.

    ``validate`` enforces ``N >= 2``, ``tau <= 1`` and the strict-convexity
    threshold ``tau < tau_star``.
    """

    T: float
    N: int
    eps: float
    newton_tol: float = 1e-11
    linear_tol: float = 1e-12
    max_newton: int = 50

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if int(self.N) < 2:
            raise ValueError(f"N must be at least 2, got {self.N}")
        if self.tau > 1.0:
            raise ValueError(f"tau = T/N must not exceed 1, got {self.tau}")
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def tau(self) -> float:
        return self.T / self.N

    def validate(self, tau_star: float) -> "SchemeParams":
        if not self.tau < tau_star:
            raise ValueError(f"tau = {self.tau:.6g} is not below tau_star = {tau_star:.6g}")
        return self

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "N": self.N,
            "eps": self.eps,
            "newton_tol": self.newton_tol,
            "linear_tol": self.linear_tol,
            "max_newton": self.max_newton,
        }


@dataclass
class DiscreteState:
    n: int
    theta: np.ndarray
    u: np.ndarray
    u_prev: np.ndarray
    chi: np.ndarray
    sigma: tuple

    def copy(self) -> "DiscreteState":
        return DiscreteState(
            self.n,
            self.theta.copy(),
            self.u.copy(),
            self.u_prev.copy(),
            self.chi.copy(),
            tuple(s.copy() for s in self.sigma),
        )


@dataclass
class StepRecord:
    n: int
    newton_iterations: int
    chi_residual: float
    a_min: float
    a_max: float
    beta_max: float = 0.0  # max |beta_eps(chi_{n+1})|, the discrete stand-in for the selection xi


def sigma_dot_e(g: Grid, fam: EpsFamily, sigma) -> np.ndarray:
    """Nodal value of sigma . e, the weighted adjoint of the edge averaging."""
    check_dims(g, fam)
    e = fam.model.e
    return tg.edges_to_nodes(g, tuple(e[a] * sigma[a] for a in range(g.dim)))


def init_state(prep: PreparedData, params: SchemeParams) -> DiscreteState:
    g = prep.grid
    u0 = g.check(prep.u0_eps, "u0_eps")
    return DiscreteState(
        n=0,
        theta=g.check(prep.theta0_eps, "theta0_eps").copy(),
        u=u0.copy(),
        u_prev=u0 - params.tau * g.check(prep.u0_prime_eps, "u0_prime_eps"),
        chi=g.check(prep.chi0_eps, "chi0_eps").copy(),
        sigma=g.check_edges(prep.sigma0_eps, "sigma0_eps"),
    )


# ---------------------------------------------------------------------------
# phase step


def _chi_source(g, state, fam):
    """Explicit part of the phase equation, multiplied by tau elsewhere."""
    return fam.alpha(state.theta) * fam.G(state.chi, 1) - sigma_dot_e(g, fam, state.sigma) * fam.gamma(state.chi, 1)


def _chi_residual(g, fam, tau, chi_n, src, v):
    d = v - chi_n
    th_c = fam.model.theta_c
    return d - fam.eps * tg.laplacian_neumann(g, d) - tau * tg.laplacian_neumann(g, v) + tau * (th_c * fam.dF(v) + src)


def _chi_merit(g, fam, tau, chi_n, src, v):
    d = v - chi_n
    th_c = fam.model.theta_c
    return float(
        np.sum(g.weights * (0.5 * d * d + tau * th_c * fam.F(v) + tau * src * d))
        + 0.5 * fam.eps * tg.norm(g, d, "H1semi") ** 2
        + 0.5 * tau * tg.norm(g, v, "H1semi") ** 2
    )


def chi_step(g: Grid, state: DiscreteState, params: SchemeParams, fam: EpsFamily, full_output: bool = False):
    """Phase update by damped semismooth Newton.

    Solves, with ``d = chi - chi_n``,
    ``d - eps lap(d) - tau lap(chi) + tau (theta_c F_eps'(chi) + alpha_eps(theta_n) G_eps'(chi_n)
    - (sigma_n . e) gamma_eps'(chi_n)) = 0``, i.e. ``tau`` times the stationarity condition of
    the step functional, to ``max|.| <= newton_tol``.
    """
    tau = params.tau
    tau_star = fam.model.tau_star
    if not tau < tau_star:
        raise ValueError(f"tau = {tau:.6g} is not below tau_star = {tau_star:.6g}")
    th_c = fam.model.theta_c
    src = _chi_source(g, state, fam)
    chi_n = state.chi
    v = chi_n.copy()
    history = []
    for it in range(params.max_newton + 1):
        r = _chi_residual(g, fam, tau, chi_n, src, v)
        rn = float(np.max(np.abs(r)))
        history.append(rn)
        if rn <= params.newton_tol:
            return (v, it, history) if full_output else v
        if it == params.max_newton:
            break
        slope_a = 1.0 + tau * th_c * (fam.dbeta(v) + fam.model.F2.dpi(v))
        d = tg.solve_helmholtz(g, slope_a, fam.eps + tau, -r, tol=params.linear_tol)
        slope = float(np.sum(g.weights * r * d))
        m0 = _chi_merit(g, fam, tau, chi_n, src, v)
        slack = 1e-14 * (abs(m0) + 1.0)
        t = 1.0
        while t > 1e-10:
            trial = v + t * d
            if _chi_merit(g, fam, tau, chi_n, src, trial) <= m0 + 1e-4 * t * slope + slack:
                break
            t *= 0.5
        v = v + t * d
    raise StepError(
        f"phase Newton did not converge at level {state.n}: residual {history[-1]:.3e}",
        residual=history[-1],
        history=history,
    )


# ---------------------------------------------------------------------------
# temperature step


def theta_step(
    g: Grid,
    state: DiscreteState,
    chi_next: np.ndarray,
    R_n: np.ndarray,
    params: SchemeParams,
    fam: EpsFamily,
    full_output: bool = False,
):
    """Temperature update.

    With ``y = (theta_{n+1} - theta_n) / tau`` and ``a_n = a_eps(theta_n, chi_n)``,
    solves ``a_n y - tau lap(y) = (theta_n + eps) alpha_eps'(theta_n) G_eps'(chi_n) dchi
    + R_n + dchi^2 + lap(theta_n)``, where ``dchi = (chi_{n+1} - chi_n) / tau``.
    """
    tau = params.tau
    th = state.theta
    a_n = fam.a(th, state.chi)
    lo, hi = fam.check_band(a_n)
    dchi = (chi_next - state.chi) / tau
    rhs = (
        (th + fam.eps) * fam.alpha(th, 1) * fam.G(state.chi, 1) * dchi
        + R_n
        + dchi**2
        + tg.laplacian_neumann(g, th)
    )
    y = tg.solve_helmholtz(g, a_n, tau, rhs, tol=params.linear_tol)
    out = th + tau * y
    return (out, a_n, (lo, hi)) if full_output else out


# ---------------------------------------------------------------------------
# displacement step


def u_step(
    g: Grid,
    state: DiscreteState,
    chi_next: np.ndarray,
    B_n: np.ndarray,
    b_n: np.ndarray,
    params: SchemeParams,
    fam: EpsFamily,
):
    """Displacement and stress update.

    Weak form, for every nodal v:
    ``sum M (u_{n+1} - 2 u_n + u_{n-1}) / tau^2 v + sum W sigma_{n+1} . D v = sum M B v + <b, v>_Gamma``
    with ``sigma_{n+1} = kappa D u_{n+1} - gamma_eps(chi_{n+1}) e`` on edges.
    Solved for the second difference quotient ``y``.
    """
    check_dims(g, fam)
    tau = params.tau
    kappa = fam.model.kappa
    ubar = 2.0 * state.u - state.u_prev
    e = fam.model.e
    gam = tg.edge_average(g, fam.gamma(chi_next))
    div_gam = tg.divergence(g, tuple(e[a] * gam[a] for a in range(g.dim)))
    rhs = kappa * tg.laplacian_neumann(g, ubar) + B_n + g.boundary_weights * b_n / g.weights - div_gam
    y = tg.solve_helmholtz(g, 1.0, kappa * tau * tau, rhs, tol=params.linear_tol)
    u_next = ubar + tau * tau * y
    return u_next, stress(g, fam, u_next, chi_next)


# ---------------------------------------------------------------------------
# composition


def advance(
    g: Grid,
    state: DiscreteState,
    inputs: tuple,
    params: SchemeParams,
    fam: EpsFamily,
) -> tuple[DiscreteState, StepRecord]:
    """One full step; ``inputs = (R_n, B_n, b_n)``."""
    if state.n >= params.N:
        raise ValueError(f"level {state.n} is already the final level")
    R_n, B_n, b_n = inputs
    chi_next, its, hist = chi_step(g, state, params, fam, full_output=True)
    theta_next, _, (lo, hi) = theta_step(g, state, chi_next, R_n, params, fam, full_output=True)
    u_next, sig_next = u_step(g, state, chi_next, B_n, b_n, params, fam)
    new = DiscreteState(state.n + 1, theta_next, u_next, state.u.copy(), chi_next, sig_next)
    for name, arr in (("theta", theta_next), ("chi", chi_next), ("u", u_next)):
        if not np.all(np.isfinite(arr)):
            raise StepError(f"non-finite {name} at level {new.n}")
    return new, StepRecord(state.n, its, hist[-1], lo, hi, float(np.max(np.abs(fam.beta(chi_next)))))


@dataclass
class Trajectory:
    """Run record.

    In dense mode ``theta``, ``chi``, ``u`` have shape ``(levels,) + grid.shape``
    and ``sigma[a]`` shape ``(levels,) + edge_shape(a)``; ``u_m1`` is the
    auxiliary level ``u_{-1}``.  ``error`` is set when the run aborted, in
    which case only the levels reached are present.
    """

    grid: Grid
    fam: EpsFamily
    params: SchemeParams
    prepared: PreparedData
    theta: np.ndarray
    chi: np.ndarray
    u: np.ndarray
    sigma: tuple
    u_m1: np.ndarray
    records: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    error: str | None = None
    error_kind: str | None = None
    dense: bool = True

    @property
    def tau(self) -> float:
        return self.params.tau

    @property
    def levels(self) -> int:
        return self.theta.shape[0]

    @property
    def complete(self) -> bool:
        return self.error is None

    @property
    def R(self):
        return self.prepared.R

    @property
    def B(self):
        return self.prepared.B

    @property
    def b(self):
        return self.prepared.b

    def w(self) -> np.ndarray:
        return self.fam.phi(self.theta, self.chi)

    def times(self) -> np.ndarray:
        return np.arange(self.levels) * self.tau


def _monitor(g, fam, state):
    th = state.theta
    with np.errstate(invalid="ignore", divide="ignore"):
        ent = -tg.integrate(g, np.log(th + fam.eps)) if np.all(th + fam.eps > 0) else np.inf
    return {
        "n": state.n,
        "min_theta": float(np.min(th)),
        "entropy": float(ent),
        "mass_w": tg.integrate(g, fam.phi(th, state.chi)),
    }


def run(prep: PreparedData, params: SchemeParams, dense: bool = True, callback=None) -> Trajectory:
    """Drive the scheme over n = 0..N-1.

    Any substep failure stops the run; the returned trajectory then holds the
    levels reached and ``error`` describes the failure.  In thin mode
    (``dense=False``) only the last three levels are kept, while the scalar
    monitors are recorded at every level.
    """
    g = prep.grid
    fam = prep.fam
    params.validate(fam.model.tau_star)
    if prep.N != params.N or abs(prep.T - params.T) > 1e-14 * params.T:
        raise ValueError("prepared data and scheme parameters disagree on T or N")
    state = init_state(prep, params)
    thetas, chis, us = [state.theta], [state.chi], [state.u]
    sigmas = [state.sigma]
    u_m1 = state.u_prev.copy()
    records, monitors = [], [_monitor(g, fam, state)]
    error = kind = None
    for n in range(params.N):
        try:
            state, rec = advance(g, state, (prep.R[n], prep.B[n], prep.b[n]), params, fam)
        except BandViolation as exc:
            error, kind = str(exc), "band"
            break
        except (SolverError, FloatingPointError, ValueError) as exc:
            error, kind = str(exc), "solver"
            break
        records.append(rec)
        monitors.append(_monitor(g, fam, state))
        thetas.append(state.theta)
        chis.append(state.chi)
        us.append(state.u)
        sigmas.append(state.sigma)
        if not dense and len(thetas) > 3:
            for lst in (thetas, chis, us, sigmas):
                del lst[0]
        if callback is not None:
            callback(state, rec)
    sig = tuple(np.stack([s[a] for s in sigmas]) for a in range(g.dim))
    return Trajectory(
        grid=g,
        fam=fam,
        params=params,
        prepared=prep,
        theta=np.stack(thetas),
        chi=np.stack(chis),
        u=np.stack(us),
        sigma=sig,
        u_m1=u_m1,
        records=records,
        monitors=monitors,
        error=error,
        error_kind=kind,
        dense=dense,
    )
