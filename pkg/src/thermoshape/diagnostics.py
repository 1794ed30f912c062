"""Executable versions of the scheme's analytic bookkeeping.

Everything here is read-only over level vectors or a :class:`Trajectory`:
interpolant identities, the discrete mechanical energy balance, the thermal
mass and entropy budgets, truncation (level-set) energies, the a priori norm
ledger, the phase-recursion bound and the difference-quotient inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as tg
from .interpolants import Interpolant, diff_quotients, eval_on_slab
from .stepper import Trajectory, sigma_dot_e

__all__ = [
    "IdentityCheck",
    "interp_identity_suite",
    "EnergyAudit",
    "energy_audit",
    "entropy_mass_positivity",
    "truncation",
    "level_set_energies",
    "apriori_ledger",
    "recursion_check",
    "taylor_checks",
    "report",
]

IDENTITY_RTOL = 1e-12

_GX, _GW = np.polynomial.legendre.leggauss(3)


# ---------------------------------------------------------------------------
# interpolant identities


@dataclass
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    relation: str  # "==" or "<="
    tol: float = IDENTITY_RTOL
    scale: float = 0.0  # reference magnitude for checks whose target is 0

    @property
    def residual(self) -> float:
        """Relative defect; for inequalities only the violating part counts."""
        scale = max(abs(self.lhs), abs(self.rhs), self.scale)
        if scale == 0.0:
            return 0.0
        gap = self.lhs - self.rhs
        if self.relation == "<=":
            gap = max(gap, 0.0)
        return abs(gap) / scale

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": self.relation,
            "residual": self.residual,
            "tol": self.tol,
            "scale": self.scale,
            "passed": self.passed,
        }


def _sq(x, weights):
    """Squared Z-norm of each leading-axis entry of x."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and weights is None:
        return x * x
    axes = tuple(range(1, x.ndim))
    if weights is None:
        return np.sum(x * x, axis=axes)
    return np.sum(np.asarray(weights) * x * x, axis=axes)


def interp_identity_suite(levels, tau: float, weights=None, tol: float = IDENTITY_RTOL) -> list[IdentityCheck]:
    """Check the interpolant identities on one level vector.

    The left-hand sides are computed from the interpolants themselves: L2-in-time
    norms by 3-point Gauss on each slab (exact, the integrands are polynomials
    of degree <= 4), sup norms from slab-end values (exact, the squared norms
    are convex in s or in s^2 on each slab).  The right-hand sides use the
    level sums.  ``weights`` are quadrature weights for field-valued levels.
    """
    z = np.asarray(levels, dtype=float)
    N = z.shape[0] - 1
    T = N * tau
    bar = Interpolant("forth_constant", z, tau)
    under = Interpolant("back_constant", z, tau)
    hat = Interpolant("piecewise_linear", z, tau)
    tilde = Interpolant("piecewise_quadratic", z, tau)
    dz, d2z = diff_quotients(z, tau)
    v = dz  # v_n = dz_n, n = 0..N
    v_under = Interpolant("back_constant", v, tau)
    v_hat = Interpolant("piecewise_linear", v, tau)

    n_q = np.repeat(np.arange(1, N + 1), 3)
    s_q = np.tile(0.5 * tau * (1.0 + _GX), N)
    w_q = np.tile(0.5 * tau * _GW, N)
    n_e = np.repeat(np.arange(1, N + 1), 2)
    s_e = np.tile([0.0, tau], N)

    def L2sq(f, deriv=0, g=None, gderiv=0):
        val = eval_on_slab(f, n_q, s_q, deriv)
        if g is not None:
            val = val - eval_on_slab(g, n_q, s_q, gderiv)
        return float(np.sum(w_q * _sq(val, weights)))

    def Linf(f, deriv=0, g=None, gderiv=0):
        val = eval_on_slab(f, n_e, s_e, deriv)
        if g is not None:
            val = val - eval_on_slab(g, n_e, s_e, gderiv)
        return float(np.sqrt(np.max(_sq(val, weights))))

    nz = np.sqrt(_sq(z, weights))
    ndz = np.sqrt(_sq(dz, weights))
    nd2z = np.sqrt(_sq(d2z, weights))
    jumps = _sq(np.diff(z, axis=0), weights)
    sum_dz = tau * float(np.sum(ndz[:N] ** 2))
    sum_d2z = tau * float(np.sum(nd2z[: N - 1] ** 2))

    out = []

    def eq(name, lhs, rhs, rel="==", scale=0.0):
        out.append(IdentityCheck(name, float(lhs), float(rhs), rel, tol, float(scale)))

    dscale = float(np.max(ndz))
    eq("dt_hat_is_under_of_dz", Linf(hat, 1, v_under, 0), 0.0, scale=dscale)
    eq("dt_tilde_is_hat_of_dz", Linf(tilde, 1, v_hat, 0), 0.0, scale=dscale)
    eq("sup_bar", Linf(bar), np.max(nz[1:]))
    eq("sup_under", Linf(under), np.max(nz[:N]))
    eq("sup_dt_hat", Linf(hat, 1), np.max(ndz[:N]))
    eq("sup_dt2_tilde", Linf(tilde, 2), np.max(nd2z[: N - 1]))
    eq("l2_bar", L2sq(bar), tau * np.sum(nz[1:] ** 2))
    eq("l2_under", L2sq(under), tau * np.sum(nz[:N] ** 2))
    eq("l2_dt_hat", L2sq(hat, 1), sum_dz)
    eq("l2_dt2_tilde", L2sq(tilde, 2), sum_d2z)
    eq("sup_hat", Linf(hat), max(nz[0], Linf(bar)))
    mid = tau * float(np.sum(nz[:N] ** 2 + nz[1:] ** 2))
    eq("l2_hat_upper", L2sq(hat), mid, "<=")
    eq("l2_hat_vs_bar", mid, tau * nz[0] ** 2 + 2.0 * L2sq(bar), "<=")
    for name, f in (("bar", bar), ("under", under)):
        eq(f"sup_{name}_minus_hat", Linf(f, 0, hat), np.sqrt(np.max(jumps)))
        eq(f"sup_{name}_minus_hat_dt", Linf(f, 0, hat), tau * Linf(hat, 1))
        eq(f"l2_{name}_minus_hat", L2sq(f, 0, hat), tau / 3.0 * np.sum(jumps))
        eq(f"l2_{name}_minus_hat_dt", L2sq(f, 0, hat), tau**2 / 3.0 * L2sq(hat, 1))
    eq("l2_dt_tilde_minus_dt_hat", L2sq(tilde, 1, hat, 1), tau**2 / 3.0 * L2sq(tilde, 2))
    eq("sup_tilde_minus_hat", Linf(tilde, 0, hat, 0) ** 2, T * tau**2 / 3.0 * L2sq(tilde, 2), "<=")
    # ghost-level consequences, measured against the size of the quotients
    eq("ghost_dz", np.sqrt(np.max(_sq((dz[N] - dz[N - 1])[None], weights))), 0.0, scale=dscale)
    eq("ghost_d2z", tau * np.sqrt(np.max(_sq(d2z[N - 1][None], weights))), 0.0, scale=dscale)
    return out


# ---------------------------------------------------------------------------
# mechanical energy


def _edge_sq(g, q) -> float:
    return float(sum(np.sum(g.edge_weights(a) * q[a] ** 2) for a in range(g.dim)))


@dataclass
class EnergyAudit:
    """Per-step terms of the discrete mechanical balance, m = 0..levels-2.

    ``energy[m] + dissipation[m] == initial + work[m]``; ``residual`` is the
    defect relative to the largest term involved.
    """

    energy: np.ndarray
    dissipation: np.ndarray
    work: np.ndarray
    initial: float
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual)) if self.residual.size else 0.0

    @property
    def energy_nonincreasing(self) -> bool:
        e = np.concatenate([[self.initial], self.energy])
        return bool(np.all(np.diff(e) <= 1e-14 * max(1.0, float(np.max(np.abs(e))))))


def energy_audit(traj: Trajectory) -> EnergyAudit:
    """Balance obtained by testing the displacement equation with kappa (u_{n+1} - u_n).

    E_m = kappa/2 |du_m|^2 + 1/2 |sigma_{m+1}|^2,
    D_m = 1/2 sum_{n<=m} (kappa |du_n - du_{n-1}|^2 + |sigma_{n+1} - sigma_n|^2),
    W_m = tau sum_{n<=m} (kappa (<B_n, du_n> + <b_n, du_n>_Gamma)
          - sum W sigma_{n+1} . e (gamma_{n+1} - gamma_n) / tau),
    and E_m + D_m = E_init + W_m with E_init = kappa/2 |u0'|^2 + 1/2 |sigma_0|^2.
    """
    g, fam, tau = traj.grid, traj.fam, traj.tau
    if not traj.dense:
        raise ValueError("energy audit needs a dense trajectory")
    kappa = fam.model.kappa
    e = fam.model.e
    M = g.weights
    u = np.concatenate([traj.u_m1[None], traj.u], axis=0)  # index shift: u[k] = u_{k-1}
    du = np.diff(u, axis=0) / tau  # du[k] = du_{k-1}, k = 0..L-1
    L = traj.levels
    gam = [tg.edge_average(g, fam.gamma(traj.chi[n])) for n in range(L)]
    sig = [tuple(traj.sigma[a][n] for a in range(g.dim)) for n in range(L)]
    E_init = 0.5 * kappa * float(np.sum(M * du[0] ** 2)) + 0.5 * _edge_sq(g, sig[0])
    m_max = L - 1
    energy = np.empty(m_max)
    diss = np.empty(m_max)
    work = np.empty(m_max)
    resid = np.empty(m_max)
    D = W = 0.0
    Wabs = 0.0
    bw = g.boundary_weights
    for m in range(m_max):
        dum, dum_prev = du[m + 1], du[m]
        ds = tuple(sig[m + 1][a] - sig[m][a] for a in range(g.dim))
        D += 0.5 * (kappa * float(np.sum(M * (dum - dum_prev) ** 2)) + _edge_sq(g, ds))
        load = kappa * (float(np.sum(M * traj.B[m] * dum)) + float(np.sum(bw * traj.b[m] * dum)))
        coupling = sum(
            float(np.sum(g.edge_weights(a) * sig[m + 1][a] * e[a] * (gam[m + 1][a] - gam[m][a]))) for a in range(g.dim)
        )
        inc = tau * load - coupling
        W += inc
        Wabs += abs(tau * load) + abs(coupling)
        E = 0.5 * kappa * float(np.sum(M * dum**2)) + 0.5 * _edge_sq(g, sig[m + 1])
        energy[m], diss[m], work[m] = E, D, W
        scale = max(E + D, E_init + Wabs, np.finfo(float).tiny)
        resid[m] = abs(E + D - E_init - W) / scale if (E + D + E_init + Wabs) > 0 else 0.0
    return EnergyAudit(energy, diss, work, E_init, resid)


# ---------------------------------------------------------------------------
# thermal budgets


def entropy_mass_positivity(traj: Trajectory) -> dict:
    """Per-level thermal monitors and the two mass budgets.

    ``mass_residual[n]`` is the exact balance of the temperature step tested
    with v = 1:
    ``tau |sum M (a_n dtheta_n - (theta_n + eps) alpha_eps'(theta_n) G_eps'(chi_n) dchi_n - R_n - dchi_n^2)|``.
    ``w_budget_drift[m]`` compares the integral of w with its first-order
    budget, which holds only up to O(tau).
    """
    g, fam, tau = traj.grid, traj.fam, traj.tau
    eps = fam.eps
    th, chi = traj.theta, traj.chi
    L = traj.levels
    M = g.weights
    entropy = np.empty(L)
    for n in range(L):
        entropy[n] = -tg.integrate(g, np.log(th[n] + eps)) if np.all(th[n] + eps > 0) else np.inf
    w = fam.phi(th, chi)
    mass_w = np.sum(M * w, axis=tuple(range(1, w.ndim)))
    min_theta = np.min(th, axis=tuple(range(1, th.ndim)))
    mass_res = np.zeros(max(L - 1, 0))
    drift = np.zeros(max(L - 1, 0))
    budget = mass_w[0]
    for n in range(L - 1):
        dth = (th[n + 1] - th[n]) / tau
        dchi = (chi[n + 1] - chi[n]) / tau
        a_n = fam.a(th[n], chi[n])
        coup = (th[n] + eps) * fam.alpha(th[n], 1) * fam.G(chi[n], 1) * dchi
        mass_res[n] = tau * abs(float(np.sum(M * (a_n * dth - coup - traj.R[n] - dchi**2))))
        budget += tau * float(np.sum(M * (fam.alpha(th[n + 1]) * (fam.G(chi[n + 1]) - fam.G(chi[n])) / tau + traj.R[n] + dchi**2)))
        drift[n] = mass_w[n + 1] - budget
    return {
        "entropy": entropy,
        "mass_w": mass_w,
        "min_theta": min_theta,
        "mass_residual": mass_res,
        "w_budget_drift": drift,
        "positive": bool(np.all(min_theta >= 0.0)),
        "first_negative_level": int(np.argmax(min_theta < 0)) if np.any(min_theta < 0) else None,
    }


# ---------------------------------------------------------------------------
# level sets


def truncation(r, k: float):
    """T_k(r) = integral over (0, r) of min((s - k)^+, 1)."""
    x = np.asarray(r, dtype=float) - k
    return np.where(x <= 0, 0.0, np.where(x <= 1.0, 0.5 * x * x, 0.5 + (x - 1.0)))[()]


def level_set_energies(g, w_levels, tau: float, k_max: int) -> list[dict]:
    """For k = 0..k_max: |Q^k|, the clipped gradient energy over Q^k and the
    change of the integral of T_k(w) between the first and last level.

    Time integrals use the forth-constant interpolant (levels 1..N).  The
    gradient energy is ``tau sum_n sum W (D w_n)(D clip(w_n - k, 0, 1))``,
    the edge form of the integral of |grad w|^2 over Q^k.
    """
    w = np.asarray(w_levels, dtype=float)
    M = g.weights
    table = []
    for k in range(k_max + 1):
        meas = 0.0
        energy = 0.0
        for n in range(1, w.shape[0]):
            wn = w[n]
            meas += tau * float(np.sum(M * ((wn >= k) & (wn < k + 1))))
            dw = tg.edge_gradient(g, wn)
            dc = tg.edge_gradient(g, np.clip(wn - k, 0.0, 1.0))
            energy += tau * sum(float(np.sum(g.edge_weights(a) * dw[a] * dc[a])) for a in range(g.dim))
        dT = tg.integrate(g, truncation(w[-1], k)) - tg.integrate(g, truncation(w[0], k))
        table.append({"k": k, "measure": meas, "grad_energy": energy, "truncation_change": dT})
    return table


# ---------------------------------------------------------------------------
# a priori ledger


def _lq_time(g, levels, tau, q):
    """Forth-constant L^q(Q) norm of nodal levels."""
    s = sum(tau * float(np.sum(g.weights * np.abs(levels[n]) ** q)) for n in range(1, levels.shape[0]))
    return s ** (1.0 / q)


def _w1q_time(g, levels, tau, q):
    s = sum(tau * tg.norm(g, levels[n], "W1q_semi", q) ** q for n in range(1, levels.shape[0]))
    return s ** (1.0 / q)


def apriori_ledger(traj: Trajectory, qs=(1.0, 1.2)) -> dict:
    """Run maxima of the quantities bounded by the three a priori estimates.

    Keys (all maxima over m unless marked sum):
      first: du_L2sq, sigma_L2sq, chi_Vsq, sum_dchi_L2sq, sum_dgradchi_L2sq
      second: theta_sum_dtheta_plus_Vsq
      third: d2u_L2sq, dsigma_L2sq, sum_d2chi_Vsq, graddchi_L2sq
      surrogates: theta/w L^q(Q) norms and W^{1,q} seminorms for q in ``qs``.
    """
    g, tau = traj.grid, traj.tau
    if not traj.dense:
        raise ValueError("a priori ledger needs a dense trajectory")
    L = traj.levels
    M = g.weights

    def l2(x):
        return float(np.sum(M * x * x))

    def h1(x):
        return tg.norm(g, x, "H1semi") ** 2

    u = np.concatenate([traj.u_m1[None], traj.u], axis=0)
    du = np.diff(u, axis=0) / tau  # du[k] = du_{k-1}
    chi, th = traj.chi, traj.theta
    dchi = np.diff(chi, axis=0) / tau
    dth = np.diff(th, axis=0) / tau
    sig = traj.sigma
    out = {k: 0.0 for k in (
        "du_L2sq", "sigma_L2sq", "chi_Vsq", "sum_dchi_L2sq", "sum_dgradchi_L2sq",
        "theta_sum_dtheta_plus_Vsq", "d2u_L2sq", "dsigma_L2sq", "sum_d2chi_Vsq", "graddchi_L2sq",
    )}
    s_dchi = s_dgchi = s_dth = s_d2chi = 0.0
    for m in range(L - 1):
        s_dchi += tau * l2(dchi[m])
        s_dgchi += tau * h1(dchi[m])
        s_dth += tau * l2(dth[m])
        sig_m1 = tuple(sig[a][m + 1] for a in range(g.dim))
        dsig = tuple((sig[a][m + 1] - sig[a][m]) / tau for a in range(g.dim))
        d2u = (du[m + 1] - du[m]) / tau
        vals = {
            "du_L2sq": l2(du[m + 1]),
            "sigma_L2sq": _edge_sq(g, sig_m1),
            "chi_Vsq": l2(chi[m + 1]) + h1(chi[m + 1]),
            "sum_dchi_L2sq": s_dchi,
            "sum_dgradchi_L2sq": s_dgchi,
            "theta_sum_dtheta_plus_Vsq": s_dth + l2(th[m + 1]) + h1(th[m + 1]),
            "d2u_L2sq": l2(d2u),
            "dsigma_L2sq": _edge_sq(g, dsig),
            "graddchi_L2sq": h1(dchi[m]),
        }
        if m >= 1:
            d2 = (dchi[m] - dchi[m - 1]) / tau
            s_d2chi += tau * (l2(d2) + h1(d2))
        vals["sum_d2chi_Vsq"] = s_d2chi
        for k, v in vals.items():
            out[k] = max(out[k], v)
    w = traj.w()
    for q in qs:
        out[f"theta_Lq_{q:g}"] = _lq_time(g, th, tau, q)
        out[f"theta_W1q_{q:g}"] = _w1q_time(g, th, tau, q)
        out[f"w_Lq_{q:g}"] = _lq_time(g, w, tau, q)
        out[f"w_W1q_{q:g}"] = _w1q_time(g, w, tau, q)
    return out


# ---------------------------------------------------------------------------
# phase recursion and difference-quotient inequalities


def recursion_check(traj: Trajectory) -> dict:
    """With z_n = chi_n - eps lap(chi_n), check
    (tau/eps) sum ||z_{n+1}||^2 + ||z_{m+1}||^2 <= ||z_0||^2 + eps tau sum ||f_n||^2
    for every m, where f_n collects the explicit and monotone terms of the phase step.
    Returns the worst relative slack (negative means violated)."""
    g, fam, tau = traj.grid, traj.fam, traj.tau
    eps = fam.eps
    th_c = fam.model.theta_c
    chi = traj.chi
    M = g.weights
    z = [chi[n] - eps * tg.laplacian_neumann(g, chi[n]) for n in range(traj.levels)]
    lhs_sum = rhs_sum = 0.0
    z0 = float(np.sum(M * z[0] ** 2))
    worst = np.inf
    for n in range(traj.levels - 1):
        sig = tuple(traj.sigma[a][n] for a in range(g.dim))
        f = (
            chi[n + 1] / eps
            - th_c * fam.dF(chi[n + 1])
            - fam.alpha(traj.theta[n]) * fam.G(chi[n], 1)
            + sigma_dot_e(g, fam, sig) * fam.gamma(chi[n], 1)
        )
        zn1 = float(np.sum(M * z[n + 1] ** 2))
        lhs_sum += tau / eps * zn1
        rhs_sum += eps * tau * float(np.sum(M * f * f))
        lhs = lhs_sum + zn1
        rhs = z0 + rhs_sum
        worst = min(worst, (rhs - lhs) / max(rhs, np.finfo(float).tiny))
    return {"worst_relative_slack": float(worst), "holds": bool(worst >= -1e-9)}


def taylor_checks(traj: Trajectory, slack: float = 1e-12) -> dict:
    """Nodewise difference-quotient inequalities on the phase levels.

    Lipschitz: |d f(chi_n)| <= Lip |d chi_n| for f = G_eps, gamma_eps.
    Convexity: F1eps'(chi_{n+1}) d chi_n >= d F1eps(chi_n).
    Returns the worst violation of each (<= 0 means satisfied)."""
    fam, tau = traj.fam, traj.tau
    chi = traj.chi
    lip = fam.lip_gamma
    dchi = np.diff(chi, axis=0) / tau
    out = {}
    for name, f in (("G_eps", lambda s: fam.G(s)), ("gamma_eps", lambda s: fam.gamma(s))):
        df = np.diff(f(chi), axis=0) / tau
        out[f"lipschitz_{name}"] = float(np.max(np.abs(df) - lip * np.abs(dchi)))
    F = fam.F1eps(chi)
    dF = np.diff(F, axis=0) / tau
    conv = dF - fam.beta(chi[1:]) * dchi
    out["convex_F1eps"] = float(np.max(conv)) if conv.size else 0.0
    scale = 1.0 + float(np.max(np.abs(dchi))) if dchi.size else 1.0
    out["holds"] = all(v <= slack * scale / tau for v in out.values())
    return out


# ---------------------------------------------------------------------------
# per-level series for serialisation


def report(traj: Trajectory) -> dict:
    """Per-level series plus end-of-run aggregates for a dense trajectory."""
    em = entropy_mass_positivity(traj)
    ea = energy_audit(traj)
    L = traj.levels
    mech = np.full(L, np.nan)
    resid = np.full(L, np.nan)
    mech[0] = ea.initial
    mech[1:] = ea.energy
    resid[1:] = ea.residual
    mres = np.concatenate([[0.0], em["mass_residual"]])
    series = {
        "n": np.arange(L),
        "t": np.arange(L) * traj.tau,
        "mass": em["mass_w"],
        "entropy": em["entropy"],
        "min_theta": em["min_theta"],
        "mech_energy": mech,
        "energy_residual": resid,
        "mass_residual": mres,
    }
    ident = []
    for name, lv in (("theta", traj.theta), ("chi", traj.chi), ("u", traj.u)):
        if L >= 3:
            checks = interp_identity_suite(lv, traj.tau, weights=traj.grid.weights)
            ident.append((name, max(c.residual for c in checks)))
    aggregates = {
        "energy_residual_max": ea.max_residual,
        "energy_nonincreasing": ea.energy_nonincreasing,
        "mass_residual_max": float(np.max(em["mass_residual"])) if em["mass_residual"].size else 0.0,
        "w_budget_drift_max": float(np.max(np.abs(em["w_budget_drift"]))) if em["w_budget_drift"].size else 0.0,
        "entropy_max": float(np.max(em["entropy"])),
        "min_theta": float(np.min(em["min_theta"])),
        "positivity_holds": em["positive"],
        "first_negative_level": em["first_negative_level"],
        "interp_identity_residual_max": {k: v for k, v in ident},
    }
    return {"series": series, "aggregates": aggregates}
