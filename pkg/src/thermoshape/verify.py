"""Property-verification suites behind ``thermoshape verify``.

Each suite returns a :class:`SuiteResult`; :func:`run_all` runs them in a fixed
order with a seeded generator so two runs with the same seed print the same
report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import diagnostics as dg
from . import grid as tg
from . import regularization as rg
from .data_prep import InitialData, prepare
from .functions import IndicatorF1, QuadraticF2, ZeroF1, ZeroG
from .stepper import DiscreteState, SchemeParams, chi_step, run

__all__ = ["SuiteResult", "SUITES", "run_all", "format_report", "manufactured_orders"]


@dataclass
class SuiteResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}"


def _ok(checks: dict) -> bool:
    return all(bool(v) for k, v in checks.items() if k.startswith("ok_"))


def suite_kernel_mass(rng) -> SuiteResult:
    """Closed-form and quadrature integrals of D_eps both equal 1."""
    d = {}
    for eps in (0.2, 0.1, 0.05, 0.01):
        s = math.sqrt(eps)
        pieces = [(0.0, eps), (eps, s), (s, 2 * s)]
        q = sum(quad(lambda r: float(rg.d_eps(eps, r)), a, b, epsabs=1e-14, epsrel=1e-14)[0] for a, b in pieces)
        closed = float(rg.d_eps(eps, 2 * s, 1))
        d[f"quad_{eps}"] = q
        d[f"closed_{eps}"] = closed
        d[f"ok_{eps}"] = abs(q - 1) <= 1e-8 and abs(closed - 1) <= 1e-8
    return SuiteResult("kernel_mass", _ok(d), d)


def suite_alpha_eps(rng) -> SuiteResult:
    d = {}
    model = rg.ModelFunctions()
    a1, a2 = model.a1, model.a2
    for eps in (0.2, 0.1, 0.05):
        fam = rg.EpsFamily(model, eps)
        zero = [float(fam.alpha(0.0, k)) for k in (0, 1, 2)]
        r = np.linspace(2 * math.sqrt(eps), 20.0, 10_000)
        exact = float(np.max(np.abs(fam.alpha(r, 1) - model.alpha.d1(r))))
        rs = np.linspace(0.0, 20.0, 10_000)
        dev = float(np.max(np.abs(fam.alpha(rs) - model.alpha.value(rs))))
        d[f"ok_zero_{eps}"] = zero == [0.0, 0.0, 0.0]
        d[f"ok_tail_{eps}"] = exact == 0.0
        d[f"ok_dev_{eps}"] = dev <= 2 * math.sqrt(eps) * (abs(a1) + abs(a2))
    d["ok_lambda1"] = abs(rg.lambda_eps(1.0) - 2.0) <= 1e-12
    zeta_int = float(rg.zeta_profile(1.0, 1))
    x = np.linspace(0, 1, 10_001)
    d["ok_zeta"] = rg.zeta_profile(0.0) == 1.0 and float(np.max(np.abs(rg.zeta_profile(x)))) <= 1.0 and abs(zeta_int) <= 1e-12
    return SuiteResult("alpha_eps_certificates", _ok(d), d)


def _moreau_brute(F1, eps, s, lo=-4.0, hi=4.0):
    """Grid minimisation of the Moreau objective, refined around the best point."""
    grids = np.broadcast_to(np.linspace(lo, hi, 8001), (s.size, 8001))
    rows = np.arange(s.size)
    for _ in range(6):
        obj = (grids - s[:, None]) ** 2 / (2 * eps) + F1.value(grids)
        j = np.argmin(obj, axis=1)
        best, h = grids[rows, j], grids[0, 1] - grids[0, 0]
        grids = best[:, None] + np.linspace(-2 * h, 2 * h, 401)[None, :]
    obj = (grids - s[:, None]) ** 2 / (2 * eps) + F1.value(grids)
    j = np.argmin(obj, axis=1)
    return obj[rows, j], grids[rows, j]


def suite_moreau(rng) -> SuiteResult:
    d = {}
    F1 = IndicatorF1()
    s = rng.uniform(-3.0, 3.0, 100)
    for eps in (0.5, 0.1, 0.02):
        Fb, pb = _moreau_brute(F1, eps, s)
        F, b, _ = F1.envelope(eps, s)
        d[f"F_err_{eps}"] = float(np.max(np.abs(F - Fb)))
        d[f"beta_err_{eps}"] = float(np.max(np.abs(b - (s - pb) / eps)))
        d[f"ok_oracle_{eps}"] = d[f"F_err_{eps}"] <= 1e-6 and d[f"beta_err_{eps}"] <= 1e-6
        x, y = rng.uniform(-3, 3, (2, 10_000))
        bx, by = F1.envelope(eps, x)[1], F1.envelope(eps, y)[1]
        d[f"ok_monotone_{eps}"] = bool(np.all((bx - by) * (x - y) >= 0))
        d[f"ok_lipschitz_{eps}"] = bool(np.all(np.abs(bx - by) <= np.abs(x - y) / eps + 1e-12))
    return SuiteResult("moreau_yosida", _ok(d), d)


def suite_tau_gate(rng) -> SuiteResult:
    d = {}
    model = rg.ModelFunctions(G=ZeroG(), F1=ZeroF1(), F2=QuadraticF2(1.0))
    tau_star = model.tau_star
    try:
        SchemeParams(1.0, 2, 0.1).validate(tau_star)  # tau = 0.5 < 1 passes
        SchemeParams(tau_star * 2, 2, 0.1).validate(tau_star)
        d["ok_refused"] = False
    except ValueError:
        d["ok_refused"] = True
    g = tg.Grid.uniform(17)
    fam = rg.EpsFamily(model, 0.1)
    tau = 0.99 * tau_star
    N = 2
    params = SchemeParams(N * tau, N, 0.1, newton_tol=1e-13)
    c = float(rng.uniform(0.1, 0.5)) * 1e-2
    state = DiscreteState(0, g.full(1.0), g.full(0.0), g.full(0.0), g.full(c), tuple(np.zeros(g.edge_shape(a)) for a in range(g.dim)))
    chi1 = chi_step(g, state, params, fam)
    expected = c / (1 - tau * model.theta_c)
    d["chi1_err"] = float(np.max(np.abs(chi1 - expected)) / abs(expected))
    d["ok_constant_mode"] = d["chi1_err"] <= 1e-10
    return SuiteResult("tau_gate", _ok(d), d)


def suite_interpolants(rng) -> SuiteResult:
    d = {}
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(2, 11))
        shape = (N + 1,) if rng.random() < 0.5 else (N + 1, int(rng.integers(1, 6)))
        z = rng.normal(size=shape)
        tau = float(rng.uniform(0.05, 1.0))
        checks = dg.interp_identity_suite(z, tau)
        worst = max(worst, max(c.residual for c in checks))
        if not all(c.passed for c in checks):
            d["failed"] = [c.to_dict() for c in checks if not c.passed]
            break
    ex = {c.name: c for c in dg.interp_identity_suite(np.array([0.0, 1.0, 2.0]), 1.0)}
    d["worst_residual"] = worst
    d["ok_random"] = worst <= 1e-12
    d["ok_example"] = abs(ex["l2_bar_minus_hat"].lhs - 2 / 3) <= 1e-14 and abs(ex["l2_bar_minus_hat"].rhs - 2 / 3) <= 1e-14
    return SuiteResult("interpolant_algebra", _ok(d), d)


def decoupled_wave(N: int = 400, nodes: int = 65):
    g = tg.Grid.uniform(nodes)
    x = g.coords()[0]
    model = rg.ModelFunctions(G=ZeroG())
    fam = rg.EpsFamily(model, 0.1)
    data = InitialData(g, g.full(1.0), g.full(0.0), np.cos(np.pi * x), g.full(0.0))
    prep = prepare(data, fam, 1.0, N)
    return run(prep, SchemeParams(1.0, N, 0.1))


def suite_energy(rng) -> SuiteResult:
    tr = decoupled_wave()
    ea = dg.energy_audit(tr)
    d = {"max_residual": ea.max_residual, "ok_residual": ea.max_residual <= 1e-10, "ok_nonincreasing": ea.energy_nonincreasing}
    return SuiteResult("energy_identity", _ok(d), d)


def suite_constant_reductions(rng) -> SuiteResult:
    """Constant data stays on the exact scalar updates at every level."""
    d = {}
    g = tg.Grid.uniform(9)
    model = rg.ModelFunctions(G=ZeroG(), F1=IndicatorF1())
    fam = rg.EpsFamily(model, 0.1)
    N, T = 8, 0.8
    r0, b0 = 0.3, float(rng.uniform(0.1, 1.0))
    data = InitialData(g, g.full(1.0), g.full(0.0), g.full(0.2), g.full(0.0), R_Omega=r0, B_Omega=b0)
    tr = run(prepare(data, fam, T, N), SchemeParams(T, N, 0.1))
    tau = T / N
    n = np.arange(N + 1)
    theta_exact = 1.0 + n * tau * r0 / model.c0
    u_exact = 0.2 + b0 * tau**2 * n * (n + 1) / 2  # u_{n+1} = 2u_n - u_{n-1} + tau^2 b from rest
    d["theta_err"] = float(np.max(np.abs(tr.theta - theta_exact[:, None])))
    d["u_err"] = float(np.max(np.abs(tr.u - u_exact[:, None])))
    d["chi_err"] = float(np.max(np.abs(tr.chi)))
    d["ok_theta"] = d["theta_err"] <= 1e-10
    d["ok_u"] = d["u_err"] <= 1e-10
    d["ok_chi"] = d["chi_err"] == 0.0
    return SuiteResult("constant_reductions", _ok(d), d)


def manufactured_orders(nodes=(33, 65, 129, 257)):
    """Errors and observed orders of the Helmholtz solve on u = cos(pi x)."""
    errs = []
    for n in nodes:
        g = tg.Grid.uniform(n)
        x = g.coords()[0]
        exact = np.cos(np.pi * x)
        sol = tg.solve_helmholtz(g, 1.0, 1.0, (1 + np.pi**2) * exact, tol=1e-13)
        errs.append(float(np.max(np.abs(sol - exact))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    return errs, orders


def suite_manufactured(rng) -> SuiteResult:
    errs, orders = manufactured_orders()
    d = {"errors": errs, "orders": orders, "ok_orders": all(1.9 <= p <= 2.1 for p in orders)}
    return SuiteResult("manufactured_solution", _ok(d), d)


def suite_operator(rng) -> SuiteResult:
    d = {}
    for shape in ((33,), (9, 13)):
        g = tg.Grid.uniform(shape, [1.0] * len(shape))
        worst_sym = worst_def = 0.0
        for _ in range(20):
            f, h = rng.normal(size=(2,) + g.shape)
            lf, lh = tg.laplacian_neumann(g, f), tg.laplacian_neumann(g, h)
            sym = abs(tg.inner(g, lf, h) - tg.inner(g, f, lh))
            worst_sym = max(worst_sym, sym / (tg.norm(g, f) * tg.norm(g, h)))
            worst_def = max(worst_def, tg.inner(g, lf, f))
        d[f"ok_sym_{g.dim}d"] = worst_sym <= 1e-12
        d[f"ok_nsd_{g.dim}d"] = worst_def <= 1e-12
    return SuiteResult("neumann_operator", _ok(d), d)


SUITES = [
    suite_kernel_mass,
    suite_alpha_eps,
    suite_moreau,
    suite_tau_gate,
    suite_interpolants,
    suite_energy,
    suite_constant_reductions,
    suite_manufactured,
    suite_operator,
]


def run_all(seed: int = 0) -> list[SuiteResult]:
    out = []
    for suite in SUITES:
        rng = np.random.default_rng([seed, SUITES.index(suite)])
        try:
            out.append(suite(rng))
        except Exception as exc:  # a crashing suite is a failing suite
            out.append(SuiteResult(suite.__name__.removeprefix("suite_"), False, {"exception": repr(exc)}))
    return out


def format_report(results: list[SuiteResult]) -> str:
    lines = [r.line() for r in results]
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} suites passed")
    return "\n".join(lines)
