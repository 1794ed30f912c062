"""Experiment drivers: single runs with on-disk artifacts, tau- and eps-refinement
studies by Cauchy differences of interpolants."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import grid as tg
from .config import ExperimentConfig, build_grid, build_initial, build_model, build_params
from .data_prep import PreparedData, prepare
from .interpolants import Interpolant
from .regularization import EpsFamily
from .stepper import SchemeParams, Trajectory, run

__all__ = [
    "Setup",
    "setup",
    "simulate",
    "RunSummary",
    "run_experiment",
    "write_series",
    "write_snapshot",
    "cauchy_tau",
    "cauchy_eps",
    "converge_tau",
    "converge_eps",
    "SERIES_COLUMNS",
]

SERIES_COLUMNS = ("n", "t", "mass", "entropy", "min_theta", "mech_energy", "energy_residual", "mass_residual")
SNAPSHOT_COLUMNS = ("node", "theta", "chi", "u", "w")


@dataclass
class Setup:
    cfg: ExperimentConfig
    grid: tg.Grid
    fam: EpsFamily
    prepared: PreparedData
    params: SchemeParams


def setup(cfg: ExperimentConfig) -> Setup:
    g = build_grid(cfg)
    model = build_model(cfg)
    params = build_params(cfg)
    fam = EpsFamily(model, params.eps)
    data = build_initial(cfg, g)
    prep = prepare(data, fam, params.T, params.N, theta_floor=bool(cfg["initial"].get("theta_floor", False)))
    return Setup(cfg, g, fam, prep, params)


def simulate(cfg: ExperimentConfig, dense: bool = True) -> Trajectory:
    s = setup(cfg)
    return run(s.prepared, s.params, dense=dense)


# ---------------------------------------------------------------------------
# serialisation


def _fmt(x) -> str:
    """Locale-independent decimal text; non-finite values spelled out."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_series(path: Path, series: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for i in range(len(series["n"])):
            w.writerow([_fmt(series[c][i]) for c in SERIES_COLUMNS])


def write_snapshot(path: Path, theta, chi, u, w_field):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SNAPSHOT_COLUMNS)
        for i, vals in enumerate(zip(theta.ravel(), chi.ravel(), u.ravel(), w_field.ravel())):
            wr.writerow([str(i)] + [_fmt(v) for v in vals])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


@dataclass
class RunSummary:
    config: dict
    wall_time: float
    tau: float | None
    tau_star: float | None
    status: str  # "ok", "config_error", "solver_failure"
    error: str | None = None
    levels_completed: int = 0
    final_norms: dict = field(default_factory=dict)
    aggregates: dict = field(default_factory=dict)
    eps_family: dict = field(default_factory=dict)
    theta_floor_applied: bool = False

    def to_dict(self) -> dict:
        d = {
            "config": self.config,
            "wall_time": self.wall_time,
            "tau": self.tau,
            "tau_star": self.tau_star,
            "tau_lt_tau_star": None if self.tau is None else bool(self.tau < self.tau_star),
            "status": self.status,
            "error": self.error,
            "levels_completed": self.levels_completed,
            "final_norms": self.final_norms,
            "aggregates": self.aggregates,
            "eps_family": self.eps_family,
            "theta_floor_applied": self.theta_floor_applied,
        }
        return _jsonable(d)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None, snapshot_stride: int | None = None):
    """Run one configuration and write series.csv, field_NNNN.csv and summary.json.

    Returns ``(summary, trajectory)``; the trajectory is ``None`` if setup
    failed.  The summary is written in every case.
    """
    out = Path(out_dir if out_dir is not None else cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    stride = int(cfg["output"].get("snapshot_stride", 0) if snapshot_stride is None else snapshot_stride)
    t0 = time.perf_counter()
    model = build_model(cfg)
    summary = RunSummary(cfg.to_dict(), 0.0, cfg.tau, model.tau_star, "ok")
    traj = None
    try:
        s = setup(cfg)
        summary.eps_family = s.fam.to_dict()
        summary.theta_floor_applied = s.prepared.theta_floor_applied
        traj = run(s.prepared, s.params, dense=bool(cfg["diagnostics"].get("enabled", True)))
    except Exception as exc:  # any setup failure still yields a summary
        summary.status = "solver_failure"
        summary.error = f"{type(exc).__name__}: {exc}"
    if traj is not None:
        summary.levels_completed = traj.levels if traj.dense else len(traj.monitors)
        if traj.error:
            summary.status = "solver_failure"
            summary.error = f"{traj.error_kind}: {traj.error}"
        g = traj.grid
        summary.final_norms = {
            "theta_L2": tg.norm(g, traj.theta[-1]),
            "chi_L2": tg.norm(g, traj.chi[-1]),
            "u_L2": tg.norm(g, traj.u[-1]),
            "theta_min": float(np.min(traj.theta[-1])),
        }
        if traj.dense and traj.levels >= 2:
            rep = dg.report(traj)
            summary.aggregates = rep["aggregates"]
            if traj.levels >= 3:
                k_max = int(cfg["diagnostics"].get("level_set_k_max", 3))
                summary.aggregates["level_sets"] = dg.level_set_energies(g, traj.w(), traj.tau, k_max)
                summary.aggregates["apriori"] = dg.apriori_ledger(traj)
            write_series(out / "series.csv", rep["series"])
        else:
            mon = traj.monitors
            series = {c: np.full(len(mon), np.nan) for c in SERIES_COLUMNS}
            series["n"] = np.array([m["n"] for m in mon])
            series["t"] = series["n"] * traj.tau
            series["mass"] = np.array([m["mass_w"] for m in mon])
            series["entropy"] = np.array([m["entropy"] for m in mon])
            series["min_theta"] = np.array([m["min_theta"] for m in mon])
            summary.aggregates = {"min_theta": float(np.min(series["min_theta"])), "positivity_holds": bool(np.all(series["min_theta"] >= 0))}
            write_series(out / "series.csv", series)
        if traj.records:
            summary.aggregates["beta_max"] = max(r.beta_max for r in traj.records)
            summary.aggregates["newton_iterations_max"] = max(r.newton_iterations for r in traj.records)
        if stride > 0 and traj.dense:
            w = traj.w()
            for n in range(0, traj.levels, stride):
                write_snapshot(out / f"field_{n:04d}.csv", traj.theta[n], traj.chi[n], traj.u[n], w[n])
    summary.wall_time = time.perf_counter() - t0
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return summary, traj


# ---------------------------------------------------------------------------
# refinement studies


def _sqnorm(g, x):
    return np.sum(g.weights * x * x, axis=tuple(range(1, x.ndim)))


def cauchy_tau(coarse: Trajectory, fine: Trajectory) -> dict:
    """Differences between a coarse run and one with tau halved (or any integer refinement).

    chi, u: sup over t of the L2 distance of the piecewise-linear interpolants
    (exact: evaluated at fine knots, where the difference is piecewise linear);
    theta: L2(Q) distance of the forth-constant interpolants (exact on fine slabs).
    """
    g = coarse.grid
    Nf = fine.params.N
    tf = np.arange(Nf + 1) * fine.tau
    chi_c = Interpolant("piecewise_linear", coarse.chi, coarse.tau)(tf)
    u_c = Interpolant("piecewise_linear", coarse.u, coarse.tau)(tf)
    mids = (np.arange(Nf) + 0.5) * fine.tau
    th_c = Interpolant("forth_constant", coarse.theta, coarse.tau)(mids)
    return {
        "chi_C0L2": float(np.sqrt(np.max(_sqnorm(g, chi_c - fine.chi)))),
        "theta_L2Q": float(np.sqrt(fine.tau * np.sum(_sqnorm(g, th_c - fine.theta[1:])))),
        "u_C0L2": float(np.sqrt(np.max(_sqnorm(g, u_c - fine.u)))),
    }


def cauchy_eps(a: Trajectory, b: Trajectory) -> dict:
    """Differences between two runs on the same time grid (different eps)."""
    g = a.grid
    if a.params.N != b.params.N:
        raise ValueError("eps comparison needs equal N")
    return {
        "theta_L1Q": float(a.tau * np.sum(g.weights * np.abs(a.theta[1:] - b.theta[1:]))),
        "chi_C0L2": float(np.sqrt(np.max(_sqnorm(g, a.chi - b.chi)))),
        "u_C0L2": float(np.sqrt(np.max(_sqnorm(g, a.u - b.u)))),
    }


def _check_run(tr: Trajectory, label: str):
    if tr.error:
        raise RuntimeError(f"{label}: run failed: {tr.error}")


def converge_tau(cfg: ExperimentConfig, levels: int = 4) -> dict:
    """Runs N, 2N, 4N, ...; Cauchy differences, ratios, observed orders, ledgers."""
    if levels < 3:
        raise ValueError("need at least 3 levels")
    N0 = int(cfg["time"]["N"])
    trajs, rows = [], []
    for i in range(levels):
        c = cfg.with_overrides(time={"N": N0 * 2**i})
        tr = simulate(c)
        _check_run(tr, f"N={N0 * 2**i}")
        trajs.append(tr)
        ident = max(
            max(ch.residual for ch in dg.interp_identity_suite(lv, tr.tau, weights=tr.grid.weights))
            for lv in (tr.theta, tr.chi, tr.u)
        )
        em = dg.entropy_mass_positivity(tr)
        rows.append({
            "N": tr.params.N,
            "tau": tr.tau,
            "interp_identity_residual": ident,
            "entropy_max": float(np.max(em["entropy"])),
            "mass_residual_max": float(np.max(em["mass_residual"])),
            "min_theta": float(np.min(em["min_theta"])),
            "ledger": dg.apriori_ledger(tr),
            "level_set_max_grad_energy": max(r["grad_energy"] for r in dg.level_set_energies(
                tr.grid, tr.w(), tr.tau, int(cfg["diagnostics"].get("level_set_k_max", 3)))),
        })
    diffs = [cauchy_tau(a, b) for a, b in zip(trajs, trajs[1:])]
    keys = ("chi_C0L2", "theta_L2Q", "u_C0L2")
    ratios = [{k: (d0[k] / d1[k] if d1[k] > 0 else math.inf) for k in keys} for d0, d1 in zip(diffs, diffs[1:])]
    orders = [{k: (math.log2(r[k]) if 0 < r[k] < math.inf else math.nan) for k in keys} for r in ratios]
    ledger_keys = rows[0]["ledger"].keys()
    spread = {}
    for k in ledger_keys:
        vals = [r["ledger"][k] for r in rows]
        lo, hi = min(vals), max(vals)
        spread[k] = hi / lo if lo > 0 else (1.0 if hi == 0 else math.inf)
    return {"levels": rows, "differences": diffs, "ratios": ratios, "orders": orders, "ledger_spread": spread}


def converge_eps(cfg: ExperimentConfig, eps_levels=None) -> dict:
    """Runs at each eps (fixed N); Cauchy differences and eps-scaled quantities."""
    eps0 = float(cfg["eps"])
    eps_levels = list(eps_levels) if eps_levels is not None else [eps0, eps0 / 2, eps0 / 4]
    if len(eps_levels) < 3:
        raise ValueError("need at least 3 eps levels")
    trajs, rows = [], []
    for e in eps_levels:
        c = cfg.with_overrides(eps=e)
        s = setup(c)
        tr = run(s.prepared, s.params)
        _check_run(tr, f"eps={e}")
        trajs.append(tr)
        g = tr.grid
        dchi = np.diff(tr.chi, axis=0) / tr.tau
        grad_dt = tr.tau * sum(tg.norm(g, d, "H1semi") ** 2 for d in dchi)
        rows.append({
            "eps": e,
            "eps_grad_dt_chi_L2sq": e * grad_dt,
            "sqrt_eps_lap_chi0": math.sqrt(e) * tg.norm(g, tg.laplacian_neumann(g, s.prepared.chi0_eps)),
        })
    diffs = [cauchy_eps(a, b) for a, b in zip(trajs, trajs[1:])]
    col = [r["sqrt_eps_lap_chi0"] for r in rows]
    return {
        "levels": rows,
        "differences": diffs,
        "sqrt_eps_lap_chi0_ratio": max(col) / min(col) if min(col) > 0 else math.inf,
    }
