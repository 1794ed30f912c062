"""Command line entry point: ``thermoshape {run,converge-tau,converge-eps,verify}``.

Exit codes: 0 success, 1 config error, 2 solver failure, 3 property failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import verify
from .config import ConfigError, load_config, parse_config
from .experiments import _jsonable, converge_eps, converge_tau, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PROPERTY = 0, 1, 2, 3


def _config(args):
    if args.config is None:
        return parse_config({"preset": "default"})
    return load_config(args.config)


def _out(args, cfg) -> Path:
    out = Path(args.out if args.out is not None else cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_table(path: Path, rows: list[dict]):
    keys = list(rows[0]) if rows else []
    lines = [",".join(keys)] + [",".join(repr(float(r[k])) for k in keys) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def _strictly_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


def cmd_run(args) -> int:
    cfg = _config(args)
    summary, _ = run_experiment(cfg, _out(args, cfg), args.snapshots)
    print(f"status={summary.status} levels={summary.levels_completed} tau={summary.tau:g} tau_star={summary.tau_star:g}")
    if summary.status != "ok":
        print(summary.error, file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_converge_tau(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    table = converge_tau(cfg, args.levels if args.levels is not None else 4)
    (out / "converge_tau.json").write_text(json.dumps(_jsonable(table), indent=2, sort_keys=True))
    _write_table(out / "converge_tau.csv", [
        {"N_coarse": lv["N"], **d} for lv, d in zip(table["levels"], table["differences"])
    ])
    for lv, d in zip(table["levels"], table["differences"]):
        print(f"N={lv['N']:>6d}  chi={d['chi_C0L2']:.4e}  theta={d['theta_L2Q']:.4e}  u={d['u_C0L2']:.4e}")
    ok = all(lv["interp_identity_residual"] <= 1e-12 for lv in table["levels"])
    for k in ("chi_C0L2", "theta_L2Q"):
        ok &= _strictly_decreasing([d[k] for d in table["differences"]])
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_converge_eps(args) -> int:
    cfg = _config(args)
    out = _out(args, cfg)
    k = args.levels if args.levels is not None else 3
    eps0 = float(cfg["eps"])
    table = converge_eps(cfg, [eps0 / 2**i for i in range(k)])
    (out / "converge_eps.json").write_text(json.dumps(_jsonable(table), indent=2, sort_keys=True))
    _write_table(out / "converge_eps.csv", [
        {"eps_coarse": lv["eps"], **d} for lv, d in zip(table["levels"], table["differences"])
    ])
    for lv in table["levels"]:
        print(f"eps={lv['eps']:<8g} eps*|grad dt chi|^2={lv['eps_grad_dt_chi_L2sq']:.4e}  sqrt(eps)|lap chi0|={lv['sqrt_eps_lap_chi0']:.4e}")
    for lv, d in zip(table["levels"], table["differences"]):
        print(f"eps={lv['eps']:<8g} theta={d['theta_L1Q']:.4e}  chi={d['chi_C0L2']:.4e}  u={d['u_C0L2']:.4e}")
    ok = _strictly_decreasing([d["chi_C0L2"] for d in table["differences"]])
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_verify(args) -> int:
    results = verify.run_all(args.seed)
    print(verify.format_report(results))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rep = {r.name: {"passed": r.passed, "details": r.details} for r in results}
        (out / "verify.json").write_text(json.dumps(_jsonable(rep), indent=2, sort_keys=True))
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermoshape", description="Regularized thermo-mechanical phase-transition solver.")
    sub = p.add_subparsers(dest="command", required=True)
    specs = [
        ("run", cmd_run, "single run: series.csv, field_NNNN.csv, summary.json"),
        ("converge-tau", cmd_converge_tau, "Cauchy differences over N, 2N, 4N, ..."),
        ("converge-eps", cmd_converge_eps, "Cauchy differences over eps, eps/2, eps/4, ..."),
        ("verify", cmd_verify, "property suites with a per-suite verdict"),
    ]
    for name, fn, help_ in specs:
        s = sub.add_parser(name, help=help_)
        s.set_defaults(func=fn)
        s.add_argument("--out", metavar="DIR")
        if name == "verify":
            s.add_argument("--seed", type=int, default=0, metavar="S")
            continue
        s.add_argument("--config", metavar="PATH", help="JSON config (default preset if omitted)")
        if name == "run":
            s.add_argument("--snapshots", type=int, default=None, metavar="STRIDE")
        else:
            s.add_argument("--levels", type=int, default=None, metavar="K")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:  # a failed level inside a refinement study
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
