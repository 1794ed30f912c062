"""Experiment configuration: JSON parsing, presets, validation and builders.

A config is a JSON object.  ``{"preset": "default"}`` expands to the default
experiment; any other keys override the preset recursively.  Without a preset
every required key must be present.  :func:`parse_config` returns an
:class:`ExperimentConfig` whose :meth:`~ExperimentConfig.to_dict` output parses
back to an equal object.

Field specs (initial data and loads) are either a number or an object with
``kind`` in ``constant, cosine, sine, gaussian, csv``:

* cosine / sine: ``offset + amplitude * prod_a f(mode_a pi x_a / L_a)``
* gaussian: ``offset + amplitude * exp(-|x - center|^2 / (2 width^2))``
* csv: one value per node, row-major, from ``path`` (relative to the config file)

Loads may carry ``"time": [c0, c1, ...]``, multiplying the field by
``c0 + c1 t + ...``.  The boundary load ``b_Gamma`` uses only the boundary
values of its field (in 1D it may also be a pair ``[left, right]``).
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data_prep import InitialData
from .functions import (
    ExpAlpha,
    IndicatorF1,
    QuadraticF2,
    RationalG,
    TabulatedAlpha,
    TabulatedG,
    ZeroF1,
    ZeroG,
)
from .grid import Grid
from .regularization import ModelFunctions
from .stepper import SchemeParams

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "parse_config",
    "load_config",
    "build_grid",
    "build_model",
    "build_initial",
    "build_params",
    "field_from_spec",
]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


DEFAULT = {
    "grid": {"dim": 1, "extents": [1.0], "nodes": [65]},
    "time": {"T": 1.0, "N": 200},
    "eps": 0.1,
    "model": {
        "c0": 1.0,
        "kappa": 1.0,
        "theta_c": 1.0,
        "e": [1.0],
        "lambda0": 0.9,
        "alpha": {"kind": "exp", "A": 0.5},
        "G": {"kind": "rational"},
        "F1": {"kind": "indicator"},
        "F2": {"kind": "quadratic", "k": 1.0},
    },
    "initial": {
        "theta0": {"kind": "cosine", "offset": 1.0, "amplitude": 0.2, "mode": [1]},
        "chi0": {"kind": "cosine", "offset": 0.0, "amplitude": 0.5, "mode": [1]},
        "u0": 0.0,
        "u0_prime": 0.0,
        "theta_floor": False,
    },
    "forcing": {"R": 0.1, "B_Omega": 0.0, "b_Gamma": 0.0},
    "solver": {"newton_tol": 1e-11, "linear_tol": 1e-12, "max_newton": 50},
    "diagnostics": {"enabled": True, "level_set_k_max": 3},
    "output": {"dir": "out", "snapshot_stride": 0},
    "seed": 0,
}

# latent-heat coupling strong enough that one coarse step overshoots the
# temperature below zero; used to show the positivity monitor reporting it
HOSTILE = {
    "grid": {"dim": 1, "extents": [1.0], "nodes": [33]},
    "time": {"T": 1.0, "N": 4},
    "eps": 0.01,
    "model": {"alpha": {"kind": "exp", "A": 32.0}, "F2": {"kind": "quadratic", "k": 0.1}},
    "initial": {"theta0": 0.5, "chi0": 0.95},
    "forcing": {"R": 0.0},
}

PRESETS = {"default": DEFAULT, "hostile": HOSTILE}

_REQUIRED = [
    "grid.dim", "grid.extents", "grid.nodes",
    "time.T", "time.N",
    "eps",
    "model.c0", "model.kappa", "model.theta_c", "model.e", "model.alpha", "model.G", "model.F1", "model.F2",
    "initial.theta0", "initial.chi0", "initial.u0", "initial.u0_prime",
    "forcing.R", "forcing.B_Omega", "forcing.b_Gamma",
]

_OPTIONAL_DEFAULTS = {
    "model.lambda0": None,  # resolved to 0.9 c0
    "initial.theta_floor": False,
    "solver": DEFAULT["solver"],
    "diagnostics": DEFAULT["diagnostics"],
    "output": DEFAULT["output"],
    "seed": 0,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and "kind" not in v:
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _get(d: dict, path: str):
    cur = d
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise KeyError(path)
        cur = cur[part]
    return cur


def _set_default(d: dict, path: str, value):
    parts = path.split(".")
    cur = d
    for part in parts[:-1]:
        cur = cur.setdefault(part, {})
    if parts[-1] not in cur:
        cur[parts[-1]] = copy.deepcopy(value)
    elif isinstance(value, dict) and isinstance(cur[parts[-1]], dict):
        cur[parts[-1]] = _merge(value, cur[parts[-1]])


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if not m:
        return ""
    return f" (line {text.count(chr(10), 0, m.start()) + 1})"


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (plain JSON-compatible data)."""

    data: dict = field(compare=True)
    base_dir: str = field(default=".", compare=False)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def tau(self) -> float:
        return self.data["time"]["T"] / self.data["time"]["N"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def with_overrides(self, **over) -> "ExperimentConfig":
        """Recursive override, re-validated (e.g. ``time={"N": 400}``)."""
        return parse_config(_merge(self.data, over), base_dir=self.base_dir)


def _validate(d: dict, text: str | None):
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}{_line_of(text, key.split('.')[-1])}")

    g = d["grid"]
    if g["dim"] not in (1, 2):
        bad("grid.dim", f"must be 1 or 2, got {g['dim']}")
    for k in ("extents", "nodes"):
        if not isinstance(g[k], list) or len(g[k]) != g["dim"]:
            bad(f"grid.{k}", f"needs {g['dim']} entries")
    if any(int(n) != n or n < 3 for n in g["nodes"]):
        bad("grid.nodes", "entries must be integers >= 3")
    if any(not (x > 0) for x in g["extents"]):
        bad("grid.extents", "entries must be positive")
    t = d["time"]
    if not t["T"] > 0:
        bad("time.T", "must be positive")
    if int(t["N"]) != t["N"] or t["N"] < 2:
        bad("time.N", "must be an integer >= 2")
    if t["T"] / t["N"] > 1:
        bad("time.N", "tau = T/N must not exceed 1")
    if not 0 < d["eps"] < 1:
        bad("eps", f"must lie in (0, 1), got {d['eps']}")
    m = d["model"]
    if len(m["e"]) != g["dim"]:
        bad("model.e", f"needs {g['dim']} entries")
    try:
        model = build_model(ExperimentConfig(d))
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"model: {exc}") from None
    if not t["T"] / t["N"] < model.tau_star:
        bad("time.N", f"tau = {t['T'] / t['N']:.6g} must be below tau_star = {model.tau_star:.6g}")


def parse_config(obj, base_dir: str | Path = ".", text: str | None = None) -> ExperimentConfig:
    """Resolve presets and defaults, check required keys and validate."""
    if isinstance(obj, ExperimentConfig):
        obj = obj.to_dict()
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    d = copy.deepcopy(obj)
    preset = d.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}{_line_of(text, 'preset')}")
        base = DEFAULT if preset == "default" else _merge(DEFAULT, PRESETS[preset])
        d = _merge(base, d)
    for key in _REQUIRED:
        try:
            _get(d, key)
        except KeyError:
            raise ConfigError(f"missing required key '{key}'") from None
    for key, val in _OPTIONAL_DEFAULTS.items():
        _set_default(d, key, val)
    if d["model"].get("lambda0") is None:
        d["model"]["lambda0"] = 0.9 * float(d["model"]["c0"])
    d = json.loads(json.dumps(d))  # normalise to plain JSON types
    _validate(d, text)
    return ExperimentConfig(d, str(base_dir))


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(obj, base_dir=path.parent, text=text)


# ---------------------------------------------------------------------------
# builders


def build_grid(cfg: ExperimentConfig) -> Grid:
    g = cfg["grid"]
    return Grid(int(g["dim"]), tuple(g["extents"]), tuple(int(n) for n in g["nodes"]))


def _function(spec: dict, role: str):
    kind = spec.get("kind")
    if role == "alpha":
        if kind == "exp":
            return ExpAlpha(float(spec.get("A", 0.5)))
        if kind == "tabulated":
            return TabulatedAlpha(float(spec["r_max"]), tuple(spec["samples"]))
    elif role == "G":
        if kind == "rational":
            return RationalG()
        if kind == "zero":
            return ZeroG()
        if kind == "tabulated":
            return TabulatedG(float(spec["s_max"]), tuple(spec["samples"]))
    elif role == "F1":
        if kind == "indicator":
            return IndicatorF1()
        if kind == "zero":
            return ZeroF1()
    elif role == "F2":
        if kind == "quadratic":
            return QuadraticF2(float(spec.get("k", 1.0)))
    raise ValueError(f"unknown {role} kind {kind!r}")


def build_model(cfg: ExperimentConfig) -> ModelFunctions:
    m = cfg["model"]
    return ModelFunctions(
        c0=float(m["c0"]),
        kappa=float(m["kappa"]),
        theta_c=float(m["theta_c"]),
        e=tuple(float(x) for x in m["e"]),
        alpha=_function(m["alpha"], "alpha"),
        G=_function(m["G"], "G"),
        F1=_function(m["F1"], "F1"),
        F2=_function(m["F2"], "F2"),
        lambda0=float(m["lambda0"]),
    )


def field_from_spec(g: Grid, spec, base_dir: str | Path = ".", name: str = "field") -> np.ndarray:
    if isinstance(spec, (int, float)):
        return g.full(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{name}: expected a number or an object with 'kind'")
    kind = spec["kind"]
    X = g.coords()
    if kind == "constant":
        return g.full(float(spec["value"]))
    if kind in ("cosine", "sine"):
        f = np.cos if kind == "cosine" else np.sin
        mode = spec.get("mode", [1] * g.dim)
        if len(mode) != g.dim:
            raise ConfigError(f"{name}.mode: needs {g.dim} entries")
        prod = np.ones(g.shape)
        for a in range(g.dim):
            prod = prod * f(mode[a] * math.pi * X[a] / g.extents[a])
        return float(spec.get("offset", 0.0)) + float(spec.get("amplitude", 1.0)) * prod
    if kind == "gaussian":
        center = spec.get("center", [L / 2 for L in g.extents])
        r2 = sum((X[a] - center[a]) ** 2 for a in range(g.dim))
        width = float(spec.get("width", 0.1))
        return float(spec.get("offset", 0.0)) + float(spec.get("amplitude", 1.0)) * np.exp(-r2 / (2 * width**2))
    if kind == "csv":
        path = Path(base_dir) / spec["path"]
        try:
            vals = np.loadtxt(path, delimiter=",", ndmin=1).ravel()
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{name}: cannot read {path}: {exc}") from None
        if vals.size != g.size:
            raise ConfigError(f"{name}: {path} has {vals.size} values, grid has {g.size} nodes")
        return vals.reshape(g.shape)
    raise ConfigError(f"{name}: unknown field kind {kind!r}")


def _load(g: Grid, spec, base_dir, name):
    """A time-dependent load: field times an optional polynomial in t."""
    if isinstance(spec, list) and g.dim == 1 and len(spec) == 2 and name == "b_Gamma":
        arr = np.zeros(g.shape)
        arr[0], arr[-1] = float(spec[0]), float(spec[1])
        base, coeffs = arr, [1.0]
    else:
        base = field_from_spec(g, spec, base_dir, name)
        coeffs = spec.get("time", [1.0]) if isinstance(spec, dict) else [1.0]
    coeffs = [float(c) for c in coeffs]
    if coeffs == [1.0]:
        return base
    return lambda t, _b=base, _c=coeffs: _b * sum(c * t**i for i, c in enumerate(_c))


def build_initial(cfg: ExperimentConfig, g: Grid) -> InitialData:
    ini, frc = cfg["initial"], cfg["forcing"]
    bd = cfg.base_dir
    fields = {k: field_from_spec(g, ini[k], bd, f"initial.{k}") for k in ("theta0", "chi0", "u0", "u0_prime")}
    try:
        return InitialData(
            g,
            **fields,
            R_Omega=_load(g, frc["R"], bd, "R"),
            B_Omega=_load(g, frc["B_Omega"], bd, "B_Omega"),
            b_Gamma=_load(g, frc["b_Gamma"], bd, "b_Gamma"),
        )
    except ValueError as exc:
        raise ConfigError(f"initial: {exc}") from None


def build_params(cfg: ExperimentConfig) -> SchemeParams:
    s = cfg["solver"]
    return SchemeParams(
        T=float(cfg["time"]["T"]),
        N=int(cfg["time"]["N"]),
        eps=float(cfg["eps"]),
        newton_tol=float(s["newton_tol"]),
        linear_tol=float(s["linear_tol"]),
        max_newton=int(s["max_newton"]),
    )
