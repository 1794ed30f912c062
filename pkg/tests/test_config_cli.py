from __future__ import annotations

import csv
import json
import re

import numpy as np
import pytest

from thermoshape import cli, config, verify
from thermoshape import regularization as rg
from thermoshape.experiments import SERIES_COLUMNS, converge_tau, run_experiment


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=1))
    return str(p)


def test_default_preset_values():
    cfg = config.parse_config({"preset": "default"})
    assert cfg.tau == pytest.approx(0.005)
    model = config.build_model(cfg)
    assert model.tau_star == pytest.approx(1.0)
    g = config.build_grid(cfg)
    data = config.build_initial(cfg, g)
    x = g.coords()[0]
    assert np.allclose(data.theta0, 1 + 0.2 * np.cos(np.pi * x))
    assert np.allclose(data.chi0, 0.5 * np.cos(np.pi * x))


def test_round_trip():
    for preset in config.PRESETS:
        cfg = config.parse_config({"preset": preset})
        again = config.parse_config(json.loads(cfg.to_json()))
        assert again.to_dict() == cfg.to_dict()


def test_missing_key_named():
    with pytest.raises(config.ConfigError, match="'eps'"):
        config.parse_config({"grid": {"dim": 1, "extents": [1.0], "nodes": [5]}, "time": {"T": 1.0, "N": 2}})


@pytest.mark.parametrize(
    "override, key",
    [
        ({"eps": 1.5}, "eps"),
        ({"grid": {"dim": 3}}, "grid.dim"),
        ({"time": {"N": 1}}, "time.N"),
        ({"model": {"F2": {"kind": "quadratic", "k": 300.0}}}, "time.N"),
    ],
)
def test_validation_errors(override, key):
    with pytest.raises(config.ConfigError, match=key.replace(".", r"\.")):
        config.parse_config({"preset": "default", **override})


def test_line_numbers_in_messages(tmp_path):
    text = '{\n  "preset": "default",\n  "eps": 2.0\n}'
    with pytest.raises(config.ConfigError, match="line 3"):
        config.load_config(write(tmp_path, text))
    with pytest.raises(config.ConfigError, match="line 2"):
        config.load_config(write(tmp_path, '{"preset":\n  }', "bad.json"))


def test_field_specs_and_csv(tmp_path):
    g = config.build_grid(config.parse_config({"preset": "default", "grid": {"nodes": [5]}}))
    np.savetxt(tmp_path / "th.csv", np.linspace(1, 2, 5), delimiter=",")
    f = config.field_from_spec(g, {"kind": "csv", "path": "th.csv"}, base_dir=tmp_path)
    assert np.allclose(f, np.linspace(1, 2, 5))
    assert np.allclose(config.field_from_spec(g, 2.5), 2.5)
    with pytest.raises(config.ConfigError):
        config.field_from_spec(g, {"kind": "nope"})


def test_run_experiment_outputs(tmp_path):
    cfg = config.parse_config({"preset": "default", "grid": {"nodes": [17]}, "time": {"N": 10}})
    summary, traj = run_experiment(cfg, tmp_path, snapshot_stride=5)
    assert summary.status == "ok" and traj.complete
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["field_0000.csv", "field_0005.csv", "field_0010.csv", "series.csv", "summary.json"]
    rows = list(csv.reader(open(tmp_path / "series.csv")))
    assert tuple(rows[0]) == SERIES_COLUMNS and len(rows) == 12
    number = re.compile(r"^(-?\d+(\.\d+)?(e[+-]\d+)?|nan|-?inf)$")
    assert all(number.match(v) for row in rows[1:] for v in row)
    snap = list(csv.reader(open(tmp_path / "field_0005.csv")))
    assert snap[0] == ["node", "theta", "chi", "u", "w"] and len(snap) == 18


def test_converge_tau_decoupled_constant_is_zero():
    cfg = config.parse_config({
        "preset": "default",
        "grid": {"nodes": [9]},
        "time": {"N": 4},
        "model": {"G": {"kind": "zero"}, "F1": {"kind": "zero"}, "F2": {"kind": "quadratic", "k": 0.0}},
        "initial": {"theta0": 1.0, "chi0": 0.0},
        "forcing": {"R": 0.0},
    })
    table = converge_tau(cfg, levels=3)
    for d in table["differences"]:
        assert max(d.values()) <= 1e-13


# ---------------------------------------------------------------------------
# command line


def test_cli_minimal_run(tmp_path, capsys):
    cfg = write(tmp_path, {"preset": "default", "grid": {"nodes": [5]}, "time": {"N": 2}})
    out = tmp_path / "out"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "series.csv")))
    assert len(rows) == 4  # header + levels 0, 1, 2


def test_cli_default_summary(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--out", str(out), "--snapshots", "100"]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["tau"] == pytest.approx(0.005) and s["tau_star"] == pytest.approx(1.0)
    assert s["tau_lt_tau_star"] is True and s["status"] == "ok"
    assert (out / "field_0200.csv").exists()


def test_cli_config_error(tmp_path, capsys):
    cfg = write(tmp_path, {"grid": {"dim": 1, "extents": [1.0], "nodes": [5]}})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "time.T" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 1


def test_cli_solver_failure_still_writes_summary(tmp_path):
    cfg = write(tmp_path, {"preset": "default", "time": {"N": 20}, "solver": {"max_newton": 2, "newton_tol": 1e-30}})
    out = tmp_path / "out"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 2
    s = json.loads((out / "summary.json").read_text())
    assert s["status"] == "solver_failure" and s["error"]


def test_cli_converge_commands(tmp_path):
    cfg = write(tmp_path, {"preset": "default", "grid": {"nodes": [17]}, "time": {"N": 20}})
    out = tmp_path / "tau"
    assert cli.main(["converge-tau", "--config", cfg, "--out", str(out), "--levels", "3"]) == 0
    table = json.loads((out / "converge_tau.json").read_text())
    assert len(table["differences"]) == 2
    assert (out / "converge_tau.csv").read_text().startswith("N_coarse,")
    out = tmp_path / "eps"
    code = cli.main(["converge-eps", "--config", cfg, "--out", str(out), "--levels", "3"])
    assert code in (0, 3)
    assert len(json.loads((out / "converge_eps.json").read_text())["levels"]) == 3


def test_cli_verify_passes_and_is_seed_stable(capsys):
    assert cli.main(["verify", "--seed", "11"]) == 0
    first = capsys.readouterr().out
    assert cli.main(["verify", "--seed", "11"]) == 0
    assert capsys.readouterr().out == first
    assert "suites passed" in first


def test_verify_mutation_detected(monkeypatch):
    real = rg.lambda_eps
    monkeypatch.setattr(rg, "lambda_eps", lambda eps: 1.01 * real(eps))
    result = verify.suite_kernel_mass(np.random.default_rng(0))
    assert not result.passed


def test_verify_reports_are_identical_per_seed():
    a = [(r.name, r.passed, json.dumps(r.details, default=str)) for r in verify.run_all(5)]
    b = [(r.name, r.passed, json.dumps(r.details, default=str)) for r in verify.run_all(5)]
    assert a == b
