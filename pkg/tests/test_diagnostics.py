from __future__ import annotations

import numpy as np
import pytest

from thermoshape import diagnostics as dg
from thermoshape import grid as tg
from thermoshape import regularization as rg
from thermoshape.data_prep import InitialData, prepare
from thermoshape.functions import ZeroG
from thermoshape.stepper import SchemeParams, run
from thermoshape.verify import decoupled_wave


@pytest.fixture(scope="module")
def default_traj():
    g = tg.Grid.uniform(33)
    x = g.coords()[0]
    fam = rg.EpsFamily(rg.ModelFunctions(), 0.1)
    data = InitialData(g, 1 + 0.2 * np.cos(np.pi * x), 0.5 * np.cos(np.pi * x), 0.0, 0.0, R_Omega=0.1)
    return run(prepare(data, fam, 1.0, 40), SchemeParams(1.0, 40, 0.1))


def test_identity_suite_random_levels():
    rng = np.random.default_rng(7)
    for _ in range(20):
        z = rng.normal(size=(int(rng.integers(3, 10)), 4))
        checks = dg.interp_identity_suite(z, float(rng.uniform(0.1, 1.0)), weights=rng.uniform(0.5, 1.5, 4))
        assert all(c.passed for c in checks), [c.to_dict() for c in checks if not c.passed]


def test_identity_suite_scalar_example():
    checks = {c.name: c for c in dg.interp_identity_suite(np.array([0.0, 1.0, 2.0]), 1.0)}
    assert checks["l2_bar_minus_hat"].lhs == pytest.approx(2 / 3, abs=1e-14)
    assert checks["l2_bar_minus_hat"].rhs == pytest.approx(2 / 3, abs=1e-14)
    assert {"l2_dt_tilde_minus_dt_hat", "dt_hat_is_under_of_dz", "dt_tilde_is_hat_of_dz", "ghost_dz", "ghost_d2z"} <= set(checks)


def test_identity_check_detects_mismatch():
    bad = dg.IdentityCheck("x", 1.0, 1.1, "==")
    assert not bad.passed
    assert dg.IdentityCheck("y", 1.0, 1.1, "<=").passed
    assert not dg.IdentityCheck("z", 1.2, 1.1, "<=").passed


def test_energy_audit_decoupled_wave():
    tr = decoupled_wave(N=100)
    ea = dg.energy_audit(tr)
    assert ea.max_residual <= 1e-10
    assert ea.energy_nonincreasing


def test_energy_audit_coupled(default_traj):
    ea = dg.energy_audit(default_traj)
    assert ea.max_residual <= 1e-10


def test_mass_entropy_positivity(default_traj):
    em = dg.entropy_mass_positivity(default_traj)
    assert np.max(em["mass_residual"]) <= 1e-9
    assert em["positive"] and em["first_negative_level"] is None
    assert np.all(np.isfinite(em["entropy"]))
    assert np.max(np.abs(em["w_budget_drift"])) <= 0.05


def test_truncation():
    r = np.array([-1.0, 0.5, 1.0, 1.5, 3.0])
    assert np.allclose(dg.truncation(r, 1.0), [0, 0, 0, 0.125, 1.5])


def test_level_sets_constant_field():
    g = tg.Grid.uniform(9)
    w = np.full((3, 9), 1.5)
    table = dg.level_set_energies(g, w, 0.5, 2)
    assert [row["measure"] for row in table] == pytest.approx([0.0, 1.0, 0.0])
    assert all(row["grad_energy"] == 0.0 for row in table)
    assert all(row["truncation_change"] == 0.0 for row in table)


def test_ledger_recursion_taylor(default_traj):
    led = dg.apriori_ledger(default_traj)
    assert all(np.isfinite(v) and v >= 0 for v in led.values())
    assert dg.recursion_check(default_traj)["holds"]
    assert dg.taylor_checks(default_traj)["holds"]


def test_report_shape(default_traj):
    rep = dg.report(default_traj)
    assert set(rep["series"]) == {"n", "t", "mass", "entropy", "min_theta", "mech_energy", "energy_residual", "mass_residual"}
    assert all(len(v) == default_traj.levels for v in rep["series"].values())
    assert rep["aggregates"]["positivity_holds"]


def test_negative_temperature_is_reported():
    g = tg.Grid.uniform(33)
    model = rg.ModelFunctions(G=ZeroG())
    fam = rg.EpsFamily(model, 0.1)
    data = InitialData(g, g.full(1.0), 0.0, 0.0, 0.0)
    tr = run(prepare(data, fam, 1.0, 4), SchemeParams(1.0, 4, 0.1))
    tr.theta[2, 5] = -0.3  # injected defect: the monitor must surface it
    em = dg.entropy_mass_positivity(tr)
    assert not em["positive"] and em["first_negative_level"] == 2
