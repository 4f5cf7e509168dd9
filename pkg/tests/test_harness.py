import json

import numpy as np
import pytest
from scipy import stats

from ellipsym import harness as H
from ellipsym.rng import stream_rng


# ---------------------------------------------------------------------------
# KS machinery
# ---------------------------------------------------------------------------


def test_ks_self_consistency_uniform_p():
    rng = stream_rng(0, 0)
    x = rng.chisquare(3, 10_000)
    stat, p = H.ks_test(x, stats.chi2(3).cdf)
    assert stat < H.ks_critical(0.01, 10_000)
    assert 0.01 < p <= 1.0


def test_ks_constant_samples_statistic():
    c = 1.3
    x = np.full(100, c)
    stat, _ = H.ks_test(x, stats.chi2(3).cdf)
    f = stats.chi2(3).cdf(c)
    assert abs(stat - max(f, 1 - f)) < 1e-12


def test_ks_separates_wrong_df():
    rng = stream_rng(1, 0)
    x = rng.chisquare(2, 10_000)
    _, p = H.ks_test(x, stats.chi2(3).cdf)
    assert p < 0.001


def test_ks_needs_enough_samples():
    with pytest.raises(ValueError):
        H.ks_test(np.arange(5.0), stats.chi2(3).cdf)


def test_ks_matches_scipy():
    rng = stream_rng(2, 0)
    x = rng.standard_normal(500)
    stat, p = H.ks_test(x, stats.norm.cdf)
    ref = stats.kstest(x, stats.norm.cdf, mode="asymp")
    assert abs(stat - ref.statistic) < 1e-12
    assert abs(p - ref.pvalue) < 1e-6


def test_empirical_cov_needs_replicates():
    spec = H._plan_spec(H.get_plan("gaussian-q-chisq"))
    with pytest.raises(ValueError):
        H.empirical_cov_of_vec_estimates(spec, lambda d: np.eye(2), 100, 10, seed=0)


def test_max_rel_entry_error_floor():
    f = np.array([[2.0, 0.0], [0.0, 2.0]])
    e = np.array([[2.0, 0.1], [0.1, 2.0]])
    assert np.isclose(H.max_rel_entry_error(e, f), 0.05)


def test_empirical_kurtosis_gaussian():
    rng = stream_rng(3, 0)
    x = rng.standard_normal(200_000)
    k, se = H.empirical_kurtosis(x)
    assert abs(k) < 5 * se


# ---------------------------------------------------------------------------
# plans
# ---------------------------------------------------------------------------


def test_list_plans_contains_builtins():
    names = H.list_plans()
    for expected in (
        "gaussian-q-chisq",
        "student-q-f",
        "gg-q-gamma",
        "kurtosis-closed-forms",
        "tyler-fixed-point",
        "ml-gaussian-closed-form",
        "scm-asymcov",
        "ml-asymcov",
        "tyler-asymcov",
        "slepian-bangs",
        "structural-invariants",
    ):
        assert expected in names


def test_unknown_plan_raises():
    with pytest.raises(KeyError):
        H.get_plan("nope")


def test_empty_check_list_reports_success():
    plan = H.ExperimentPlan(name="empty", description="no checks", checks=())
    assert H.run_plan(plan) == []


def test_run_plan_writes_deterministic_csv(tmp_path):
    plan = H.get_plan("ml-gaussian-closed-form")
    d1 = tmp_path / "a"
    d2 = tmp_path / "b"
    H.run_plan(plan, out_dir=d1)
    H.run_plan(plan, out_dir=d2)
    csv1 = (d1 / "ml-gaussian-closed-form.csv").read_bytes()
    csv2 = (d2 / "ml-gaussian-closed-form.csv").read_bytes()
    assert csv1 == csv2
    text = (d1 / "ml-gaussian-closed-form.txt").read_text()
    assert "PASS" in text


def test_load_plan_json_roundtrip(tmp_path):
    raw = {
        "name": "custom-qlaw",
        "description": "user plan",
        "family": "student(nu=4)",
        "m": 2,
        "seed": 1234,
        "replicates": 1,
        "n_grid": [5000],
        "checks": [
            {"check": "qlaw-ks", "tolerance": 0.01, "params": {"n": 5000}},
            {"check": "scale-ambiguity-pdf", "tolerance": 1e-12},
        ],
    }
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(raw))
    plan = H.load_plan_json(path)
    assert plan.name == "custom-qlaw" and plan.seed == 1234
    reports = H.run_plan(plan)
    assert len(reports) == 2
    assert all(r.passed for r in reports)


def test_plan_rejects_unknown_check():
    with pytest.raises(ValueError):
        H.ExperimentPlan(
            name="bad", description="", checks=(H.CheckSpec("not-a-check"),)
        )


def test_runtime_budgets_declared():
    for name in H.list_plans():
        assert H.get_plan(name).runtime_budget_s <= 600.0
