import dataclasses

import numpy as np
import pytest

from dendi.config import DendiConfig
from dendi.data import Dataset
from dendi.engine import effect_curves, null_loocv, run_dendi, step1, step2
from dendi.forms import LEFT, Linear, MultiplicativeCombo, Tree, build_design
from dendi.loocv import FixedRecipe, loocv_score
from dendi.simulation import ScenarioSpec, generate


def _scenario(s, n, sigma, seed):
    return generate(ScenarioSpec(s, n, sigma, seed))


def _same_report(a, b):
    assert a.forms == b.forms
    assert a.column_keys == b.column_keys
    np.testing.assert_array_equal(a.coefficients, b.coefficients)
    for j in a.curves:
        np.testing.assert_array_equal(a.curves[j], b.curves[j])


def test_single_covariate_run_equals_steps():
    data = _scenario(3, 300, 1.0, 5)
    cfg = DendiConfig()
    report = run_dendi(data, cfg)
    s1 = step1(0, data, cfg)
    assert s1.selected == report.step1[0].selected
    np.testing.assert_array_equal(s1.candidate_loocvs["L"].per_obs,
                                  report.step1[0].candidate_loocvs["L"].per_obs)
    if s1.selected.kind != "N":
        s2 = step2(0, [s1], data, cfg)
        assert report.forms[0] == s2.selected
        assert s2.candidate_loocvs.keys() == report.step2[0].candidate_loocvs.keys()


def test_scenario2_report_has_one_split():
    report = run_dendi(_scenario(2, 800, 1.0, 1))
    f = report.forms[0]
    assert f.kind == "P" and len(f.split_points()) == 1 and abs(f.c) < 0.3
    assert report.column_labels == ("intercept", f"I(x1>{f.c!r})")
    assert "piecewise constant" in report.summary()
    assert report.coefficients.shape == (2,)


def test_linear_beats_null_in_scenario1():
    for seed in range(5):
        data = _scenario(1, 500, 1.0, seed)
        out = step1(0, data)
        assert out.candidate_loocvs["L"].mean > out.reference_loocv.mean


def test_noise_covariate_is_null():
    rng = np.random.default_rng(3)
    data = Dataset(rng.standard_normal(500), rng.standard_normal((500, 1)))
    assert run_dendi(data).forms[0].kind == "N"


def test_determinism_across_runs_and_workers():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((120, 2))
    y = (rng.random(120) < 1 / (1 + np.exp(-(X[:, 0] + (X[:, 1] > 0))))).astype(float)
    data = Dataset(y, X, family="binomial")
    cfg = DendiConfig(grid_size=5)
    a = run_dendi(data, cfg)
    b = run_dendi(data, cfg)
    c = run_dendi(data, dataclasses.replace(cfg, workers=4))
    _same_report(a, b)
    _same_report(a, c)


def test_confounders_enter_every_design():
    rng = np.random.default_rng(4)
    X, Z = rng.standard_normal((150, 2)), rng.standard_normal((150, 1))
    y = X[:, 0] + 2 * Z[:, 0] + rng.standard_normal(150)
    data = Dataset(y, X, Z, confounder_names=("age",))
    report = run_dendi(data)
    assert report.column_labels[-1] == "age"
    assert report.coefficients[-1] == pytest.approx(2.0, abs=0.3)
    bare = Dataset(y, X)
    # the null model with the confounder predicts far better than without it
    assert null_loocv(data).mean > null_loocv(bare).mean + 0.3
    for out in report.step1:
        for name, form in out.candidate_forms.items():
            keys = build_design(form, data).keys
            assert ("z", 0, "age") in keys


def test_step2_fallback_keeps_step1_form():
    for seed in range(10):
        data = _scenario(2, 300, 1.0, seed)
        report = run_dendi(data)
        s1 = report.step1[0].selected
        if s1.kind == "P" and not report.step2[0].gate_passed:
            assert report.forms[0] == s1
            assert report.forms[0].c == s1.c
            return
    pytest.fail("no run fell back to the step-1 form")


def test_step2_reference_uses_adjustment_set():
    data = _scenario(6, 300, 1.0, 2)
    cfg = DendiConfig()
    first = [step1(j, data, cfg) for j in range(data.p)]
    j = 0
    out = step2(j, first, data, cfg)
    adjust = tuple(o.selected for o in first if o.covariate != j and o.selected.kind != "N")
    want = loocv_score(FixedRecipe(first[j].selected, adjust), data, cfg)
    np.testing.assert_array_equal(out.reference_loocv.per_obs, want.per_obs)


def test_interactions_are_unordered_pairs():
    assert Tree(2, 0.0, LEFT, 3, 0.0).interaction() == Tree(3, 0.0, LEFT, 2, 0.0).interaction()
    assert MultiplicativeCombo(0, 1, 0.0).interaction() == (0, 1)
    assert Linear(0).interaction() is None


def test_multivariable_slopes_are_recovered():
    data = _scenario(6, 800, 1.0, 3)
    report = run_dendi(data)
    f = report.forms[0]
    assert f.kind == "M" and f.k == 1
    coef = dict(zip(report.column_keys, report.coefficients))
    low = coef[("lin", 0)]
    high = low + coef[("vary", 0, 1, f.c)]
    assert low == pytest.approx(0.6, abs=0.15)
    assert high == pytest.approx(1.8, abs=0.15)
    assert report.interactions == [(0, 1), (2, 3)]


def test_effect_curves_recompute():
    data = _scenario(6, 300, 1.0, 4)
    report = run_dendi(data)
    again = effect_curves(report.column_keys, report.coefficients, data, report.reference_point)
    for j, table in report.curves.items():
        assert table.shape == (101, 3)
        Xe = np.tile(report.reference_point, (101, 1))
        Xe[:, j] = table[:, 0]
        np.testing.assert_allclose(table[:, 1], report.predict_eta(Xe), atol=1e-10)
        np.testing.assert_allclose(table, again[j], atol=1e-10)


def test_rejects_mismatched_family():
    data = _scenario(1, 100, 1.0, 0)
    with pytest.raises(ValueError):
        run_dendi(data, DendiConfig(family="binomial"))


def test_summary_mentions_every_covariate():
    report = run_dendi(_scenario(6, 300, 1.0, 0))
    text = report.summary()
    for name in report.names:
        assert name + ":" in text


def test_step1_selected_modifier_policy():
    data = _scenario(6, 300, 1.0, 6)
    cfg = DendiConfig(candidate_modifiers="step1-selected")
    report = run_dendi(data, cfg)
    chosen = {o.covariate for o in report.step1 if o.selected.kind != "N"}
    for j, out in report.step2.items():
        for form in out.candidate_forms.values():
            assert set(form.variables()) <= chosen | {j}
