import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dendi.config import DendiConfig
from dendi.data import Dataset
from dendi.exceptions import TooManyFailedFolds
from dendi.forms import AdditiveCombo, Linear, Null, PiecewiseConstant, build_design
from dendi.loocv import (FixedRecipe, LoocvResult, ModifierRecipe, SecondSplitRecipe,
                         SplitRecipe, loocv_score, one_se_gate)

from oracles import gaussian_loo_loglik


def test_three_point_null_by_hand():
    y = np.array([1.0, 2.0, 3.0])
    res = loocv_score(FixedRecipe(Null()), Dataset(y, np.zeros((3, 1)) + [[0], [1], [2]]))
    # fold without y_i: mean m, MLE variance s2 of the two remaining values
    want = []
    for i in range(3):
        rest = np.delete(y, i)
        m, s2 = rest.mean(), rest.var()
        want.append(-0.5 * np.log(2 * np.pi * s2) - (y[i] - m) ** 2 / (2 * s2))
    np.testing.assert_allclose(res.per_obs, want, rtol=1e-12)
    assert res.mean == pytest.approx(np.mean(want))
    assert res.se == pytest.approx(np.std(want, ddof=1) / np.sqrt(3))


@pytest.mark.parametrize("seed", range(20))
def test_fixed_form_matches_explicit_refits(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(40)
    y = x + rng.standard_normal(40)
    data = Dataset(y, x[:, None])
    for form in (Null(), Linear(0), AdditiveCombo(0, 0.0)):
        D = build_design(form, data).values
        got = loocv_score(FixedRecipe(form), data).per_obs
        np.testing.assert_allclose(got, gaussian_loo_loglik(D, y), rtol=1e-9)


def _recipes(p):
    return [
        FixedRecipe(Linear(0)),
        SplitRecipe(PiecewiseConstant(0), (), 5, 3),
        SplitRecipe(AdditiveCombo(0), (Linear(1),), 5, 3),
        ModifierRecipe(0, tuple(range(p)), (), 5, 3),
        SecondSplitRecipe(PiecewiseConstant(0, 0.0), tuple(range(p)), (Linear(1),), 5, 3),
    ]


@pytest.mark.parametrize("seed", range(30))
def test_fast_and_naive_routes_agree(seed):
    rng = np.random.default_rng(seed)
    n = 30
    X = np.round(rng.standard_normal((n, 2)), 1)
    y = X[:, 0] + (X[:, 1] > 0) * X[:, 0] + rng.standard_normal(n)
    data = Dataset(y, X)
    for recipe in _recipes(2):
        fast = loocv_score(recipe, data, method="fast")
        naive = loocv_score(recipe, data, method="naive")
        np.testing.assert_allclose(fast.per_obs, naive.per_obs, rtol=0, atol=1e-10)
        assert fast.n_failed_folds == naive.n_failed_folds


def test_duplicate_rows_agree():
    rng = np.random.default_rng(0)
    x = np.repeat(rng.standard_normal(15), 2)
    y = np.repeat(rng.standard_normal(15), 2)
    data = Dataset(y, x[:, None])
    recipe = SplitRecipe(PiecewiseConstant(0), (), 5, 4)
    np.testing.assert_allclose(loocv_score(recipe, data, method="fast").per_obs,
                               loocv_score(recipe, data, method="naive").per_obs, atol=1e-10)


def test_held_out_observation_does_not_influence_its_fold():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(30)
    y = x + rng.standard_normal(30)
    recipe = SplitRecipe(AdditiveCombo(0), (), 5, 3)
    base = loocv_score(recipe, Dataset(y, x[:, None]), method="naive").per_obs
    # changing y_0 changes only how fold 0 scores it, not the fold's own fit
    y2 = y.copy()
    y2[0] += 5.0
    moved = loocv_score(recipe, Dataset(y2, x[:, None]), method="naive").per_obs
    train = Dataset(y[1:], x[1:, None])
    fit = recipe.fit(train)
    row = build_design(fit.best_form, Dataset(y2, x[:, None]), check=False).values[0]
    eta = row @ fit.fit.coefficients
    s2 = fit.fit.dispersion
    assert moved[0] == pytest.approx(-0.5 * np.log(2 * np.pi * s2) - (y2[0] - eta) ** 2 / (2 * s2))
    assert base[0] != moved[0]


def test_bernoulli_route():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(60)
    y = (rng.random(60) < 1 / (1 + np.exp(-2 * x))).astype(float)
    data = Dataset(y, x[:, None], family="binomial")
    res = loocv_score(FixedRecipe(Linear(0)), data)
    assert np.all(np.isfinite(res.per_obs)) and np.all(res.per_obs <= 0)
    with pytest.raises(ValueError):
        loocv_score(FixedRecipe(Linear(0)), data, method="fast")


def test_too_many_failed_folds():
    # leaving out the single one makes the indicator constant: 1 of 5 folds fails
    x = np.r_[np.zeros(4), 1.0]
    data = Dataset(np.array([0.3, -1.0, 0.8, 0.1, 2.0]), x[:, None])
    with pytest.raises(TooManyFailedFolds):
        loocv_score(FixedRecipe(PiecewiseConstant(0, 0.0)), data, method="naive")
    ok = loocv_score(FixedRecipe(PiecewiseConstant(0, 0.0)), data,
                     DendiConfig(max_failed_share=0.2), method="naive")
    assert ok.n_failed_folds == 1
    fast = loocv_score(FixedRecipe(PiecewiseConstant(0, 0.0)), data,
                       DendiConfig(max_failed_share=0.2), method="fast")
    np.testing.assert_allclose(fast.per_obs, ok.per_obs, atol=1e-10)


def _result(per_obs):
    return LoocvResult.from_values(per_obs)


def test_gate_boundary_is_strict():
    ref = _result([0.0, 1.0, 2.0, 3.0])
    assert not one_se_gate(_result(np.full(4, ref.mean + ref.se)), ref)
    assert one_se_gate(_result(np.full(4, ref.mean + ref.se + 1e-9)), ref)


def test_gate_needs_matching_folds():
    with pytest.raises(ValueError):
        one_se_gate(_result([1.0, 2.0]), _result([1.0, 2.0, 3.0]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=20),
       st.floats(0, 3), st.floats(0, 3))
def test_gate_is_monotone_in_multiplier(values, m1, m2):
    ref = _result(values)
    cand = _result(np.asarray(values) + 0.1)
    lo, hi = sorted((m1, m2))
    if one_se_gate(cand, ref, DendiConfig(se_multiplier=hi)):
        assert one_se_gate(cand, ref, DendiConfig(se_multiplier=lo))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=20), st.floats(0, 1))
def test_gate_is_monotone_in_candidate(values, shift):
    ref = _result(values)
    a, b = _result(np.asarray(values)), _result(np.asarray(values) + shift)
    if one_se_gate(a, ref):
        assert one_se_gate(b, ref)


@pytest.mark.parametrize("method", ["fast", "naive"])
def test_zero_variance_fold_scores_minus_infinity(method):
    y = np.array([0.0, 0.0, 3.0])
    res = loocv_score(FixedRecipe(Null()), Dataset(y, np.arange(3.0)[:, None]), method=method)
    s2 = 2.25  # MLE variance of (0, 3)
    want = -0.5 * np.log(2 * np.pi * s2) - (0 - 1.5) ** 2 / (2 * s2)
    assert res.per_obs[0] == pytest.approx(want) and res.per_obs[1] == pytest.approx(want)
    assert res.per_obs[2] == -np.inf
    assert one_se_gate(_result([-1.0, -1.0, -1.0]), res)


def test_gate_with_zero_reference_se():
    ref = _result([1.0, 1.0, 1.0])
    assert ref.se == 0.0
    assert one_se_gate(_result([1.0 + 1e-12] * 3), ref)


def test_gate_with_zero_multiplier_is_mean_comparison():
    ref = _result([0.0, 1.0, 5.0])
    cfg = DendiConfig(se_multiplier=0.0)
    assert one_se_gate(_result([2.0 + 1e-9] * 3), ref, cfg)
    assert not one_se_gate(_result([2.0] * 3), ref, cfg)
