import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from parselab.scaling import (
    ScalingObservation,
    chi2_sf,
    crossover,
    crossover_from_log10,
    fit_mixed_model,
    fit_ols,
    fit_random_intercept,
    likelihood_ratio_test,
    ols,
    partial_regression,
    partial_regression_arrays,
    spearman,
)


def _grouped(seed, groups=12, reps=6, slope=-0.4, intercept=0.3, sd_group=0.2, sd_resid=0.1):
    rng = np.random.default_rng(seed)
    g = np.repeat(np.arange(groups), reps)
    x = rng.uniform(2.0, 4.5, size=groups * reps)
    u = rng.normal(0.0, sd_group, size=groups)
    y = intercept + slope * x + u[g] + rng.normal(0.0, sd_resid, size=groups * reps)
    X = np.column_stack([np.ones_like(x), x])
    return X, y, [f"g{i}" for i in g]


def test_ols_exact_line():
    x = np.arange(1.0, 8.0)
    fit = ols(np.column_stack([np.ones_like(x), x]), 2 * x + 1, ["intercept", "x"])
    assert fit.params["intercept"] == pytest.approx(1.0, abs=1e-10)
    assert fit.params["x"] == pytest.approx(2.0, abs=1e-10)


def test_ols_constant_outcome_and_orthogonal_residuals():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(20), rng.normal(size=20), rng.normal(size=20)])
    assert abs(ols(X, np.full(20, 3.0)).coefficients[1]) < 1e-12
    fit = ols(X, rng.normal(size=20))
    np.testing.assert_allclose(X.T @ fit.residuals, 0.0, atol=1e-10)


def test_ols_errors():
    with pytest.raises(ValueError):
        ols(np.ones((2, 2)), np.ones(2))
    with pytest.raises(ValueError):
        ols(np.column_stack([np.ones(5), np.ones(5)]), np.arange(5.0))


def test_mixed_model_recovers_components():
    X, y, groups = _grouped(3, groups=40, reps=8)
    fit = fit_random_intercept(X, y, groups, ["intercept", "x"], method="REML")
    assert fit.params["x"] == pytest.approx(-0.4, abs=3 * fit.std_errors[1])
    assert 0.5 * 0.04 <= fit.random_intercept_variance <= 1.5 * 0.04
    assert 0.5 * 0.01 <= fit.residual_variance <= 1.5 * 0.01
    assert fit.converged and not fit.degenerate


def test_zero_group_variance_matches_ols():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 1, 60)
    X = np.column_stack([np.ones(60), x])
    groups = np.arange(60) % 6
    noise = rng.normal(0, 0.1, 60)
    noise -= np.array([noise[groups == g].mean() for g in range(6)])[groups]  # no between-group spread
    y = 1.0 + 0.5 * x + noise
    free = fit_random_intercept(X, y, groups, method="ML")
    assert free.random_intercept_variance / free.residual_variance <= 1e-3
    pinned = fit_random_intercept(X, y, groups, method="ML", ratio=0.0)
    np.testing.assert_allclose(pinned.fixed_effects, ols(X, y).coefficients, atol=1e-6)


def test_one_observation_per_group_falls_back():
    x = np.linspace(1, 2, 8)
    X = np.column_stack([np.ones(8), x])
    y = 1 - x + np.sin(np.arange(8)) * 0.01
    with pytest.warns(UserWarning, match="one observation per group"):
        fit = fit_random_intercept(X, y, list(range(8)))
    assert fit.degenerate
    assert fit.random_intercept_variance == 0.0
    np.testing.assert_allclose(fit.fixed_effects, ols(X, y).coefficients, atol=1e-10)


def test_mixed_model_errors():
    X, y, groups = _grouped(0)
    with pytest.raises(ValueError):
        fit_random_intercept(X, y, groups, method="GLS")
    with pytest.raises(ValueError):
        fit_random_intercept(X, y, ["a"] * len(y))
    with pytest.raises(ValueError):
        fit_random_intercept(X, y, groups, ratio=-1.0)


@pytest.mark.parametrize("method", ["ML", "REML"])
def test_agrees_with_statsmodels(method):
    sm = pytest.importorskip("statsmodels.api")
    X, y, groups = _grouped(7)
    ours = fit_random_intercept(X, y, groups, ["intercept", "x"], method=method)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref = sm.MixedLM(y, X, groups=groups).fit(reml=method == "REML", method="lbfgs")
    np.testing.assert_allclose(ours.fixed_effects, ref.fe_params, atol=1e-4)
    assert ours.log_likelihood == pytest.approx(ref.llf, abs=1e-4)
    assert ours.random_intercept_variance == pytest.approx(float(np.asarray(ref.cov_re)[0, 0]), rel=1e-2)
    assert ours.residual_variance == pytest.approx(ref.scale, rel=1e-3)


@pytest.mark.parametrize("x", np.linspace(0, 40, 41))
def test_chi2_sf_one_df_closed_form(x):
    expect = 2.0 * (1.0 - stats.norm.cdf(math.sqrt(x))) if x < 30 else 2.0 * stats.norm.sf(math.sqrt(x))
    assert chi2_sf(x, 1) == pytest.approx(expect, abs=1e-10)


def test_lrt_requires_ml_and_nesting():
    X, y, groups = _grouped(2)
    null = fit_random_intercept(X[:, :1], y, groups, ["intercept"], method="ML")
    alt = fit_random_intercept(X, y, groups, ["intercept", "x"], method="ML")
    result = likelihood_ratio_test(null, alt)
    assert result.df == 1 and result.chi2 >= 0
    assert result.p_value < 1e-6
    with pytest.raises(ValueError, match="ML"):
        likelihood_ratio_test(fit_random_intercept(X[:, :1], y, groups, ["intercept"]), alt)
    with pytest.raises(ValueError):
        likelihood_ratio_test(alt, null)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_lrt_statistic_nonnegative(seed):
    X, y, groups = _grouped(seed, groups=6, reps=4)
    noise = np.random.default_rng(seed + 1).standard_normal(len(y))
    null = fit_random_intercept(X, y, groups, ["intercept", "x"], method="ML")
    alt = fit_random_intercept(np.column_stack([X, noise]), y, groups, ["intercept", "x", "z"], method="ML")
    assert likelihood_ratio_test(null, alt).chi2 >= 0


def test_spearman_extremes_and_errors():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]).rho == 1.0
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]).rho == -1.0
    with pytest.raises(ValueError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2])
    with pytest.raises(ValueError):
        spearman([1, 2, 3], [1, 2])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=4, max_size=25))
def test_spearman_matches_scipy_and_monotone_invariance(pairs):
    x, y = map(np.array, zip(*pairs))
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    ours = spearman(x, y)
    ref = stats.spearmanr(x, y)
    assert ours.rho == pytest.approx(ref.statistic, abs=1e-12)
    assert spearman(np.exp(x / 5.0), y ** 3).rho == pytest.approx(ours.rho, abs=1e-12)


def test_crossover_hand_values():
    assert crossover_from_log10(2.923).sentences == 838
    obs = [ScalingObservation(f"l{i}", lt, 0.3 - 0.1 * lt) for i, lt in enumerate([1.0, 2.0, 3.0, 4.0, 5.0])]
    fit = fit_ols(obs)
    est = crossover(fit)
    assert est.log10_sentences == pytest.approx(3.0, abs=1e-9)
    assert fit.params["intercept"] + fit.params["log_train"] * est.log10_sentences == pytest.approx(0, abs=1e-9)


def test_crossover_zero_intercept_and_bad_slope():
    obs = [ScalingObservation(f"l{i}", lt, -0.2 * lt) for i, lt in enumerate([1.0, 2.0, 3.0, 4.0])]
    assert crossover(fit_ols(obs)).sentences == 1
    rising = [ScalingObservation(f"l{i}", lt, 0.1 * lt) for i, lt in enumerate([1.0, 2.0, 3.0])]
    with pytest.raises(ValueError):
        crossover(fit_ols(rising))


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-0.5, -0.01))
def test_crossover_prediction_is_zero(intercept, slope):
    obs = [ScalingObservation(f"l{i}", lt, intercept + slope * lt) for i, lt in enumerate([1.0, 2.0, 3.0, 4.0])]
    fit = fit_ols(obs)
    est = crossover(fit)
    assert fit.params["intercept"] + fit.params["log_train"] * est.log10_sentences == pytest.approx(0, abs=1e-9)


def test_partial_regression_matches_full_fit():
    rng = np.random.default_rng(4)
    lt = rng.uniform(2, 4.5, 20)
    z = rng.normal(size=20)
    obs = [ScalingObservation(f"l{i}", lt[i], 0.5 - 0.2 * lt[i] + 0.07 * z[i] + rng.normal(0, 0.02), mattr_z=z[i])
           for i in range(20)]
    pr = partial_regression(obs)
    full = fit_ols(obs, ("log_train", "mattr_z"))
    assert pr.slope == pytest.approx(full.params["mattr_z"], abs=1e-8)
    assert len(pr.pairs) == 20


def test_partial_regression_orthogonal_focal():
    controls = np.column_stack([np.ones(4), [1.0, -1.0, 1.0, -1.0]])
    x = np.array([1.0, 1.0, -1.0, -1.0])
    y = 3 * x + controls[:, 1]
    pr = partial_regression_arrays(controls, x, y)
    assert pr.slope == pytest.approx(3.0, abs=1e-8)
    np.testing.assert_allclose(pr.x_residuals, x, atol=1e-12)


def test_partial_regression_collinear_raises():
    controls = np.column_stack([np.ones(5), np.arange(5.0)])
    with pytest.raises(ValueError, match="collinear"):
        partial_regression_arrays(controls, 2 * np.arange(5.0) + 1, np.arange(5.0))


def test_observation_validation():
    with pytest.raises(ValueError):
        ScalingObservation("x", 0.0, 0.1)
    with pytest.raises(ValueError):
        ScalingObservation("x", 2.0, float("nan"))


def test_mixed_model_from_observations():
    X, y, groups = _grouped(5)
    obs = [ScalingObservation(g, x, v) for g, x, v in zip(groups, X[:, 1], y)]
    a = fit_mixed_model(obs)
    b = fit_random_intercept(X, y, groups, ["intercept", "log_train"])
    np.testing.assert_array_equal(a.fixed_effects, b.fixed_effects)
    assert "beta.log_train" in a.summary()
