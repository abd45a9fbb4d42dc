from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import trapezoid

from wavecurve.errors import InputError, ShapeError
from wavecurve.models.functional import (
    collinearity_grid,
    concurrent_fit,
    fgen_cv_select,
    fgen_fit,
    fgen_lambda_max,
    fgen_path_ratios,
    fgen_stability,
    fos_joint,
    fos_marginal,
    lag_sweep,
)
from wavecurve.models.scalar import elastic_net_fit, standardize


def _fgen_data(basis, n=30, seed=0):
    rng = np.random.default_rng(seed)
    X = standardize(rng.normal(size=(n, 3))).X
    shape = rng.normal(size=basis.n_basis)
    C = np.outer(X[:, 0], shape) + 0.05 * rng.normal(size=(n, basis.n_basis))
    return X, C - C.mean(axis=0)


def _predictor(grid, n=12, seed=0):
    rng = np.random.default_rng(seed)
    level = rng.normal(size=n)
    swing = rng.normal(size=n)
    return level[:, None] + swing[:, None] * np.sin(grid.points / 20.0)[None, :]


def test_fgen_zero_solution_at_lambda_max(basis):
    X, C = _fgen_data(basis)
    lam = fgen_lambda_max(X, C, basis)
    at_max = fgen_fit(X, C, lam, 0.6 * lam, basis)
    assert not at_max.active.any()
    below = fgen_fit(X, C, 0.99 * lam, 0.6 * 0.99 * lam, basis)
    assert below.active[0]


def test_fgen_without_penalty_is_least_squares(basis):
    X, C = _fgen_data(basis, seed=1)
    fit = fgen_fit(X, C, 0.0, 0.0, basis, tol=1e-14)
    expected = np.linalg.solve(X.T @ X, X.T @ C)
    np.testing.assert_allclose(fit.coefs, expected, atol=1e-5)
    assert np.all(np.diff(fit.objective_trace) <= 1e-9)


def test_fgen_norms_are_l2_norms_of_curves(basis, grid):
    X, C = _fgen_data(basis, seed=2)
    fit = fgen_fit(X, C, 1.0, 0.6, basis)
    curves = fit.curves(grid)
    for norm, curve in zip(fit.norms, curves):
        assert norm == pytest.approx(curve.l2_norm(), rel=1e-8)


def test_fgen_path_ranks_the_relevant_feature_first(basis):
    X, C = _fgen_data(basis, seed=3)
    path = fgen_path_ratios(X, C, basis, grid_size=20, names=["a", "b", "c"])
    assert path.ratios[0] == 1.0
    assert path.ratios[1] < 1.0 and path.ratios[2] < 1.0
    assert path.coefs.shape == (20, 3, basis.n_basis)


def test_fgen_response_shape_is_checked(basis):
    X, C = _fgen_data(basis)
    with pytest.raises(ShapeError):
        fgen_fit(X, C[:, :5], 1.0, 0.6, basis)
    with pytest.raises(InputError):
        fgen_fit(X, C, 1.0, 0.6)


def test_fgen_stability_and_cv(basis):
    X, C = _fgen_data(basis, n=40, seed=4)
    first = fgen_stability(X, C, basis, runs=4, seed=8, grid_size=15)
    second = fgen_stability(X, C, basis, runs=4, seed=8, grid_size=15)
    np.testing.assert_array_equal(first.ratios, second.ratios)
    np.testing.assert_allclose(first.mean_ratios[0], 1.0)

    cv = fgen_cv_select(X, C, basis, folds=4, seed=8, grid_size=15)
    assert cv.lambda_1se >= cv.lambda_min
    assert cv.fit_min.coefs.shape == (3, basis.n_basis)
    assert len(cv.curve_table()) == 15


def test_concurrent_fit_recovers_exact_relation(grid):
    x = _predictor(grid)
    Y = 2.0 + 3.0 * x
    fit = concurrent_fit(Y, {"x": x}, grid=grid)
    np.testing.assert_allclose(fit.coefficients["x"].raw, 3.0, atol=1e-8)
    np.testing.assert_allclose(fit.coefficients["intercept"].raw, 2.0, atol=1e-8)
    np.testing.assert_allclose(fit.coefficients["x"].values, 3.0, atol=1e-6)
    assert fit.total_r2 == pytest.approx(1.0)
    table = fit.table()
    assert set(table["predictor"]) == {"intercept", "x"}
    assert list(table.columns) == ["predictor", "t", "beta", "se", "significant"]


def test_lagged_fit_matches_shifted_predictor(grid):
    rng = np.random.default_rng(3)
    x = _predictor(grid, seed=3)
    Y = rng.normal(size=x.shape)
    lag, delta = 5, 4
    shifted = np.empty_like(x)
    shifted[:, : grid.size - delta] = x[:, delta:]
    shifted[:, grid.size - delta:] = x[:, -1:]
    first = concurrent_fit(Y, {"x": x}, lag=lag, grid=grid)
    second = concurrent_fit(Y, {"x": shifted}, lag=lag + delta, grid=grid)
    np.testing.assert_allclose(first.coefficients["x"].raw[delta:], second.coefficients["x"].raw, atol=1e-10)
    assert first.coefficients["x"].days[0] == lag
    assert second.grid.size == grid.size - lag - delta


def test_zero_dummy_column_is_dropped(grid):
    x = _predictor(grid, seed=5)
    Y = 1.0 + x + 0.1 * np.random.default_rng(5).normal(size=x.shape)
    fit = concurrent_fit(Y, {"x": x}, d=np.zeros(x.shape[0]), grid=grid)
    assert fit.dropped["intercept:d"] == grid.size
    dummy = fit.coefficients["intercept:d"]
    assert np.all(dummy.raw == 0) and np.isnan(dummy.se).all()
    assert "d" in fit.partial_r2 and "x" in fit.partial_r2


def test_lag_out_of_range(grid):
    x = _predictor(grid)
    with pytest.raises(InputError):
        concurrent_fit(x, {"x": x}, lag=148, grid=grid)
    with pytest.raises(InputError):
        concurrent_fit(x, {"x": x}, lag=2)


def test_function_on_scalar_fits(grid):
    rng = np.random.default_rng(7)
    a = rng.normal(size=15)
    b = rng.normal(size=15)
    Y = np.outer(a, np.cos(grid.points / 30.0)) + 0.5 * b[:, None] + 0.05 * rng.normal(size=(15, grid.size))
    marginal = fos_marginal(Y, a, "a", grid)
    direct = concurrent_fit(Y, None, {"a": a}, grid=grid)
    np.testing.assert_allclose(marginal.beta.raw, direct.coefficients["a"].raw)
    assert marginal.r2 == pytest.approx(direct.total_r2)

    joint = fos_joint(Y, {"a": a, "b": b}, grid)
    assert joint.total_r2 > marginal.r2
    assert 0 <= joint.partial_r2["b"] <= 1
    with pytest.raises(InputError):
        fos_marginal(Y, np.ones(15), "flat", grid)


def test_lag_sweep_summaries(grid):
    x = _predictor(grid, seed=8)
    Y = 0.5 * x + 0.1 * np.random.default_rng(8).normal(size=x.shape)
    sweep = lag_sweep(Y, {"x": x}, lags=[0, 2], grid=grid)
    assert sorted(sweep.fits) == [0, 2]
    summary = sweep.r2_summary()
    means = summary[summary["lag"] == "mean"].set_index("predictor")["r2"]
    assert means["total"] == pytest.approx(sweep.mean_r2())
    assert means["x"] == pytest.approx(sweep.mean_r2("x"))
    beams = sweep.beams()
    assert set(beams["lag"]) == {0, 2}
    assert len(beams) == 2 * (grid.size + grid.size - 2)
    with pytest.raises(InputError):
        lag_sweep(Y, {"x": x}, lags=[], grid=grid)


def test_collinearity_grid(grid):
    x = _predictor(grid, seed=9)
    scalar = np.random.default_rng(9).normal(size=x.shape[0])
    table = collinearity_grid({"a": x, "b": 2.0 * x}, {"s": scalar}, grid).set_index("variable")
    assert table.loc["a", "a"] == 1.0
    assert table.loc["a", "b"] == pytest.approx(1.0)
    assert table.loc["b", "a"] == pytest.approx(1.0)
    assert 0 <= table.loc["a", "s"] < 1
    with pytest.raises(InputError):
        collinearity_grid({})


def test_constant_responses_reduce_to_the_scalar_elastic_net(basis):
    rng = np.random.default_rng(12)
    X = standardize(rng.normal(size=(20, 3))).X
    c = X @ np.array([1.0, -0.5, 0.0]) + 0.2 * rng.normal(size=20)
    c = c - c.mean()
    C = np.outer(c, np.ones(basis.n_basis))
    l1, l2 = 2.0, 1.2
    functional = fgen_fit(X, C, l1, l2, basis, tol=1e-14)
    scalar = elastic_net_fit(X, c, l1 / np.sqrt(basis.domain_length), l2, tol=1e-14)
    np.testing.assert_allclose(functional.coefs, np.outer(scalar.coefs, np.ones(basis.n_basis)), atol=1e-4)


def test_lagged_model_recovers_coefficients_and_lag(grid):
    rng = np.random.default_rng(19)
    n, true_lag = 107, 19
    t = grid.points
    X = (rng.normal(1.0, 0.3, n)[:, None] * np.sin(t / 5.0 + rng.uniform(0, 6, n)[:, None])
         + rng.normal(1.0, 0.3, n)[:, None] * np.cos(t / 11.0 + rng.uniform(0, 6, n)[:, None]))
    beta0 = 0.5 * np.cos(t / 40.0)
    beta1 = 1.0 + 0.5 * np.sin(t / 30.0)
    Y = np.tile(beta0, (n, 1)) + 0.05 * rng.normal(size=(n, t.size))
    Y[:, true_lag:] += beta1[true_lag:] * X[:, : t.size - true_lag]

    sweep = lag_sweep(Y, {"x": X}, lags=[17, 18, 19, 20, 21], grid=grid)
    best = max(sweep.fits, key=lambda lag: sweep.fits[lag].total_r2)
    assert best in (18, 19, 20)

    fit = sweep.fits[true_lag]
    for name, truth in (("intercept", beta0), ("x", beta1)):
        coef = fit.coefficients[name]
        target = truth[coef.days.astype(int)]
        error = trapezoid((coef.values - target) ** 2, coef.grid.points)
        assert error < 1e-2
        inside = (coef.lower <= target) & (target <= coef.upper)
        assert inside.mean() >= 0.9


def test_fgen_zero_threshold_on_random_instances(basis):
    for case in range(20):
        rng = np.random.default_rng(500 + case)
        n, p = int(rng.integers(15, 40)), int(rng.integers(2, 6))
        X = standardize(rng.normal(size=(n, p))).X
        C = rng.normal(size=(n, basis.n_basis))
        C = C - C.mean(axis=0)
        lam = fgen_lambda_max(X, C, basis)
        l2_ratio = float(rng.uniform(0.0, 1.0))
        above = fgen_fit(X, C, lam * (1 + 1e-10), l2_ratio * lam, basis)
        assert not above.active.any()
        assert np.all(above.coefs == 0)
        below = fgen_fit(X, C, 0.999 * lam, l2_ratio * lam, basis)
        assert below.active.any()
        assert np.all(np.diff(below.objective_trace) <= 1e-9 * max(1.0, abs(below.objective_trace[0])))


def test_fgen_stability_ranks_the_signal_above_noise(basis):
    ranked_first = 0
    for case in range(100):
        rng = np.random.default_rng(2000 + case)
        X = rng.normal(size=(50, 6))
        shape = rng.normal(size=basis.n_basis)
        C = np.outer(X[:, 0], shape) + rng.normal(size=(50, basis.n_basis))
        summary = fgen_stability(X, C, basis, runs=5, seed=case, grid_size=25, refine=False)
        ratios = summary.mean_ratios
        ranked_first += int(ratios[0] > ratios[1:].max())
    assert ranked_first >= 95


def test_adding_predictors_never_lowers_concurrent_r2(grid):
    rng = np.random.default_rng(21)
    x = _predictor(grid, n=20, seed=21)
    z = _predictor(grid, n=20, seed=22)
    scalar = rng.normal(size=20)
    Y = 0.8 * x + 0.3 * z + 0.2 * rng.normal(size=x.shape)
    for lag in (0, 3):
        small = concurrent_fit(Y, {"x": x}, {"s": scalar}, lag=lag, grid=grid)
        large = concurrent_fit(Y, {"x": x, "z": z}, {"s": scalar}, lag=lag, grid=grid)
        assert large.total_r2 >= small.total_r2 - 1e-10
