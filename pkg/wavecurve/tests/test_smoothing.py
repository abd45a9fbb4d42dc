from __future__ import annotations

import logging

import numpy as np
import pytest

from wavecurve.errors import InputError
from wavecurve.fda.basis import eval_bspline_basis
from wavecurve.fda.smoothing import (
    default_lambda_grid,
    fit_penalized,
    interpolate_missing,
    select_lambda,
    smooth_collection,
)
from wavecurve.utils import rng_for


def test_straight_line_survives_any_penalty(grid, basis):
    line = 1.5 + 0.03 * grid.points
    for lam in (1e-6, 1.0, 1e6):
        fit = fit_penalized(line, basis, lam)
        np.testing.assert_allclose(fit.curve.values, line, atol=1e-6)


def test_larger_lambda_gives_smoother_fit_and_smaller_trace(grid, basis):
    rng = rng_for(1, "smoothing-test")
    noisy = np.sin(grid.points / 15.0) + rng.normal(0.0, 0.3, grid.size)
    rough = fit_penalized(noisy, basis, 1e-4)
    smooth = fit_penalized(noisy, basis, 1e4)
    assert smooth.hat_trace < rough.hat_trace <= basis.n_basis + 1e-9
    assert smooth.curve.coefs @ basis.pen2 @ smooth.curve.coefs < rough.curve.coefs @ basis.pen2 @ rough.curve.coefs
    assert smooth.sse > rough.sse


def test_collection_shares_one_lambda_from_the_grid(grid, basis):
    rng = rng_for(2, "smoothing-test")
    values = np.vstack([np.cos(grid.points / (10.0 + i)) + rng.normal(0.0, 0.2, grid.size) for i in range(5)])
    result = smooth_collection(values, basis)
    assert len(result.fits) == 5
    assert {f.lam for f in result.fits} == {result.lam}
    assert result.lam in set(default_lambda_grid())
    assert len(result.gcv_table) == 41
    best = result.gcv_table["mean_gcv"].min()
    assert result.gcv_table.loc[result.gcv_table["lambda"] == result.lam, "mean_gcv"].iloc[0] == best
    assert select_lambda(values, basis) == result.lam


def test_ties_prefer_the_larger_lambda(grid, basis):
    zeros = np.zeros((3, grid.size))
    assert select_lambda(zeros, basis, [1e-2, 1.0, 1e2]) == 1e2


def test_missing_values_must_be_interpolated_first(grid, basis):
    series = np.ones(grid.size)
    series[10] = np.nan
    with pytest.raises(InputError):
        fit_penalized(series, basis, 1.0)
    with pytest.raises(InputError):
        smooth_collection(np.ones((2, grid.size)), basis, [])


def test_interpolate_missing_fills_linearly_and_warns(caplog):
    with caplog.at_level(logging.WARNING):
        filled = interpolate_missing([1.0, np.nan, 3.0, np.nan], "deaths U001")
    np.testing.assert_allclose(filled, [1.0, 2.0, 3.0, 3.0])
    assert "deaths U001" in caplog.text
    with pytest.raises(InputError):
        interpolate_missing([np.nan, np.nan])


def test_noisy_sines_are_recovered_below_noise_level(grid, basis):
    rng = rng_for(1, "noisy-sine")
    truth = np.vstack([np.sin(2 * np.pi * grid.points / 75.0 + phase) for phase in rng.uniform(0, np.pi, 50)])
    noisy = truth + rng.normal(0.0, 0.1, truth.shape)
    result = smooth_collection(noisy, basis, None, grid)
    fitted = np.vstack([c.values for c in result.curves])
    rmse = np.sqrt(np.mean((fitted - truth) ** 2, axis=1))
    assert np.all(rmse < 0.1)


def test_gcv_matches_direct_hat_matrix(grid, basis):
    rng = rng_for(2, "gcv-oracle")
    series = np.cos(grid.points / 10.0) + rng.normal(0.0, 0.2, grid.size)
    lam = 10.0
    fit = fit_penalized(series, basis, lam, grid)
    design = eval_bspline_basis(basis, grid)
    hat = design @ np.linalg.solve(design.T @ design + lam * basis.pen2, design.T)
    resid = series - hat @ series
    n = grid.size
    expected = n * float(resid @ resid) / (n - np.trace(hat)) ** 2
    assert fit.gcv == pytest.approx(expected, rel=1e-8)
    assert fit.hat_trace == pytest.approx(np.trace(hat), rel=1e-8)
