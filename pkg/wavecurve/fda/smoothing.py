"""Penalized B-spline smoothing with a GCV-selected, collection-wide lambda."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import linalg

from ..errors import InputError, RankError, ShapeError
from .basis import BasisSystem, Curve, Grid, eval_bspline_basis

LOGGER = logging.getLogger(__name__)


def default_lambda_grid(n_points: int = 41, low: float = 1e-6, high: float = 1e6) -> np.ndarray:
    return np.logspace(np.log10(low), np.log10(high), n_points)


@dataclass(frozen=True)
class SmoothFit:
    curve: Curve
    lam: float
    hat_trace: float
    sse: float
    gcv: float
    n_obs: int


@dataclass(frozen=True)
class SmoothedCollection:
    """Shared-lambda smoothing of a whole collection of series."""

    lam: float
    fits: List[SmoothFit]
    gcv_table: pd.DataFrame

    @property
    def curves(self) -> List[Curve]:
        return [f.curve for f in self.fits]


class PenalizedSmoother:
    """Solves (B'B + lam R) c = B'y for one basis and observation grid.

    The cross-products are computed once and reused across lambdas and
    series, so sweeping a lambda grid over a collection is a sequence of
    small Cholesky solves.
    """

    def __init__(self, basis: BasisSystem, grid: Grid) -> None:
        if grid.domain_length > basis.domain_length + 1e-9:
            raise ShapeError("Observation grid extends beyond the basis domain")
        self.basis = basis
        self.grid = grid
        self.design = eval_bspline_basis(basis, grid)
        self.btb = self.design.T @ self.design
        self.penalty = basis.pen2
        self._full_rank = np.linalg.matrix_rank(self.design) == basis.n_basis

    @property
    def n_obs(self) -> int:
        return self.grid.size

    def _factor(self, lam: float):
        if lam < 0:
            raise InputError(f"Smoothing parameter must be nonnegative, got {lam}")
        if lam == 0 and not self._full_rank:
            raise RankError(
                f"Unpenalized fit is singular: {self.basis.n_basis} basis functions, "
                f"{self.n_obs} observations"
            )
        system = self.btb + lam * self.penalty
        try:
            return linalg.cho_factor(system, lower=True)
        except linalg.LinAlgError as exc:
            raise RankError(f"Smoothing system not positive definite at lambda={lam}") from exc

    def fit_many(self, values: np.ndarray, lam: float) -> List[SmoothFit]:
        """Fit every row of an N x T matrix with the same lambda."""
        values = _check_series(values, self.n_obs)
        factor = self._factor(lam)
        coefs = linalg.cho_solve(factor, self.design.T @ values.T)
        hat_trace = float(np.trace(linalg.cho_solve(factor, self.btb)))
        fitted = (self.design @ coefs).T
        sse = np.sum((values - fitted) ** 2, axis=1)
        n = self.n_obs
        denom = (n - hat_trace) ** 2
        gcv = n * sse / denom if n - hat_trace > 0 else np.full(sse.shape, np.inf)
        return [
            SmoothFit(
                curve=Curve(self.basis, coefs[:, i], self.grid, observed=values[i]),
                lam=float(lam),
                hat_trace=hat_trace,
                sse=float(sse[i]),
                gcv=float(gcv[i]),
                n_obs=n,
            )
            for i in range(values.shape[0])
        ]

    def gcv_scores(self, values: np.ndarray, lam: float) -> np.ndarray:
        return np.array([f.gcv for f in self.fit_many(values, lam)])


def _check_series(values: np.ndarray, n_obs: int) -> np.ndarray:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != n_obs:
        raise ShapeError(f"Expected series of length {n_obs}, got {values.shape[1]}")
    if np.isnan(values).any():
        raise InputError("Series contains missing values; interpolate before smoothing")
    if not np.all(np.isfinite(values)):
        raise InputError("Series contains non-finite values")
    return values


def _observation_grid(n_obs: int, grid: Optional[Grid]) -> Grid:
    return grid if grid is not None else Grid.daily(n_obs)


def fit_penalized(
    series: Sequence[float],
    basis: BasisSystem,
    lam: float,
    grid: Optional[Grid] = None,
) -> SmoothFit:
    """Penalized least-squares fit of one daily series."""
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ShapeError("fit_penalized expects a single series")
    if values.size < 4:
        raise InputError(f"At least 4 observations are needed, got {values.size}")
    smoother = PenalizedSmoother(basis, _observation_grid(values.size, grid))
    return smoother.fit_many(values[None, :], lam)[0]


def _gcv_table(smoother: PenalizedSmoother, values: np.ndarray, lambda_grid: np.ndarray) -> pd.DataFrame:
    rows = []
    for lam in lambda_grid:
        try:
            mean_gcv = float(np.mean(smoother.gcv_scores(values, float(lam))))
        except RankError:
            LOGGER.debug("Skipping singular lambda=%g", lam)
            mean_gcv = np.inf
        rows.append({"lambda": float(lam), "mean_gcv": mean_gcv})
    return pd.DataFrame(rows, columns=["lambda", "mean_gcv"])


def _argmin_prefer_larger(table: pd.DataFrame) -> float:
    scores = table["mean_gcv"].to_numpy()
    if not np.any(np.isfinite(scores)):
        raise RankError("No lambda on the grid produced a finite GCV score")
    best = np.flatnonzero(scores == np.min(scores))
    lambdas = table["lambda"].to_numpy()
    return float(np.max(lambdas[best]))


def select_lambda(
    series_set: Sequence[Sequence[float]],
    basis: BasisSystem,
    lambda_grid: Optional[Sequence[float]] = None,
    grid: Optional[Grid] = None,
) -> float:
    """Grid lambda minimizing the mean GCV over all series; ties go to the larger lambda."""
    return smooth_collection(series_set, basis, lambda_grid, grid).lam


def smooth_collection(
    series_set: Sequence[Sequence[float]],
    basis: BasisSystem,
    lambda_grid: Optional[Sequence[float]] = None,
    grid: Optional[Grid] = None,
) -> SmoothedCollection:
    values = np.atleast_2d(np.asarray(series_set, dtype=float))
    if values.size == 0 or values.shape[0] == 0:
        raise InputError("Cannot select a smoothing parameter for an empty collection")
    lambdas = np.sort(np.asarray(default_lambda_grid() if lambda_grid is None else lambda_grid, dtype=float))
    if lambdas.size == 0 or np.any(lambdas <= 0):
        raise InputError("Lambda grid must be nonempty and strictly positive")
    smoother = PenalizedSmoother(basis, _observation_grid(values.shape[1], grid))
    _check_series(values, smoother.n_obs)
    table = _gcv_table(smoother, values, lambdas)
    lam = _argmin_prefer_larger(table)
    LOGGER.debug("Selected lambda=%g over %d series", lam, values.shape[0])
    return SmoothedCollection(lam=lam, fits=smoother.fit_many(values, lam), gcv_table=table)


def interpolate_missing(series: Sequence[float], label: str = "series") -> np.ndarray:
    """Linearly interpolate missing days (edges take the nearest observed value)."""
    values = pd.Series(np.asarray(series, dtype=float))
    missing = int(values.isna().sum())
    if missing == 0:
        return values.to_numpy()
    if missing == values.size:
        raise InputError(f"{label}: every value is missing")
    LOGGER.warning("%s: linearly interpolating %d missing day(s)", label, missing)
    return values.interpolate(method="linear", limit_direction="both").to_numpy()
