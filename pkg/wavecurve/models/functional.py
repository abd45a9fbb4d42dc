"""Functional-response regression.

Two families live here:

* the functional elastic net (fgen): scalar features, curve responses,
  penalties on the L2 norms of the coefficient curves. Coefficient curves
  are expanded on the response basis; with G = L L' the basis Gram matrix,
  the substitution u_j = L' b_j turns every L2 norm into a Euclidean norm,
  and the problem becomes a multi-task group elastic net solved by exact
  block coordinate descent.
* pointwise (concurrent) least squares: at every grid point the response
  is regressed on the predictor values at that point (lagged for
  functional predictors), then coefficient functions are smoothed. This
  covers marginal and joint function-on-scalar fits, the lagged
  function-on-function models, lag sweeps and the collinearity grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import linalg
from scipy.integrate import trapezoid

from ..errors import ConvergenceError, InputError, ShapeError
from ..fda.basis import BasisSystem, Curve, CurveLike, Grid, sample_many
from ..fda.smoothing import smooth_collection
from .paths import (
    PathFit,
    StabilitySummary,
    cv_folds,
    lambda_grid,
    one_se_choice,
    run_stability,
    subsample_plan,
    trace_path,
)
from .scalar import DEFAULT_L2_RATIO, standardize

LOGGER = logging.getLogger(__name__)

Z_95 = 1.96

ResponseLike = Union[Sequence[Curve], np.ndarray]


# ---------------------------------------------------------------------------
# functional elastic net
# ---------------------------------------------------------------------------


def _response_coefs(Y: ResponseLike, basis: Optional[BasisSystem]) -> Tuple[np.ndarray, BasisSystem]:
    if isinstance(Y, np.ndarray):
        if basis is None:
            raise InputError("A basis is required when the response is given as a coefficient matrix")
        coefs = np.atleast_2d(np.asarray(Y, dtype=float))
    else:
        curves = list(Y)
        if not curves:
            raise InputError("Empty response collection")
        basis = basis or curves[0].basis
        for curve in curves:
            if not curve.basis.same_as(basis):
                raise ShapeError("Response curves must share one basis")
        coefs = np.vstack([c.coefs for c in curves])
    if coefs.shape[1] != basis.n_basis:
        raise ShapeError(f"Expected {basis.n_basis} basis coefficients per response, got {coefs.shape[1]}")
    return coefs, basis


def _loss_scale(n: int, loss: str) -> float:
    if loss == "sum":
        return 1.0
    if loss == "mean":
        return float(n)
    raise InputError(f"Unknown loss normalization '{loss}'")


@dataclass
class FGenFit:
    """Coefficient curves of the functional elastic net, one row of basis coefficients per feature."""

    basis: BasisSystem
    coefs: np.ndarray
    whitened: np.ndarray
    lambda1: float
    lambda2: float
    sweeps: int
    objective_trace: List[float] = field(default_factory=list)

    @property
    def norms(self) -> np.ndarray:
        """L2 norm of every coefficient curve."""
        return np.linalg.norm(self.whitened, axis=1)

    @property
    def active(self) -> np.ndarray:
        return self.norms > 0

    def curves(self, grid: Grid) -> List[Curve]:
        return [Curve(self.basis, row, grid) for row in self.coefs]


class BlockCoordinateDescent:
    """Group elastic net over whitened responses Z = C L, reusable across penalties."""

    def __init__(
        self,
        X: np.ndarray,
        Y: ResponseLike,
        basis: Optional[BasisSystem] = None,
        loss: str = "sum",
        tol: float = 1e-8,
        max_sweeps: int = 10_000,
    ) -> None:
        self.X = np.asarray(X, dtype=float)
        coefs, self.basis = _response_coefs(Y, basis)
        if self.X.ndim != 2 or coefs.shape[0] != self.X.shape[0]:
            raise ShapeError(f"Design {self.X.shape} and {coefs.shape[0]} responses do not match")
        self.chol = linalg.cholesky(self.basis.gram, lower=True)
        self.Z = coefs @ self.chol
        self.col_sq = np.sum(self.X ** 2, axis=0)
        self.scale = _loss_scale(self.X.shape[0], loss)
        self.tol = tol
        self.max_sweeps = max_sweeps

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    def zero_scores(self) -> np.ndarray:
        """||x_j' Y||_L2 per feature, in units of the (scaled) penalty."""
        return np.linalg.norm(self.X.T @ self.Z, axis=1) / self.scale

    def _unwhiten(self, U: np.ndarray) -> np.ndarray:
        return linalg.solve_triangular(self.chol.T, U.T, lower=False).T

    def fit(self, lambda1: float, lambda2: float, warm: Optional[np.ndarray] = None) -> FGenFit:
        if lambda1 < 0 or lambda2 < 0:
            raise InputError(f"Penalties must be nonnegative, got ({lambda1}, {lambda2})")
        l1, l2 = lambda1 * self.scale, lambda2 * self.scale
        U = np.zeros((self.p, self.Z.shape[1])) if warm is None else np.array(warm, dtype=float)
        R = self.Z - self.X @ U

        def objective() -> float:
            norms = np.linalg.norm(U, axis=1)
            return float(0.5 * np.sum(R ** 2) + l1 * np.sum(norms) + 0.5 * l2 * np.sum(norms ** 2))

        trace = [objective()]
        for sweep in range(1, self.max_sweeps + 1):
            for j in range(self.p):
                denom = self.col_sq[j] + l2
                s = self.X[:, j] @ R + self.col_sq[j] * U[j]
                norm_s = float(np.linalg.norm(s))
                if denom <= 0 or norm_s <= l1:
                    new = np.zeros_like(s)
                else:
                    new = (1.0 - l1 / norm_s) * s / denom
                delta = new - U[j]
                if np.any(delta):
                    R -= np.outer(self.X[:, j], delta)
                    U[j] = new
            trace.append(objective())
            previous, current = trace[-2], trace[-1]
            change = abs(previous - current) / max(abs(previous), np.finfo(float).tiny)
            if previous == 0.0 or change < self.tol:
                return FGenFit(self.basis, self._unwhiten(U), U, float(lambda1), float(lambda2), sweep, trace)
        raise ConvergenceError("Functional elastic net did not converge", self.max_sweeps, change)


def fgen_lambda_max(X: np.ndarray, Y: ResponseLike, basis: Optional[BasisSystem] = None, loss: str = "sum") -> float:
    """max_j ||x_j' Y||_L2: the zero function is optimal iff lambda1 is at least this value."""
    return float(np.max(BlockCoordinateDescent(X, Y, basis, loss).zero_scores()))


def fgen_fit(
    X: np.ndarray,
    Y: ResponseLike,
    lambda1: float,
    lambda2: float,
    basis: Optional[BasisSystem] = None,
    loss: str = "sum",
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
) -> FGenFit:
    return BlockCoordinateDescent(X, Y, basis, loss, tol, max_sweeps).fit(lambda1, lambda2)


def fgen_path_ratios(
    X: np.ndarray,
    Y: ResponseLike,
    basis: Optional[BasisSystem] = None,
    grid_size: int = 100,
    min_ratio: float = 1e-3,
    l2_ratio: float = DEFAULT_L2_RATIO,
    spacing: str = "geometric",
    names: Optional[Sequence[str]] = None,
    loss: str = "sum",
    refine: bool = True,
    stop_when_all_active: bool = False,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
) -> PathFit:
    """fgen path with lambda2 = l2_ratio * lambda1; path coefficients are basis coefficients (L x p x K)."""
    solver = BlockCoordinateDescent(X, Y, basis, loss, tol, max_sweeps)
    names = list(names or [f"x{j}" for j in range(solver.p)])
    scores = solver.zero_scores()
    lam_max = float(np.max(scores)) if scores.size else 0.0
    lambdas = lambda_grid(lam_max, grid_size, min_ratio, spacing)

    def solve(lam: float, warm: Optional[np.ndarray]) -> np.ndarray:
        return solver.fit(lam, l2_ratio * lam, warm).whitened

    whitened, entry = trace_path(
        solve, lambda u: np.linalg.norm(u, axis=1) > 0, scores, lam_max, lambdas, refine,
        stop_when_all_active=stop_when_all_active,
    )
    coefs = np.stack([solver._unwhiten(u) for u in whitened]) if whitened else np.empty((0, solver.p, solver.Z.shape[1]))
    LOGGER.debug("fgen path: lambda_max=%g, %d grid points", lam_max, len(whitened))
    return PathFit(
        feature_names=names,
        lambdas=lambdas[: len(whitened)],
        coefs=coefs,
        lambda_max=lam_max,
        entry_lambdas=entry,
        l2_ratio=l2_ratio,
    )


def _fgen_subsample_ratios(X: np.ndarray, C: np.ndarray, basis: BasisSystem, **path_kwargs) -> np.ndarray:
    design = standardize(X)
    centred = C - C.mean(axis=0)
    return fgen_path_ratios(design.X, centred, basis, stop_when_all_active=True, **path_kwargs).ratios


def fgen_stability(
    X: np.ndarray,
    Y: ResponseLike,
    basis: Optional[BasisSystem] = None,
    runs: int = 500,
    seed: int = 0,
    min_fraction: float = 0.85,
    n_range: Optional[Tuple[int, int]] = None,
    names: Optional[Sequence[str]] = None,
    workers: int = 1,
    label: str = "fgen-stability",
    **path_kwargs,
) -> StabilitySummary:
    """Mean fgen lambda_max-ratios over subsamples; features re-standardized and responses re-centred per run."""
    X = np.asarray(X, dtype=float)
    coefs, basis = _response_coefs(Y, basis)
    names = list(names or [f"x{j}" for j in range(X.shape[1])])
    plan = subsample_plan(X.shape[0], runs, seed, label, min_fraction, n_range)
    task = partial(_fgen_subsample_ratios, basis=basis, **path_kwargs)
    summary = run_stability(task, X, coefs, plan, names, workers)
    LOGGER.info("fgen stability: %d/%d runs completed", summary.completed, summary.runs)
    return summary


@dataclass
class FGenCVResult:
    lambdas: np.ndarray
    mean_error: np.ndarray
    se_error: np.ndarray
    lambda_min: float
    lambda_1se: float
    fit_min: FGenFit

    def curve_table(self) -> pd.DataFrame:
        return pd.DataFrame({"lambda1": self.lambdas, "cv_error": self.mean_error, "cv_se": self.se_error})


def fgen_cv_select(
    X: np.ndarray,
    Y: ResponseLike,
    basis: Optional[BasisSystem] = None,
    folds: int = 5,
    seed: int = 0,
    grid_size: int = 100,
    min_ratio: float = 1e-3,
    l2_ratio: float = DEFAULT_L2_RATIO,
    spacing: str = "geometric",
    loss: str = "sum",
    label: str = "fgen-cv",
) -> FGenCVResult:
    """K-fold held-out L2 error along the full-data fgen penalty grid."""
    X = np.asarray(X, dtype=float)
    coefs, basis = _response_coefs(Y, basis)
    full = BlockCoordinateDescent(X, coefs, basis, loss)
    lambdas = lambda_grid(float(np.max(full.zero_scores())), grid_size, min_ratio, spacing)
    assignment = cv_folds(X.shape[0], folds, seed, label)
    errors = np.zeros((folds, lambdas.size))
    for k in range(folds):
        train, test = assignment != k, assignment == k
        solver = BlockCoordinateDescent(X[train], coefs[train], basis, loss)
        warm = None
        for i, lam in enumerate(lambdas):
            warm = solver.fit(float(lam), l2_ratio * float(lam), warm).whitened
            resid = full.Z[test] - X[test] @ warm
            errors[k, i] = float(np.mean(np.sum(resid ** 2, axis=1)))
    lam_min, lam_1se, mean, se = one_se_choice(lambdas, errors)
    return FGenCVResult(
        lambdas=lambdas,
        mean_error=mean,
        se_error=se,
        lambda_min=lam_min,
        lambda_1se=lam_1se,
        fit_min=full.fit(lam_min, l2_ratio * lam_min),
    )


# ---------------------------------------------------------------------------
# pointwise (concurrent) regression
# ---------------------------------------------------------------------------


@dataclass
class CoefficientCurve:
    """Smoothed coefficient function with pointwise standard errors.

    ``offset`` is the original-time position of the first grid point, so a
    coefficient estimated on the lagged domain [lag, c] reports day
    ``offset + s`` for grid point ``s``.
    """

    name: str
    beta: Curve
    raw: np.ndarray
    se: np.ndarray
    offset: int = 0

    @property
    def grid(self) -> Grid:
        return self.beta.grid

    @property
    def days(self) -> np.ndarray:
        return self.grid.points + self.offset

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.beta.values)

    @property
    def lower(self) -> np.ndarray:
        return self.values - Z_95 * self.se

    @property
    def upper(self) -> np.ndarray:
        return self.values + Z_95 * self.se

    @property
    def significant_mask(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return (self.lower > 0) | (self.upper < 0)


@dataclass
class PointwiseOLS:
    names: List[str]
    coefs: np.ndarray
    se: np.ndarray
    fitted: np.ndarray
    sse: np.ndarray
    sst: np.ndarray
    dropped: Dict[str, int]


def _pointwise_ols(Y: np.ndarray, columns: Mapping[str, np.ndarray]) -> PointwiseOLS:
    """OLS of Y[:, t] on the columns at each t; each column is n (constant) or n x T (varying).

    Columns that are linearly dependent on earlier ones at a grid point are
    dropped there (coefficient 0, standard error NaN).
    """
    n, T = Y.shape
    names = list(columns)
    q = len(names)
    varying = any(np.ndim(v) == 2 for v in columns.values())
    stack = np.empty((T, n, q))
    for k, name in enumerate(names):
        col = np.asarray(columns[name], dtype=float)
        if col.ndim == 1:
            if col.shape != (n,):
                raise ShapeError(f"Column {name} has {col.shape[0]} values for {n} units")
            stack[:, :, k] = col[None, :]
        else:
            if col.shape != (n, T):
                raise ShapeError(f"Column {name} has shape {col.shape}, expected {(n, T)}")
            stack[:, :, k] = col.T

    coefs = np.zeros((q, T))
    se = np.full((q, T), np.nan)
    fitted = np.zeros_like(Y)
    dropped = {name: 0 for name in names}
    kept_const: Optional[List[int]] = None
    for t in range(T):
        design = stack[t]
        if varying or kept_const is None:
            kept: List[int] = []
            for k in range(q):
                if np.linalg.matrix_rank(design[:, kept + [k]]) == len(kept) + 1:
                    kept.append(k)
            kept_const = kept
        kept = kept_const
        for k in set(range(q)) - set(kept):
            dropped[names[k]] += 1
        if not kept:
            continue
        sub = design[:, kept]
        beta, *_ = np.linalg.lstsq(sub, Y[:, t], rcond=None)
        fitted[:, t] = sub @ beta
        coefs[kept, t] = beta
        dof = n - len(kept)
        if dof > 0:
            resid = Y[:, t] - fitted[:, t]
            sigma2 = float(resid @ resid) / dof
            cov = sigma2 * np.linalg.inv(sub.T @ sub)
            se[kept, t] = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    resid = Y - fitted
    sse = np.sum(resid ** 2, axis=0)
    sst = np.sum((Y - Y.mean(axis=0)) ** 2, axis=0)
    for name, count in dropped.items():
        if count:
            LOGGER.info("Column %s is collinear with earlier columns at %d of %d grid points; dropped there", name, count, T)
    return PointwiseOLS(names, coefs, se, fitted, sse, sst, dropped)


def integrated_r2(sse: np.ndarray, sst: np.ndarray, grid: Grid) -> float:
    """1 - integral(SSE) / integral(SST)."""
    total = float(trapezoid(sst, grid.points))
    if total <= 0:
        return 0.0
    return float(1.0 - trapezoid(sse, grid.points) / total)


def _partial(full: float, reduced: float) -> float:
    if reduced >= 1.0:
        return 0.0
    return float((full - reduced) / (1.0 - reduced))


def _values(obj: Union[Sequence[CurveLike], np.ndarray], grid: Grid) -> np.ndarray:
    return sample_many(obj, grid)


def _grid_of(Y: ResponseLike, grid: Optional[Grid]) -> Grid:
    if grid is not None:
        return grid
    if isinstance(Y, np.ndarray) or not len(Y) or not isinstance(Y[0], Curve):
        raise InputError("A grid is required when curves are given as sampled values")
    return Y[0].grid


@dataclass
class ConcurrentFit:
    lag: int
    grid: Grid
    coefficients: Dict[str, CoefficientCurve]
    observed: np.ndarray
    fitted: np.ndarray
    total_r2: float
    partial_r2: Dict[str, float]
    sse: np.ndarray
    sst: np.ndarray
    dropped: Dict[str, int] = field(default_factory=dict)

    @property
    def residuals(self) -> np.ndarray:
        return self.observed - self.fitted

    def table(self) -> pd.DataFrame:
        frames = []
        for name, coef in self.coefficients.items():
            frames.append(
                pd.DataFrame(
                    {
                        "predictor": name,
                        "t": coef.days.astype(int),
                        "beta": coef.values,
                        "se": coef.se,
                        "significant": coef.significant_mask,
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)

    def r2_table(self) -> pd.DataFrame:
        rows = [{"lag": self.lag, "predictor": "total", "r2": self.total_r2}]
        rows.extend({"lag": self.lag, "predictor": k, "r2": v} for k, v in self.partial_r2.items())
        return pd.DataFrame(rows, columns=["lag", "predictor", "r2"])


def _design_columns(
    Ymat: np.ndarray,
    functional: Mapping[str, np.ndarray],
    scalars: Mapping[str, np.ndarray],
    d: Optional[np.ndarray],
    lag: int,
) -> Tuple[Dict[str, np.ndarray], Dict[str, List[str]]]:
    """Ordered design columns and the predictor groups used for partial R^2."""
    n, T = Ymat.shape
    span = T - lag
    columns: Dict[str, np.ndarray] = {"intercept": np.ones(n)}
    groups: Dict[str, List[str]] = {}
    if d is not None:
        d = np.asarray(d, dtype=float)
        if d.shape != (n,):
            raise ShapeError(f"Group dummy has {d.shape} values for {n} units")
        columns["intercept:d"] = d
        groups["d"] = ["intercept:d"]
    for name, values in functional.items():
        lagged = values[:, :span]
        columns[name] = lagged
        groups[name] = [name]
        if d is not None:
            columns[f"{name}:d"] = d[:, None] * lagged
            groups[name].append(f"{name}:d")
    for name, values in scalars.items():
        x = np.asarray(values, dtype=float)
        columns[name] = x
        groups[name] = [name]
        if d is not None:
            columns[f"{name}:d"] = d * x
            groups[name].append(f"{name}:d")
    return columns, groups


def concurrent_fit(
    Y: ResponseLike,
    X_fun: Optional[Mapping[str, Union[Sequence[CurveLike], np.ndarray]]] = None,
    X_scal: Optional[Mapping[str, Sequence[float]]] = None,
    d: Optional[Sequence[float]] = None,
    lag: int = 0,
    grid: Optional[Grid] = None,
    n_knots: int = 21,
    degree: int = 3,
    lambda_grid: Optional[Sequence[float]] = None,
) -> ConcurrentFit:
    """Lagged concurrent regression y(t) ~ {1, d, X_m(t - lag), d X_m(t - lag), x_j, d x_j} on t in [lag, c].

    Coefficients are estimated by ordinary least squares at every grid
    point and then smoothed (per coefficient, GCV-selected lambda) on a
    basis over the truncated domain. R^2 values use the unsmoothed fit.
    """
    grid = _grid_of(Y, grid)
    Ymat = _values(Y, grid)
    n, T = Ymat.shape
    lag = int(lag)
    if lag < 0 or T - lag < 4:
        raise InputError(f"Lag {lag} leaves fewer than 4 grid points of a {T}-point domain")
    functional = {name: _values(values, grid) for name, values in (X_fun or {}).items()}
    for name, values in functional.items():
        if values.shape[0] != n:
            raise ShapeError(f"Functional predictor {name} has {values.shape[0]} curves for {n} responses")
    scalars = {name: np.asarray(v, dtype=float) for name, v in (X_scal or {}).items()}
    dummy = None if d is None else np.asarray(d, dtype=float)

    observed = Ymat[:, lag:]
    trunc = grid.truncate(lag)
    columns, groups = _design_columns(Ymat, functional, scalars, dummy, lag)
    full = _pointwise_ols(observed, columns)
    total = integrated_r2(full.sse, full.sst, trunc)

    partial_r2: Dict[str, float] = {}
    for group, members in groups.items():
        reduced_cols = {k: v for k, v in columns.items() if k not in members}
        reduced = _pointwise_ols(observed, reduced_cols)
        partial_r2[group] = _partial(total, integrated_r2(reduced.sse, reduced.sst, trunc))

    basis = BasisSystem.for_grid(trunc, n_knots=n_knots, degree=degree)
    coefficients: Dict[str, CoefficientCurve] = {}
    for k, name in enumerate(full.names):
        smoothed = smooth_collection(full.coefs[k][None, :], basis, lambda_grid, trunc)
        coefficients[name] = CoefficientCurve(
            name=name,
            beta=smoothed.fits[0].curve,
            raw=full.coefs[k],
            se=full.se[k],
            offset=lag,
        )
    LOGGER.debug("Concurrent fit at lag %d: total R2=%.4f", lag, total)
    return ConcurrentFit(
        lag=lag,
        grid=trunc,
        coefficients=coefficients,
        observed=observed,
        fitted=full.fitted,
        total_r2=total,
        partial_r2=partial_r2,
        sse=full.sse,
        sst=full.sst,
        dropped={k: v for k, v in full.dropped.items() if v},
    )


@dataclass
class MarginalFunctionalFit:
    feature: str
    beta: CoefficientCurve
    intercept: CoefficientCurve
    r2: float


def fos_marginal(
    Y: ResponseLike,
    x: Sequence[float],
    feature: str = "x",
    grid: Optional[Grid] = None,
    n_knots: int = 21,
    degree: int = 3,
    lambda_grid: Optional[Sequence[float]] = None,
) -> MarginalFunctionalFit:
    """Pointwise simple regression of the response curves on one scalar covariate."""
    x = np.asarray(x, dtype=float)
    if np.ptp(x) <= 1e-12:
        raise InputError(f"Covariate {feature} has zero variance")
    fit = concurrent_fit(Y, None, {feature: x}, None, 0, grid, n_knots, degree, lambda_grid)
    return MarginalFunctionalFit(
        feature=feature,
        beta=fit.coefficients[feature],
        intercept=fit.coefficients["intercept"],
        r2=fit.total_r2,
    )


def fos_joint(
    Y: ResponseLike,
    scalars: Mapping[str, Sequence[float]],
    grid: Optional[Grid] = None,
    n_knots: int = 21,
    degree: int = 3,
    lambda_grid: Optional[Sequence[float]] = None,
) -> ConcurrentFit:
    """Joint function-on-scalar fit: a concurrent fit with no functional predictors and no dummy."""
    return concurrent_fit(Y, None, scalars, None, 0, grid, n_knots, degree, lambda_grid)


@dataclass
class LagSweep:
    fits: Dict[int, ConcurrentFit]

    def r2_summary(self) -> pd.DataFrame:
        """Per-lag total and partial R^2 plus their average over the sweep (lag = "mean")."""
        frame = pd.concat([fit.r2_table() for fit in self.fits.values()], ignore_index=True)
        frame["lag"] = frame["lag"].astype(str)
        means = frame.groupby("predictor", sort=False)["r2"].mean().reset_index()
        means.insert(0, "lag", "mean")
        return pd.concat([frame, means], ignore_index=True)

    def mean_r2(self, predictor: str = "total") -> float:
        if predictor == "total":
            return float(np.mean([f.total_r2 for f in self.fits.values()]))
        return float(np.mean([f.partial_r2[predictor] for f in self.fits.values()]))

    def beams(self) -> pd.DataFrame:
        """Every lag's coefficient curves stacked: one row per (predictor, lag, day)."""
        frames = []
        for lag, fit in self.fits.items():
            for name, coef in fit.coefficients.items():
                frames.append(
                    pd.DataFrame(
                        {
                            "predictor": name,
                            "lag": lag,
                            "t": coef.days.astype(int),
                            "beta": coef.values,
                            "raw_beta": coef.raw,
                            "se": coef.se,
                            "lower": coef.lower,
                            "upper": coef.upper,
                            "significant": coef.significant_mask,
                        }
                    )
                )
        return pd.concat(frames, ignore_index=True)


def lag_sweep(
    Y: ResponseLike,
    X_fun: Optional[Mapping[str, Union[Sequence[CurveLike], np.ndarray]]] = None,
    X_scal: Optional[Mapping[str, Sequence[float]]] = None,
    d: Optional[Sequence[float]] = None,
    lags: Sequence[int] = tuple(range(15, 25)),
    grid: Optional[Grid] = None,
    n_knots: int = 21,
    degree: int = 3,
    lambda_grid: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> LagSweep:
    """One concurrent fit per lag; fits are independent and may run in parallel."""
    if not len(lags):
        raise InputError("Lag sweep needs at least one lag")
    grid = _grid_of(Y, grid)
    Ymat = _values(Y, grid)
    functional = {name: _values(values, grid) for name, values in (X_fun or {}).items()}
    fits = Parallel(n_jobs=max(1, int(workers)))(
        delayed(concurrent_fit)(Ymat, functional, X_scal, d, int(lag), grid, n_knots, degree, lambda_grid)
        for lag in lags
    )
    LOGGER.info("Lag sweep over %d lags (%d..%d) completed", len(lags), min(lags), max(lags))
    return LagSweep({int(lag): fit for lag, fit in zip(lags, fits)})


def collinearity_grid(
    functional: Mapping[str, Union[Sequence[CurveLike], np.ndarray]],
    scalars: Optional[Mapping[str, Sequence[float]]] = None,
    grid: Optional[Grid] = None,
) -> pd.DataFrame:
    """Integrated R^2 of each functional variable regressed (lag 0) on each functional and scalar variable."""
    first = next(iter(functional.values()), None)
    if first is None:
        raise InputError("Collinearity grid needs at least one functional variable")
    grid = _grid_of(first, grid)
    fun = {name: _values(values, grid) for name, values in functional.items()}
    scal = {name: np.asarray(v, dtype=float) for name, v in (scalars or {}).items()}
    columns = list(fun) + list(scal)
    rows = []
    for row_name, response in fun.items():
        record = {"variable": row_name}
        for col_name in columns:
            if col_name == row_name:
                record[col_name] = 1.0
                continue
            predictor = fun[col_name] if col_name in fun else scal[col_name]
            fit = _pointwise_ols(response, {"intercept": np.ones(response.shape[0]), col_name: predictor})
            record[col_name] = integrated_r2(fit.sse, fit.sst, grid)
        rows.append(record)
    return pd.DataFrame(rows, columns=["variable"] + columns)
