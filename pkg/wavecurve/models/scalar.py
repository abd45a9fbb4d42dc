"""Scalar-response models: standardization, elastic net, feature ranking and OLS diagnostics.

The elastic net minimizes

    1/2 ||y - X b||^2 + lambda1 ||b||_1 + lambda2/2 ||b||^2

with the squared loss unnormalized by default (``loss="mean"`` divides it by
n). It is solved by cyclic coordinate descent on the Gram matrix, so a
sweep costs O(p^2) regardless of n.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from ..errors import ConvergenceError, InputError, ShapeError, StandardizationError
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

LOGGER = logging.getLogger(__name__)

DEFAULT_L2_RATIO = 0.6
_ZERO_VARIANCE = 1e-12


@dataclass
class DesignMatrix:
    """Columns centred and scaled to unit sample standard deviation."""

    X: np.ndarray
    names: List[str]
    means: np.ndarray
    sds: np.ndarray

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])


def standardize(
    table: Union[pd.DataFrame, np.ndarray],
    names: Optional[Sequence[str]] = None,
) -> DesignMatrix:
    if isinstance(table, pd.DataFrame):
        names = list(names or table.columns)
        values = table[names].to_numpy(dtype=float)
    else:
        values = np.asarray(table, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        names = list(names or [f"x{j}" for j in range(values.shape[1])])
    if values.shape[0] < 2:
        raise StandardizationError("At least two observations are needed to standardize")
    if np.isnan(values).any():
        raise StandardizationError("Design contains missing values")
    means = values.mean(axis=0)
    sds = values.std(axis=0, ddof=1)
    flat = [n for n, s in zip(names, sds) if s <= _ZERO_VARIANCE]
    if flat:
        raise StandardizationError(f"Zero-variance column(s): {', '.join(flat)}")
    return DesignMatrix(X=(values - means) / sds, names=names, means=means, sds=sds)


def standardize_vector(y: Sequence[float]) -> np.ndarray:
    return standardize(np.asarray(y, dtype=float)[:, None], ["y"]).X[:, 0]


def _loss_scale(n: int, loss: str) -> float:
    if loss == "sum":
        return 1.0
    if loss == "mean":
        return float(n)
    raise InputError(f"Unknown loss normalization '{loss}'")


def lambda_max(X: np.ndarray, y: np.ndarray, loss: str = "sum") -> float:
    """Smallest lambda1 whose elastic-net solution is all zero: max_j |x_j' y|."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(X.T @ y))) / _loss_scale(X.shape[0], loss)


def enet_objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lambda1: float, lambda2: float) -> float:
    resid = y - X @ beta
    return float(0.5 * resid @ resid + lambda1 * np.sum(np.abs(beta)) + 0.5 * lambda2 * beta @ beta)


def duality_gap(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lambda1: float, lambda2: float) -> float:
    """Gap of the equivalent lasso on the augmented data [X; sqrt(lambda2) I], [y; 0]."""
    p = X.shape[1]
    X_aug = np.vstack([X, np.sqrt(lambda2) * np.eye(p)])
    y_aug = np.concatenate([y, np.zeros(p)])
    resid = y_aug - X_aug @ beta
    primal = 0.5 * resid @ resid + lambda1 * np.sum(np.abs(beta))
    corr = np.max(np.abs(X_aug.T @ resid)) if p else 0.0
    scale = 1.0 if corr <= lambda1 or corr == 0 else lambda1 / corr
    theta = scale * resid
    dual = 0.5 * y_aug @ y_aug - 0.5 * (y_aug - theta) @ (y_aug - theta)
    return float(primal - dual)


@dataclass
class ElasticNetFit:
    coefs: np.ndarray
    lambda1: float
    lambda2: float
    sweeps: int
    objective_trace: List[float] = field(default_factory=list)

    @property
    def active(self) -> np.ndarray:
        return self.coefs != 0


class CoordinateDescent:
    """Elastic-net coordinate descent on precomputed X'X and X'y, reusable across penalties."""

    def __init__(self, X: np.ndarray, y: np.ndarray, loss: str = "sum", tol: float = 1e-8, max_sweeps: int = 100_000):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ShapeError(f"Design {self.X.shape} and response {self.y.shape} do not match")
        self.scale = _loss_scale(self.X.shape[0], loss)
        self.gram = self.X.T @ self.X
        self.xty = self.X.T @ self.y
        self.yty = float(self.y @ self.y)
        self.tol = tol
        self.max_sweeps = max_sweeps

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    def _objective(self, beta: np.ndarray, l1: float, l2: float) -> float:
        quad = 0.5 * self.yty - self.xty @ beta + 0.5 * beta @ self.gram @ beta
        return float(quad + l1 * np.sum(np.abs(beta)) + 0.5 * l2 * beta @ beta)

    def fit(self, lambda1: float, lambda2: float, warm: Optional[np.ndarray] = None) -> ElasticNetFit:
        if lambda1 < 0 or lambda2 < 0:
            raise InputError(f"Penalties must be nonnegative, got ({lambda1}, {lambda2})")
        l1, l2 = lambda1 * self.scale, lambda2 * self.scale
        beta = np.zeros(self.p) if warm is None else np.array(warm, dtype=float)
        corr = self.xty - self.gram @ beta
        diag = np.diag(self.gram)
        trace = [self._objective(beta, l1, l2)]
        for sweep in range(1, self.max_sweeps + 1):
            max_change = 0.0
            for j in range(self.p):
                denom = diag[j] + l2
                rho = corr[j] + diag[j] * beta[j]
                new = 0.0 if denom <= 0 else np.sign(rho) * max(abs(rho) - l1, 0.0) / denom
                delta = new - beta[j]
                if delta != 0.0:
                    corr -= self.gram[:, j] * delta
                    beta[j] = new
                    max_change = max(max_change, abs(delta))
            trace.append(self._objective(beta, l1, l2))
            if max_change < self.tol:
                return ElasticNetFit(beta, float(lambda1), float(lambda2), sweep, trace)
        gap = duality_gap(self.X, self.y, beta, l1, l2)
        raise ConvergenceError("Elastic net did not converge", self.max_sweeps, gap)


def elastic_net_fit(
    X: np.ndarray,
    y: np.ndarray,
    lambda1: float,
    lambda2: float,
    loss: str = "sum",
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
    warm: Optional[np.ndarray] = None,
) -> ElasticNetFit:
    return CoordinateDescent(X, y, loss, tol, max_sweeps).fit(lambda1, lambda2, warm)


def path_with_ratios(
    X: np.ndarray,
    y: np.ndarray,
    grid_size: int = 100,
    min_ratio: float = 1e-3,
    l2_ratio: float = DEFAULT_L2_RATIO,
    spacing: str = "geometric",
    names: Optional[Sequence[str]] = None,
    loss: str = "sum",
    refine: bool = True,
    stop_when_all_active: bool = False,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
) -> PathFit:
    """Elastic-net path with lambda2 = l2_ratio * lambda1 and each feature's entry ratio."""
    solver = CoordinateDescent(X, y, loss, tol, max_sweeps)
    names = list(names or [f"x{j}" for j in range(solver.p)])
    lam_max = lambda_max(X, y, loss)
    lambdas = lambda_grid(lam_max, grid_size, min_ratio, spacing)

    def solve(lam: float, warm: Optional[np.ndarray]) -> np.ndarray:
        return solver.fit(lam, l2_ratio * lam, warm).coefs

    scores = np.abs(solver.xty) / solver.scale
    coefs, entry = trace_path(solve, lambda c: c != 0, scores, lam_max, lambdas, refine,
                              stop_when_all_active=stop_when_all_active)
    LOGGER.debug("Elastic-net path: lambda_max=%g, %d grid points", lam_max, len(coefs))
    return PathFit(
        feature_names=names,
        lambdas=lambdas[: len(coefs)],
        coefs=np.vstack(coefs) if coefs else np.empty((0, solver.p)),
        lambda_max=lam_max,
        entry_lambdas=entry,
        l2_ratio=l2_ratio,
    )


def _subsample_ratios(X: np.ndarray, y: np.ndarray, **path_kwargs) -> np.ndarray:
    design = standardize(X)
    response = standardize_vector(y)
    return path_with_ratios(design.X, response, stop_when_all_active=True, **path_kwargs).ratios


def stability(
    X: np.ndarray,
    y: np.ndarray,
    runs: int = 500,
    seed: int = 0,
    min_fraction: float = 0.85,
    n_range: Optional[Tuple[int, int]] = None,
    names: Optional[Sequence[str]] = None,
    workers: int = 1,
    label: str = "enet-stability",
    **path_kwargs,
) -> StabilitySummary:
    """Mean lambda_max-ratios over ``runs`` subsamples; each subsample is re-standardized."""
    X = np.asarray(X, dtype=float)
    names = list(names or [f"x{j}" for j in range(X.shape[1])])
    plan = subsample_plan(X.shape[0], runs, seed, label, min_fraction, n_range)
    task = partial(_subsample_ratios, **path_kwargs)
    summary = run_stability(task, X, np.asarray(y, dtype=float), plan, names, workers)
    LOGGER.info("Elastic-net stability: %d/%d runs completed", summary.completed, summary.runs)
    return summary


@dataclass
class CVResult:
    lambdas: np.ndarray
    mean_error: np.ndarray
    se_error: np.ndarray
    lambda_min: float
    lambda_1se: float
    coefs_min: np.ndarray
    coefs_1se: np.ndarray

    def curve_table(self) -> pd.DataFrame:
        return pd.DataFrame({"lambda1": self.lambdas, "cv_error": self.mean_error, "cv_se": self.se_error})


def cv_select(
    X: np.ndarray,
    y: np.ndarray,
    folds: int = 5,
    seed: int = 0,
    grid_size: int = 100,
    min_ratio: float = 1e-3,
    l2_ratio: float = DEFAULT_L2_RATIO,
    spacing: str = "geometric",
    loss: str = "sum",
    label: str = "enet-cv",
) -> CVResult:
    """K-fold held-out squared error along the full-data penalty grid."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    assignment = cv_folds(X.shape[0], folds, seed, label)
    lambdas = lambda_grid(lambda_max(X, y, loss), grid_size, min_ratio, spacing)
    errors = np.zeros((folds, lambdas.size))
    for k in range(folds):
        train, test = assignment != k, assignment == k
        solver = CoordinateDescent(X[train], y[train], loss)
        warm = None
        for i, lam in enumerate(lambdas):
            warm = solver.fit(float(lam), l2_ratio * float(lam), warm).coefs
            resid = y[test] - X[test] @ warm
            errors[k, i] = float(np.mean(resid ** 2))
    lam_min, lam_1se, mean, se = one_se_choice(lambdas, errors)
    full = CoordinateDescent(X, y, loss)
    return CVResult(
        lambdas=lambdas,
        mean_error=mean,
        se_error=se,
        lambda_min=lam_min,
        lambda_1se=lam_1se,
        coefs_min=full.fit(lam_min, l2_ratio * lam_min).coefs,
        coefs_1se=full.fit(lam_1se, l2_ratio * lam_1se).coefs,
    )


@dataclass(frozen=True)
class MarginalFit:
    feature: str
    beta: float
    intercept: float
    r2: float
    se: float
    p_value: float


def marginal_ols(y: Sequence[float], x: Sequence[float], feature: str = "x") -> MarginalFit:
    """Simple regression of y on one covariate (with intercept)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ShapeError("Covariate and response lengths differ")
    if np.ptp(x) <= _ZERO_VARIANCE:
        raise InputError(f"Covariate {feature} has zero variance")
    fit = stats.linregress(x, y)
    return MarginalFit(
        feature=feature,
        beta=float(fit.slope),
        intercept=float(fit.intercept),
        r2=float(fit.rvalue ** 2),
        se=float(fit.stderr),
        p_value=float(fit.pvalue),
    )


@dataclass
class PCAResult:
    names: List[str]
    loadings: np.ndarray
    scores: np.ndarray
    var_explained: float

    def loading_table(self) -> pd.DataFrame:
        return pd.DataFrame({"feature": self.names, "loading": self.loadings, "var_explained": self.var_explained})


def pca_first(table: Union[pd.DataFrame, np.ndarray], names: Optional[Sequence[str]] = None) -> PCAResult:
    """First principal component of the standardized covariates; largest-magnitude loading made positive."""
    design = standardize(table, names)
    _, singular, vt = np.linalg.svd(design.X, full_matrices=False)
    loadings = vt[0]
    if loadings[np.argmax(np.abs(loadings))] < 0:
        loadings = -loadings
    return PCAResult(
        names=design.names,
        loadings=loadings,
        scores=design.X @ loadings,
        var_explained=float(singular[0] ** 2 / np.sum(singular ** 2)),
    )


def _ols_r2(y: np.ndarray, X: np.ndarray) -> float:
    """R^2 of y on X with an intercept."""
    design = np.column_stack([np.ones(y.size), X]) if X.size else np.ones((y.size, 1))
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst <= 0:
        return 0.0
    return float(1.0 - resid @ resid / sst)


def vif(table: Union[pd.DataFrame, np.ndarray], names: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """1/(1 - R^2_j) per column; perfectly collinear columns get inf and ``infinite=True``."""
    if isinstance(table, pd.DataFrame):
        names = list(names or table.columns)
        values = table[names].to_numpy(dtype=float)
    else:
        values = np.asarray(table, dtype=float)
        names = list(names or [f"x{j}" for j in range(values.shape[1])])
    rows = []
    for j, name in enumerate(names):
        others = np.delete(values, j, axis=1)
        r2 = _ols_r2(values[:, j], others)
        tolerance = 1.0 - r2
        infinite = tolerance <= 1e-10
        if infinite:
            LOGGER.warning("Covariate %s is perfectly collinear with the others; VIF reported as inf", name)
        rows.append({"feature": name, "vif": np.inf if infinite else 1.0 / tolerance, "infinite": infinite})
    return pd.DataFrame(rows, columns=["feature", "vif", "infinite"])


def partial_r2(full_r2: float, reduced_r2: float) -> float:
    """(R^2 - R^2_red) / (1 - R^2_red)."""
    if reduced_r2 >= 1.0:
        return 0.0
    return float((full_r2 - reduced_r2) / (1.0 - reduced_r2))


def joint_ols(y: Sequence[float], table: pd.DataFrame, names: Optional[Sequence[str]] = None) -> Tuple[pd.DataFrame, float]:
    """Multiple regression with intercept: coefficients, SEs, t and p values, partial R^2 per predictor."""
    names = list(names or table.columns)
    X = table[names].to_numpy(dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n <= p + 1:
        raise InputError(f"Joint OLS needs more than {p + 1} observations, got {n}")
    design = np.column_stack([np.ones(n), X])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = n - p - 1
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.pinv(design.T @ design)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stat = coef / se
    p_value = 2.0 * stats.t.sf(np.abs(t_stat), dof)
    r2 = _ols_r2(y, X)
    partial = [np.nan] + [partial_r2(r2, _ols_r2(y, np.delete(X, j, axis=1))) for j in range(p)]
    frame = pd.DataFrame(
        {
            "feature": ["intercept"] + names,
            "coef": coef,
            "se": se,
            "t": t_stat,
            "p_value": p_value,
            "partial_r2": partial,
        }
    )
    return frame, r2


def correlation_matrix(table: pd.DataFrame) -> pd.DataFrame:
    """Pairwise Pearson correlations in long form (feature_a, feature_b, correlation)."""
    corr = table.corr(method="pearson")
    long = corr.stack().reset_index()
    long.columns = ["feature_a", "feature_b", "correlation"]
    return long


def marginal_table(y: Sequence[float], table: pd.DataFrame, names: Optional[Sequence[str]] = None) -> pd.DataFrame:
    rows: List[Dict[str, float]] = []
    for name in names or table.columns:
        fit = marginal_ols(y, table[name].to_numpy(dtype=float), name)
        rows.append({"feature": fit.feature, "beta": fit.beta, "intercept": fit.intercept,
                     "se": fit.se, "p_value": fit.p_value, "r2": fit.r2})
    return pd.DataFrame(rows, columns=["feature", "beta", "intercept", "se", "p_value", "r2"])
