"""Penalty paths, lambda_max-ratios and subsample stability, shared by the scalar and functional solvers.

A solver plugs in through two callables: ``solve(lam, warm)`` returning the
coefficients at ``lam`` (warm-started from ``warm``) and ``active(coefs)``
returning the boolean support per feature. Everything else (the lambda
grid, the first-entry bookkeeping and the bisection that sharpens each
entry point) is solver-agnostic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..errors import InputError
from ..utils import rng_for

LOGGER = logging.getLogger(__name__)

SolveFn = Callable[[float, Optional[np.ndarray]], np.ndarray]
ActiveFn = Callable[[np.ndarray], np.ndarray]

_AT_MAX_TOL = 1e-12


def lambda_grid(
    lam_max: float,
    n_points: int = 100,
    min_ratio: float = 1e-3,
    spacing: str = "geometric",
) -> np.ndarray:
    """Descending penalty grid from ``lam_max`` to ``min_ratio * lam_max``."""
    if n_points < 2:
        raise InputError("A path needs at least two penalty values")
    if lam_max <= 0:
        return np.zeros(n_points)
    if spacing == "geometric":
        return lam_max * np.logspace(0.0, np.log10(min_ratio), n_points)
    if spacing == "linear":
        return lam_max * np.linspace(1.0, min_ratio, n_points)
    raise InputError(f"Unknown path spacing '{spacing}'")


@dataclass
class PathFit:
    """Coefficients along a descending penalty grid plus each feature's entry point."""

    feature_names: List[str]
    lambdas: np.ndarray
    coefs: np.ndarray
    lambda_max: float
    entry_lambdas: np.ndarray
    l2_ratio: float

    @property
    def ratios(self) -> np.ndarray:
        if self.lambda_max <= 0:
            return np.zeros(len(self.feature_names))
        return self.entry_lambdas / self.lambda_max

    def ratio_table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "feature": self.feature_names,
                "lambda_entry": self.entry_lambdas,
                "lambda_max_ratio": self.ratios,
            }
        )


def trace_path(
    solve: SolveFn,
    active: ActiveFn,
    zero_scores: np.ndarray,
    lam_max: float,
    lambdas: np.ndarray,
    refine: bool = True,
    rel_tol: float = 1e-4,
    stop_when_all_active: bool = False,
):
    """Walk the grid with warm starts and record where every feature first enters.

    ``zero_scores`` are the per-feature optimality scores at the zero
    solution; features attaining ``lam_max`` enter at ratio exactly 1.
    Returns ``(coefs per grid point, entry lambda per feature)``.
    """
    p = zero_scores.size
    entry = np.zeros(p)
    entered = np.zeros(p, dtype=bool)
    if lam_max <= 0:
        return [solve(0.0, None) for _ in lambdas], entry
    at_max = zero_scores >= lam_max * (1.0 - _AT_MAX_TOL)
    entry[at_max] = lam_max
    entered |= at_max

    coefs: List[np.ndarray] = []
    warm: Optional[np.ndarray] = None
    prev_lam, prev_coef = float(lambdas[0]), None
    for lam in lambdas:
        lam = float(lam)
        coef = solve(lam, warm)
        coefs.append(coef)
        newly = active(coef) & ~entered
        for j in np.flatnonzero(newly):
            entry[j] = _bisect_entry(solve, active, j, prev_lam, lam, prev_coef, lam_max, rel_tol) if refine else lam
        entered |= newly
        warm = coef
        prev_lam, prev_coef = lam, coef
        if stop_when_all_active and entered.all():
            break
    return coefs, entry


def _bisect_entry(
    solve: SolveFn,
    active: ActiveFn,
    j: int,
    hi: float,
    lo: float,
    warm: Optional[np.ndarray],
    lam_max: float,
    rel_tol: float,
) -> float:
    """Largest penalty (to ``rel_tol * lam_max``) at which feature ``j`` is active, inside (lo, hi]."""
    if hi <= lo:
        return lo
    while (hi - lo) > rel_tol * lam_max:
        mid = 0.5 * (hi + lo)
        coef = solve(mid, warm)
        if active(coef)[j]:
            lo = mid
        else:
            hi = mid
            warm = coef
    return lo


@dataclass
class StabilitySummary:
    feature_names: List[str]
    ratios: np.ndarray
    sizes: np.ndarray
    runs: int
    skipped: int = 0
    notes: List[str] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return int(self.ratios.shape[0])

    @property
    def mean_ratios(self) -> np.ndarray:
        if self.completed == 0:
            return np.full(len(self.feature_names), np.nan)
        return self.ratios.mean(axis=0)

    def table(self) -> pd.DataFrame:
        sd = self.ratios.std(axis=0, ddof=1) if self.completed > 1 else np.full(len(self.feature_names), np.nan)
        return pd.DataFrame(
            {
                "feature": self.feature_names,
                "mean_ratio": self.mean_ratios,
                "sd_ratio": sd,
                "runs": self.runs,
                "completed": self.completed,
                "skipped": self.skipped,
            }
        )


def subsample_plan(
    n: int,
    runs: int,
    master_seed: int,
    label: str,
    min_fraction: float = 0.85,
    n_range: Optional[Sequence[int]] = None,
) -> List[np.ndarray]:
    """Sorted index subsets drawn without replacement.

    Sizes are uniform on ``n_range`` (inclusive), by default
    [floor(min_fraction * n), n]. Run ``r`` draws from its own stream, so any
    single run can be replayed.
    """
    if n_range is None:
        low, high = max(1, int(math.floor(min_fraction * n + 1e-9))), n
    else:
        low, high = int(n_range[0]), int(n_range[1])
    if not 1 <= low <= high <= n:
        raise InputError(f"Subsample size range [{low}, {high}] is not within [1, {n}]")
    plan = []
    for r in range(runs):
        rng = rng_for(master_seed, label, r)
        size = int(rng.integers(low, high + 1))
        plan.append(np.sort(rng.choice(n, size=size, replace=False)))
    return plan


def run_stability(
    task: Callable[[np.ndarray, np.ndarray], np.ndarray],
    X: np.ndarray,
    Y: np.ndarray,
    plan: Sequence[np.ndarray],
    feature_names: Sequence[str],
    workers: int = 1,
) -> StabilitySummary:
    """Apply ``task`` (X_sub, Y_sub) -> ratios to each planned subsample and stack the results."""
    p = len(feature_names)
    kept = [idx for idx in plan if idx.size >= p + 1]
    skipped = len(plan) - len(kept)
    notes = []
    if skipped:
        note = f"{skipped} stability run(s) skipped: subsample smaller than p + 1 = {p + 1}"
        LOGGER.warning(note)
        notes.append(note)
    if kept:
        results = Parallel(n_jobs=max(1, int(workers)))(delayed(task)(X[idx], Y[idx]) for idx in kept)
        ratios = np.vstack(results)
    else:
        ratios = np.empty((0, p))
    return StabilitySummary(
        feature_names=list(feature_names),
        ratios=ratios,
        sizes=np.array([idx.size for idx in kept], dtype=int),
        runs=len(plan),
        skipped=skipped,
        notes=notes,
    )


def cv_folds(n: int, folds: int, master_seed: int, label: str) -> np.ndarray:
    """Fold id per observation from a seeded permutation."""
    if n < folds:
        raise InputError(f"Cross-validation needs at least {folds} observations, got {n}")
    order = rng_for(master_seed, label).permutation(n)
    assignment = np.empty(n, dtype=int)
    assignment[order] = np.arange(n) % folds
    return assignment


def one_se_choice(lambdas: np.ndarray, errors: np.ndarray) -> tuple:
    """(lambda_min, lambda_1se) from a folds x lambdas held-out error matrix."""
    mean = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / np.sqrt(errors.shape[0]) if errors.shape[0] > 1 else np.zeros_like(mean)
    best = int(np.argmin(mean))
    within = np.flatnonzero(mean <= mean[best] + se[best])
    lam_1se = float(np.max(lambdas[within]))
    return float(lambdas[best]), lam_1se, mean, se
