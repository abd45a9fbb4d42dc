"""Per-unit features derived from curves and raw counts.

Differential mortality, restriction-split areas, peak ranks, lags, the
group dummy and the source-consistency ratios all live here. Everything is
a pure per-unit computation; degenerate cases are carried as flags.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats
from scipy.integrate import trapezoid

from .config import WaveConfig
from .errors import InputError, KeyedJoinError, ShapeError
from .fda.basis import Curve, CurveLike, Grid, sample

LOGGER = logging.getLogger(__name__)

PER_100K = 100_000.0


def differential_mortality(
    daily_deaths: Sequence[float],
    baseline: Sequence[float],
    population: float,
    scale: float = PER_100K,
) -> np.ndarray:
    """(deaths - baseline) / population, expressed per ``scale`` inhabitants."""
    deaths = np.asarray(daily_deaths, dtype=float)
    base = np.asarray(baseline, dtype=float)
    if deaths.shape != base.shape:
        raise ShapeError(f"Deaths {deaths.shape} and baseline {base.shape} are not aligned")
    if not population or population <= 0:
        raise InputError(f"Population must be positive, got {population}")
    if np.any(deaths < 0) or np.any(base < 0):
        raise InputError("Death counts and baselines must be nonnegative")
    return (deaths - base) / float(population) * scale


@dataclass(frozen=True)
class AreaFeatures:
    a_bef: float
    a_aft: float
    log_a_bef: Optional[float]
    log_a_aft: Optional[float]
    positive: bool

    @property
    def total(self) -> float:
        return self.a_bef + self.a_aft


def _restriction_day(restriction: Union[int, float, WaveConfig]) -> float:
    if isinstance(restriction, WaveConfig):
        return float(restriction.restriction_day)
    return float(restriction)


def area_split(
    curve: CurveLike,
    restriction: Union[int, float, WaveConfig],
    grid: Optional[Grid] = None,
) -> AreaFeatures:
    """Signed trapezoid areas of a curve before and after the restriction day.

    The restriction day is inserted as a grid node (linearly interpolated)
    so the two pieces add up to the whole-domain trapezoid area.
    """
    if grid is None:
        if not isinstance(curve, Curve):
            raise InputError("A grid is required for a sampled series")
        grid = curve.grid
    r = _restriction_day(restriction)
    pts = grid.points
    if not 0 < r < grid.domain_length:
        raise InputError(f"Restriction day {r} is not inside the domain [0, {grid.domain_length}]")
    values = sample(curve, grid)
    at_r = float(np.interp(r, pts, values))
    before = pts < r
    after = pts > r
    a_bef = float(trapezoid(np.append(values[before], at_r), np.append(pts[before], r)))
    a_aft = float(trapezoid(np.insert(values[after], 0, at_r), np.insert(pts[after], 0, r)))
    positive = a_bef > 0 and a_aft > 0
    return AreaFeatures(
        a_bef=a_bef,
        a_aft=a_aft,
        log_a_bef=float(np.log(a_bef)) if positive else None,
        log_a_aft=float(np.log(a_aft)) if positive else None,
        positive=positive,
    )


def area_table(curves: Mapping[str, Curve], restriction: Union[int, WaveConfig], wave_id: str) -> pd.DataFrame:
    rows = []
    for unit, curve in curves.items():
        areas = area_split(curve, restriction)
        if not areas.positive:
            LOGGER.warning(
                "%s unit %s: nonpositive area (before=%.4g, after=%.4g); excluded from log-scale models",
                wave_id, unit, areas.a_bef, areas.a_aft,
            )
        rows.append(
            {
                "unit": unit,
                "wave": wave_id,
                "a_bef": areas.a_bef,
                "a_aft": areas.a_aft,
                "log_a_bef": areas.log_a_bef if areas.positive else np.nan,
                "log_a_aft": areas.log_a_aft if areas.positive else np.nan,
                "flag": areas.positive,
            }
        )
    return pd.DataFrame(rows, columns=["unit", "wave", "a_bef", "a_aft", "log_a_bef", "log_a_aft", "flag"])


def _check_same_units(a: Mapping[str, float], b: Mapping[str, float], what: str) -> None:
    missing = set(a) ^ set(b)
    if missing:
        raise KeyedJoinError(f"{what} cover different units", missing)


def peak_rank_diff(peaks_w1: Mapping[str, float], peaks_w2: Mapping[str, float]) -> pd.DataFrame:
    """Ascending peak ranks per wave (ties averaged) and their difference, second minus first."""
    _check_same_units(peaks_w1, peaks_w2, "Peak tables")
    units = list(peaks_w1)
    rank_1 = stats.rankdata([peaks_w1[u] for u in units], method="average")
    rank_2 = stats.rankdata([peaks_w2[u] for u in units], method="average")
    return pd.DataFrame(
        {
            "unit": units,
            "peak_w1": [float(peaks_w1[u]) for u in units],
            "peak_w2": [float(peaks_w2[u]) for u in units],
            "rank_w1": rank_1,
            "rank_w2": rank_2,
            "rank_diff": rank_2 - rank_1,
        }
    )


@dataclass(frozen=True)
class LagRecord:
    unit: str
    lag: int
    peak_value: float
    flat: bool = False


def compute_lags(peak_table: pd.DataFrame, restriction: Union[int, WaveConfig]) -> List[LagRecord]:
    """Days from the restriction date to each unit's unshifted mortality peak."""
    r = int(round(_restriction_day(restriction)))
    flat = peak_table["flat_flag"] if "flat_flag" in peak_table else pd.Series(False, index=peak_table.index)
    return [
        LagRecord(unit=str(unit), lag=int(day) - r, peak_value=float(value), flat=bool(is_flat))
        for unit, day, value, is_flat in zip(peak_table["unit"], peak_table["peak_day"], peak_table["peak_value"], flat)
    ]


def group_dummy(severity_ranks: Mapping[str, int]) -> Dict[str, int]:
    """d = 0 for the mild cluster (severity rank 0), 1 for every harder-hit cluster."""
    dummy: Dict[str, int] = {}
    for unit, rank in severity_ranks.items():
        if isinstance(rank, bool) or not float(rank).is_integer() or rank < 0:
            raise InputError(f"Unit {unit}: unknown severity label {rank!r}")
        dummy[unit] = 0 if int(rank) == 0 else 1
    return dummy


def lags_table(records: Sequence[LagRecord], dummy: Mapping[str, int], wave_id: str) -> pd.DataFrame:
    missing = [r.unit for r in records if r.unit not in dummy]
    if missing:
        raise KeyedJoinError("Lag records reference units without a group label", missing)
    return pd.DataFrame(
        {
            "unit": [r.unit for r in records],
            "wave": wave_id,
            "lag": [r.lag for r in records],
            "peak_value": [r.peak_value for r in records],
            "d": [dummy[r.unit] for r in records],
            "flat_flag": [r.flat for r in records],
        }
    )


def lag_peak_summary(records: Sequence[LagRecord], dummy: Mapping[str, int]) -> Dict[str, float]:
    """Median lag and peak among d=1 units, plus the least-squares slope of peak on lag."""
    chosen = [r for r in records if dummy.get(r.unit) == 1 and not r.flat]
    summary: Dict[str, float] = {"n": len(chosen), "median_lag": np.nan, "median_peak": np.nan,
                                 "slope": np.nan, "intercept": np.nan}
    if not chosen:
        return summary
    lags = np.array([r.lag for r in chosen], dtype=float)
    peaks = np.array([r.peak_value for r in chosen], dtype=float)
    summary["median_lag"] = float(np.median(lags))
    summary["median_peak"] = float(np.median(peaks))
    if len(chosen) >= 2 and np.ptp(lags) > 0:
        fit = stats.linregress(lags, peaks)
        summary["slope"] = float(fit.slope)
        summary["intercept"] = float(fit.intercept)
    return summary


def wave_totals(frame: pd.DataFrame, key: str, value: str, wave: WaveConfig) -> pd.DataFrame:
    """Sum a daily long table (key, date, value) over the wave window."""
    dates = pd.to_datetime(frame["date"])
    inside = frame[(dates >= wave.start) & (dates <= wave.end)]
    totals = inside.groupby(key, sort=True)[value].sum().reset_index()
    totals.columns = [key, "total"]
    totals.insert(1, "wave", wave.wave_id)
    return totals


def aggregate_to_regions(unit_totals: pd.DataFrame, unit_region: Mapping[str, str]) -> pd.DataFrame:
    """Sum unit-level totals (unit, wave, total) into their regions."""
    missing = sorted(set(unit_totals["unit"]) - set(unit_region))
    if missing:
        raise KeyedJoinError("Units without a region assignment", missing)
    frame = unit_totals.assign(region=unit_totals["unit"].map(unit_region))
    return frame.groupby(["region", "wave"], sort=True)["total"].sum().reset_index()


def source_ratio_report(series_a: pd.DataFrame, series_b: pd.DataFrame, measure: str) -> pd.DataFrame:
    """Ratio a/b per (region, wave); zero denominators give a flagged NaN entry."""
    left = series_a.set_index(["region", "wave"])["total"]
    right = series_b.set_index(["region", "wave"])["total"]
    missing = set(left.index.get_level_values(0)) ^ set(right.index.get_level_values(0))
    if missing:
        raise KeyedJoinError(f"{measure}: sources cover different regions", missing)
    joined = pd.concat([left.rename("numerator"), right.rename("denominator")], axis=1, join="inner")
    joined = joined.sort_index().reset_index()
    zero = joined["denominator"] == 0
    joined["ratio"] = np.where(zero, np.nan, joined["numerator"] / joined["denominator"].where(~zero, 1.0))
    joined["flag"] = np.where(zero, "zero_denominator", "")
    for _, row in joined[zero].iterrows():
        LOGGER.warning("%s ratio for %s/%s has a zero denominator", measure, row["region"], row["wave"])
    joined.insert(2, "measure", measure)
    return joined[["region", "wave", "measure", "numerator", "denominator", "ratio", "flag"]]
