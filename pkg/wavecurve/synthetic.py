"""Synthetic epidemic waves with known structure.

Units are drawn from three severity families (mild, intermediate, hard
hit) whose excess-mortality waves differ in height; every unit's peak is
delayed by a known number of days. The writer produces the five input
CSVs (plus optional region-level comparison tables) and a matching JSON
configuration, so the whole pipeline can be exercised without real data.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import COVARIATE_COLUMNS, RunConfig, WaveConfig, load_config
from .fda.basis import Grid
from .ingest import reference_day_of_year
from .utils import rng_for, write_csv

LOGGER = logging.getLogger(__name__)

# peak heights of the differential mortality curve, per 100k inhabitants per day
FAMILY_HEIGHTS = {"W1": (0.6, 2.5, 6.0), "W2": (0.8, 2.0, 4.5)}
BASE_PEAK_DAY = 20
WAVE_WIDTH = 12.0
NOISE_PER_100K = 0.005


def wave_shape(days: Sequence[float], peak_day: float, height: float, width: float = WAVE_WIDTH) -> np.ndarray:
    """Gaussian bump: a single-peaked epidemic wave."""
    t = np.asarray(days, dtype=float)
    return height * np.exp(-0.5 * ((t - peak_day) / width) ** 2)


def family_curves(
    grid: Grid,
    heights: Sequence[float],
    delays: Sequence[int],
    peak_day: float = BASE_PEAK_DAY,
    width: float = WAVE_WIDTH,
) -> np.ndarray:
    """Sampled wave per (height, delay) pair; rows are units."""
    return np.vstack([wave_shape(grid.points, peak_day + d, h, width) for h, d in zip(heights, delays)])


@dataclass
class SyntheticBundle:
    config_path: Path
    families: Dict[str, int]
    delays: Dict[str, Dict[str, int]] = field(default_factory=dict)

    @property
    def units(self) -> List[str]:
        return sorted(self.families)

    def load(self) -> RunConfig:
        return load_config(str(self.config_path))


def _waves(wave_ids: Sequence[str]) -> List[WaveConfig]:
    defaults = {w.wave_id: w for w in RunConfig().waves}
    waves = []
    for wave_id in wave_ids:
        wave = defaults[wave_id]
        waves.append(WaveConfig(wave.wave_id, wave.start_date, wave.end_date, wave.restriction_date,
                                list(wave.peak_window), target_peak_day=None))
    return waves


def write_synthetic_bundle(
    directory: str,
    n_per_family: int = 10,
    seed: int = 7,
    wave_ids: Sequence[str] = ("W1", "W2"),
    with_comparison: bool = True,
    max_delay: int = 15,
    noise: float = NOISE_PER_100K,
    overrides: Optional[Dict[str, Any]] = None,
) -> SyntheticBundle:
    """Write inputs and ``config.json`` into ``directory``; returns the ground truth."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    waves = _waves(wave_ids)
    units = [f"U{i:03d}" for i in range(3 * n_per_family)]
    families = {u: i // n_per_family for i, u in enumerate(units)}
    rng = rng_for(seed, "synthetic")

    start = min(w.start for w in waves)
    end = max(w.end for w in waves)
    dates = pd.date_range(start, end, freq="D")
    population = {u: float(rng.integers(200_000, 1_500_000)) for u in units}
    doy = np.arange(1, 367)
    lo, hi = reference_day_of_year(dates)

    baseline_rows, death_rows, mobility_rows, case_rows = [], [], [], []
    delays: Dict[str, Dict[str, int]] = {w.wave_id: {} for w in waves}
    excess_by_unit = {u: np.zeros(dates.size) for u in units}
    cases_by_unit = {u: np.zeros(dates.size) for u in units}
    mobility_by_unit = {u: {"workplace": np.zeros(dates.size), "grocery_pharmacy": np.zeros(dates.size)} for u in units}

    for wave in waves:
        offset = int((wave.start - start).days)
        grid = Grid.daily(wave.n_days)
        for u in units:
            delay = int(rng.integers(0, max_delay + 1))
            delays[wave.wave_id][u] = delay
            height = FAMILY_HEIGHTS.get(wave.wave_id, FAMILY_HEIGHTS["W1"])[families[u]]
            excess = wave_shape(grid.points, BASE_PEAK_DAY + delay, height)
            span = slice(offset, offset + wave.n_days)
            excess_by_unit[u][span] += excess
            cases_by_unit[u][span] += 40.0 * excess
            drop = 20.0 + 15.0 * families[u]
            lockdown = -drop * (1.0 / (1.0 + np.exp(-(grid.points - wave.restriction_day) / 3.0)))
            for category, scale in (("workplace", 1.0), ("grocery_pharmacy", 0.6)):
                mobility_by_unit[u][category][span] += scale * lockdown + rng.normal(0.0, 2.0, wave.n_days)

    for u in units:
        pop = population[u]
        seasonal = 28.0 * (1.0 + 0.2 * np.cos(2.0 * np.pi * (doy - 15) / 365.0)) * pop / 1e6
        baseline_rows.append(pd.DataFrame({"unit": u, "day_of_year": doy, "mean_deaths_2015_2019": seasonal}))
        jitter = rng.normal(0.0, 1.0, dates.size) * noise
        deaths = 0.5 * (seasonal[lo - 1] + seasonal[hi - 1]) + (excess_by_unit[u] + jitter) * pop / 1e5
        death_rows.append(pd.DataFrame({"unit": u, "date": dates.strftime("%Y-%m-%d"),
                                        "deaths": np.clip(deaths, 0.0, None)}))
        for category, values in mobility_by_unit[u].items():
            mobility_rows.append(pd.DataFrame({"unit": u, "date": dates.strftime("%Y-%m-%d"),
                                               "category": category, "pct_change": values}))
        case_rows.append(pd.DataFrame({"unit": u, "date": dates.strftime("%Y-%m-%d"),
                                       "cases": cases_by_unit[u] * pop / 1e5}))

    write_csv(pd.concat(death_rows, ignore_index=True), root / "deaths.csv")
    write_csv(pd.concat(baseline_rows, ignore_index=True), root / "baseline.csv")
    write_csv(pd.DataFrame({"unit": units, "population": [population[u] for u in units]}), root / "population.csv")
    write_csv(pd.concat(mobility_rows, ignore_index=True), root / "mobility.csv")
    covariates = pd.DataFrame({"unit": units})
    for j, column in enumerate(COVARIATE_COLUMNS):
        covariates[column] = rng.normal(10.0 + 5.0 * j, 2.0 + j, len(units))
    write_csv(covariates, root / "covariates.csv")

    inputs: Dict[str, Any] = {
        "deaths": "deaths.csv",
        "baseline": "baseline.csv",
        "population": "population.csv",
        "mobility": "mobility.csv",
        "covariates": "covariates.csv",
    }
    if with_comparison:
        _write_comparison(root, units, death_rows, case_rows, baseline_rows)
        inputs.update(regions="regions.csv", region_deaths="region_deaths.csv",
                      unit_cases="unit_cases.csv", region_cases="region_cases.csv")

    config = RunConfig(waves=waves)
    payload = config.to_dict()
    payload["inputs"] = inputs
    payload["output_dir"] = "output"
    payload["stability"] = {"runs": 6, "min_fraction": 0.85, "workers": 1, "refine": False}
    payload["paths"] = {"n_lambdas": 25, "cv_folds": 3}
    payload["lag_min"], payload["lag_max"] = 15, 16
    payload["models"] = [m for m in payload["models"] if m["waves"] is None or set(m["waves"]) & set(wave_ids)]
    for key, value in (overrides or {}).items():
        payload[key] = value
    config_path = root / "config.json"
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    LOGGER.info("Synthetic bundle with %d units written to %s", len(units), root)
    return SyntheticBundle(config_path=config_path, families=families, delays=delays)


def _write_comparison(
    root: Path,
    units: List[str],
    death_rows: List[pd.DataFrame],
    case_rows: List[pd.DataFrame],
    baseline_rows: List[pd.DataFrame],
) -> None:
    """Three regions; official deaths report half the excess, regional cases match the unit sums."""
    regions = {u: f"R{i % 3}" for i, u in enumerate(units)}
    write_csv(pd.DataFrame({"unit": units, "region": [regions[u] for u in units]}), root / "regions.csv")
    deaths = pd.concat(death_rows, ignore_index=True)
    baseline = pd.concat(baseline_rows, ignore_index=True)
    lo, hi = reference_day_of_year(pd.DatetimeIndex(pd.to_datetime(deaths["date"])))
    lookup = baseline.set_index(["unit", "day_of_year"])["mean_deaths_2015_2019"]
    expected = 0.5 * (
        lookup.reindex(pd.MultiIndex.from_arrays([deaths["unit"], lo])).to_numpy()
        + lookup.reindex(pd.MultiIndex.from_arrays([deaths["unit"], hi])).to_numpy()
    )
    excess = deaths.assign(excess=deaths["deaths"].to_numpy() - expected, region=deaths["unit"].map(regions))
    official = excess.groupby(["region", "date"], sort=True)["excess"].sum().reset_index()
    official["deaths"] = 0.5 * official.pop("excess").clip(lower=0.0)
    write_csv(official[["region", "date", "deaths"]], root / "region_deaths.csv")
    cases = pd.concat(case_rows, ignore_index=True)
    write_csv(cases, root / "unit_cases.csv")
    regional = cases.assign(region=cases["unit"].map(regions)).groupby(["region", "date"], sort=True)["cases"].sum()
    write_csv(regional.reset_index()[["region", "date", "cases"]], root / "region_cases.csv")
