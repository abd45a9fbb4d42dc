"""CSV ingestion and validation.

Loads the five required input tables (plus the optional region-level
comparison tables) into an :class:`InputBundle`, checking headers, unit
keys, duplicates and numeric cells. Problems are reported with the file,
row and column that caused them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import COVARIATE_COLUMNS, MOBILITY_CATEGORIES, RunConfig, WaveConfig
from .errors import ValidationError
from .fda.smoothing import interpolate_missing
from .utils import file_sha256

LOGGER = logging.getLogger(__name__)

HEADERS = {
    "deaths": ["unit", "date", "deaths"],
    "baseline": ["unit", "day_of_year", "mean_deaths_2015_2019"],
    "population": ["unit", "population"],
    "mobility": ["unit", "date", "category", "pct_change"],
    "covariates": ["unit", *COVARIATE_COLUMNS],
    "regions": ["unit", "region"],
    "region_deaths": ["region", "date", "deaths"],
    "unit_cases": ["unit", "date", "cases"],
    "region_cases": ["region", "date", "cases"],
}

KEY_COLUMNS = {"unit", "region", "category"}


def reference_day_of_year(dates: pd.DatetimeIndex) -> Tuple[np.ndarray, np.ndarray]:
    """Baseline keys of each date on the non-leap calendar (1 = Jan 1, 60 = Mar 1, 365 = Dec 31).

    Returns two key arrays whose baseline values are averaged; they differ
    only on 29 February, which takes the mean of 28 February and 1 March.
    """
    dates = pd.DatetimeIndex(dates)
    after_leap_day = np.asarray(dates.is_leap_year & (dates.month > 2))
    hi = dates.dayofyear.to_numpy() - after_leap_day.astype(int)
    leap_day = np.asarray((dates.month == 2) & (dates.day == 29))
    lo = np.where(leap_day, hi - 1, hi)
    return lo.astype(int), hi.astype(int)


def _file_row(index: int) -> int:
    """Line number in the CSV of a zero-based data row (header is line 1)."""
    return int(index) + 2


def read_table(path: str, kind: str) -> pd.DataFrame:
    """Read one input CSV with string keys; headers must contain the expected columns."""
    expected = HEADERS[kind]
    if not Path(path).exists():
        raise ValidationError(f"Input file for '{kind}' not found", path=path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[""])
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ValidationError(f"Cannot parse {kind} file: {exc}", path=path) from exc
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in expected if c not in frame.columns]
    if missing:
        raise ValidationError(f"Missing header(s) {missing}; expected {expected}", path=path, column=missing[0])
    extra = [c for c in frame.columns if c not in expected]
    if extra:
        LOGGER.warning("%s: ignoring unexpected column(s) %s", path, extra)
    frame = frame[expected].copy()
    for column in expected:
        if column in KEY_COLUMNS:
            blank = frame[column].isna() | (frame[column].str.strip() == "")
            if blank.any():
                raise ValidationError("Empty key cell", path=path, row=_file_row(np.flatnonzero(blank)[0]), column=column)
            frame[column] = frame[column].str.strip()
        elif column == "date":
            frame[column] = _parse_dates(frame[column], path)
        else:
            frame[column] = _parse_numbers(frame[column], path, column)
    return frame


def _parse_numbers(values: pd.Series, path: str, column: str) -> pd.Series:
    parsed = pd.to_numeric(values, errors="coerce")
    bad = parsed.isna() & values.notna()
    if bad.any():
        pos = int(np.flatnonzero(bad.to_numpy())[0])
        raise ValidationError(f"Non-numeric value {values.iloc[pos]!r}", path=path, row=_file_row(pos), column=column)
    return parsed.astype(float)


def _parse_dates(values: pd.Series, path: str) -> pd.Series:
    parsed = pd.to_datetime(values, format="%Y-%m-%d", errors="coerce")
    bad = parsed.isna()
    if bad.any():
        pos = int(np.flatnonzero(bad.to_numpy())[0])
        raise ValidationError(f"Unparseable ISO date {values.iloc[pos]!r}", path=path, row=_file_row(pos), column="date")
    return parsed


def _check_duplicates(frame: pd.DataFrame, keys: Sequence[str], path: str) -> None:
    dup = frame.duplicated(subset=list(keys), keep="first")
    if dup.any():
        pos = int(np.flatnonzero(dup.to_numpy())[0])
        row = frame.iloc[pos]
        label = ", ".join(f"{k}={row[k].date() if k == 'date' else row[k]}" for k in keys)
        raise ValidationError(f"Duplicate row ({label})", path=path, row=_file_row(pos))


def _check_units(frame: pd.DataFrame, known: Sequence[str], path: str, column: str = "unit") -> None:
    unknown = ~frame[column].isin(set(known))
    if unknown.any():
        pos = int(np.flatnonzero(unknown.to_numpy())[0])
        raise ValidationError(f"Unknown {column} key {frame[column].iloc[pos]!r}", path=path, row=_file_row(pos), column=column)


def _check_missing_values(frame: pd.DataFrame, column: str, path: str) -> None:
    nan = frame[column].isna()
    if nan.any():
        pos = int(np.flatnonzero(nan.to_numpy())[0])
        raise ValidationError("Missing value", path=path, row=_file_row(pos), column=column)


@dataclass
class ComparisonInputs:
    unit_region: Dict[str, str]
    region_deaths: Optional[pd.DataFrame] = None
    unit_cases: Optional[pd.DataFrame] = None
    region_cases: Optional[pd.DataFrame] = None


@dataclass
class InputBundle:
    units: List[str]
    deaths: pd.DataFrame
    baseline: pd.DataFrame
    population: Dict[str, float]
    mobility: pd.DataFrame
    covariates: pd.DataFrame
    imputed_cells: List[Tuple[str, str]] = field(default_factory=list)
    comparison: Optional[ComparisonInputs] = None
    checksums: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: RunConfig) -> "InputBundle":
        paths = config.inputs
        LOGGER.info("Loading input tables from %s", Path(paths.deaths).parent)

        population = read_table(paths.population, "population")
        _check_duplicates(population, ["unit"], paths.population)
        _check_missing_values(population, "population", paths.population)
        bad = population["population"] <= 0
        if bad.any():
            pos = int(np.flatnonzero(bad.to_numpy())[0])
            raise ValidationError("Population must be positive", path=paths.population, row=_file_row(pos), column="population")
        units = sorted(population["unit"])

        deaths = read_table(paths.deaths, "deaths")
        _check_units(deaths, units, paths.deaths)
        _check_duplicates(deaths, ["unit", "date"], paths.deaths)
        negative = deaths["deaths"] < 0
        if negative.any():
            pos = int(np.flatnonzero(negative.to_numpy())[0])
            raise ValidationError("Negative death count", path=paths.deaths, row=_file_row(pos), column="deaths")

        baseline = read_table(paths.baseline, "baseline")
        _check_units(baseline, units, paths.baseline)
        _check_duplicates(baseline, ["unit", "day_of_year"], paths.baseline)
        _check_missing_values(baseline, "day_of_year", paths.baseline)
        out_of_range = ~baseline["day_of_year"].between(1, 366)
        if out_of_range.any():
            pos = int(np.flatnonzero(out_of_range.to_numpy())[0])
            raise ValidationError("day_of_year must lie in 1..366", path=paths.baseline, row=_file_row(pos), column="day_of_year")

        mobility = read_table(paths.mobility, "mobility")
        _check_units(mobility, units, paths.mobility)
        _check_duplicates(mobility, ["unit", "date", "category"], paths.mobility)
        unknown_cat = ~mobility["category"].isin(MOBILITY_CATEGORIES)
        if unknown_cat.any():
            LOGGER.warning("%s: ignoring %d row(s) with categories outside %s",
                           paths.mobility, int(unknown_cat.sum()), list(MOBILITY_CATEGORIES))
            mobility = mobility[~unknown_cat].reset_index(drop=True)

        covariates = read_table(paths.covariates, "covariates")
        _check_units(covariates, units, paths.covariates)
        _check_duplicates(covariates, ["unit"], paths.covariates)
        absent = sorted(set(units) - set(covariates["unit"]))
        if absent:
            raise ValidationError(f"Covariates missing for unit(s) {absent}", path=paths.covariates)
        covariates, imputed = impute_covariates(covariates.set_index("unit").loc[units], paths.covariates)

        bundle = cls(
            units=units,
            deaths=deaths,
            baseline=baseline,
            population=dict(zip(population["unit"], population["population"].astype(float))),
            mobility=mobility,
            covariates=covariates,
            imputed_cells=imputed,
            comparison=_load_comparison(config, units),
            checksums={
                name: file_sha256(getattr(paths, name))
                for name in HEADERS
                if getattr(paths, name, None) and Path(getattr(paths, name)).exists()
            },
        )
        for wave in config.waves:
            bundle.check_coverage(wave)
        LOGGER.info("Loaded %d units, %d death rows, %d mobility rows", len(units), len(deaths), len(mobility))
        return bundle

    def check_coverage(self, wave: WaveConfig) -> None:
        """Every unit must have deaths and mobility observations spanning the wave."""
        for name, frame in (("deaths", self.deaths), ("mobility", self.mobility)):
            span = frame.groupby("unit")["date"].agg(["min", "max"])
            short = [u for u in self.units if u not in span.index or span.loc[u, "min"] > wave.start or span.loc[u, "max"] < wave.end]
            if short:
                raise ValidationError(f"{name} do not cover wave {wave.wave_id} ({wave.start_date}..{wave.end_date}) for unit(s) {short}")
        if "pct_change" in self.mobility:
            categories = set(self.mobility["category"])
            missing = [c for c in MOBILITY_CATEGORIES if c not in categories]
            if missing:
                LOGGER.warning("No mobility rows for categories %s", missing)

    def _daily_matrix(self, frame: pd.DataFrame, value: str, wave: WaveConfig, label: str) -> np.ndarray:
        inside = frame[(frame["date"] >= wave.start) & (frame["date"] <= wave.end)]
        table = inside.pivot(index="unit", columns="date", values=value).reindex(index=self.units, columns=wave.dates)
        rows = [interpolate_missing(table.loc[u].to_numpy(dtype=float), f"{label} {u} {wave.wave_id}") for u in self.units]
        return np.vstack(rows)

    def deaths_matrix(self, wave: WaveConfig) -> np.ndarray:
        return self._daily_matrix(self.deaths, "deaths", wave, "deaths")

    def baseline_matrix(self, wave: WaveConfig) -> np.ndarray:
        """2015-2019 mean deaths aligned to the wave's calendar days by month and day."""
        lo, hi = reference_day_of_year(wave.dates)
        table = self.baseline.pivot(index="unit", columns="day_of_year", values="mean_deaths_2015_2019")
        table = table.reindex(index=self.units, columns=np.arange(1, 367))
        rows = []
        for unit in self.units:
            full = table.loc[unit].to_numpy(dtype=float)
            needed = 0.5 * (full[lo - 1] + full[hi - 1])
            if np.isnan(needed).any():
                full = interpolate_missing(full, f"baseline {unit}")
                needed = 0.5 * (full[lo - 1] + full[hi - 1])
            rows.append(needed)
        return np.vstack(rows)

    def mobility_matrix(self, wave: WaveConfig, category: str) -> np.ndarray:
        frame = self.mobility[self.mobility["category"] == category]
        if frame.empty:
            raise ValidationError(f"No mobility rows for category '{category}'")
        return self._daily_matrix(frame, "pct_change", wave, f"mobility[{category}]")

    def population_vector(self) -> np.ndarray:
        return np.array([self.population[u] for u in self.units], dtype=float)


def impute_covariates(table: pd.DataFrame, path: str = "covariates") -> Tuple[pd.DataFrame, List[Tuple[str, str]]]:
    """Fill each missing covariate cell with its column mean, warning once per cell."""
    table = table.copy()
    imputed: List[Tuple[str, str]] = []
    for column in table.columns:
        missing = table[column].isna()
        if not missing.any():
            continue
        if missing.all():
            raise ValidationError("Every value is missing", path=path, column=column)
        mean = float(table[column].mean())
        for unit in table.index[missing]:
            LOGGER.warning("%s: imputing %s for unit %s with the column mean %.6g", path, column, unit, mean)
            imputed.append((str(unit), column))
        table.loc[missing, column] = mean
    return table, imputed


def _load_comparison(config: RunConfig, units: Sequence[str]) -> Optional[ComparisonInputs]:
    paths = config.inputs
    if not paths.has_comparison:
        return None
    regions = read_table(paths.regions, "regions")
    _check_duplicates(regions, ["unit"], paths.regions)
    _check_units(regions, units, paths.regions)
    mapping = dict(zip(regions["unit"], regions["region"]))
    known_regions = sorted(set(mapping.values()))

    def load(name: str, keys: List[str], key_column: str) -> Optional[pd.DataFrame]:
        path = getattr(paths, name)
        if path is None:
            return None
        frame = read_table(path, name)
        _check_units(frame, known_regions if key_column == "region" else units, path, key_column)
        _check_duplicates(frame, keys, path)
        return frame

    return ComparisonInputs(
        unit_region=mapping,
        region_deaths=load("region_deaths", ["region", "date"], "region"),
        unit_cases=load("unit_cases", ["unit", "date"], "unit"),
        region_cases=load("region_cases", ["region", "date"], "region"),
    )


def ingest(config: RunConfig) -> InputBundle:
    return InputBundle.from_config(config)
