"""Run configuration for the wave analysis pipeline.

Defaults live in code and describe the two 2020 Italian waves; a JSON file
overrides any subset of them. The configuration round-trips through
``dataclasses.asdict`` so the exact settings of a run can be hashed and
written next to its artifacts.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .errors import ConfigError
from .utils import canonical_json

LOGGER = logging.getLogger(__name__)

MOBILITY_CATEGORIES = ("grocery_pharmacy", "workplace")
COVARIATE_COLUMNS = (
    "over65_pct",
    "adults_per_family_doctor",
    "beds_per_hospital",
    "students_per_classroom",
    "employees_per_firm",
    "pm10",
)
SCALAR_NAMES = ("a_bef", "pc1", *COVARIATE_COLUMNS)
WAVE_LENGTH_DAYS = 150


@dataclass
class WaveConfig:
    """One epidemic wave: a fixed-length calendar window and its restriction date."""

    wave_id: str
    start_date: str
    end_date: str
    restriction_date: str
    peak_window: List[int] = field(default_factory=lambda: [10, 100])
    target_peak_day: Optional[int] = None

    @property
    def start(self) -> pd.Timestamp:
        return pd.Timestamp(self.start_date)

    @property
    def end(self) -> pd.Timestamp:
        return pd.Timestamp(self.end_date)

    @property
    def n_days(self) -> int:
        return int((self.end - self.start).days) + 1

    @property
    def restriction_day(self) -> int:
        """Restriction date as a day index from the wave start."""
        return int((pd.Timestamp(self.restriction_date) - self.start).days)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, self.end, freq="D")

    def validate(self) -> List[str]:
        errors: List[str] = []
        try:
            start, end, restriction = self.start, self.end, pd.Timestamp(self.restriction_date)
        except (ValueError, TypeError) as exc:
            return [f"Wave {self.wave_id}: unparseable date ({exc})"]
        if (end - start).days != WAVE_LENGTH_DAYS - 1:
            errors.append(
                f"Wave {self.wave_id}: span must be {WAVE_LENGTH_DAYS} days, got {(end - start).days + 1}"
            )
        if not (start < restriction < end):
            errors.append(f"Wave {self.wave_id}: restriction date {self.restriction_date} is not inside the span")
        if len(self.peak_window) != 2 or self.peak_window[0] > self.peak_window[1]:
            errors.append(f"Wave {self.wave_id}: peak window must be [low, high], got {self.peak_window}")
        elif self.peak_window[0] < 0 or self.peak_window[1] > (end - start).days:
            errors.append(f"Wave {self.wave_id}: peak window {self.peak_window} exceeds the wave domain")
        return errors


@dataclass
class InputPaths:
    deaths: str = "deaths.csv"
    baseline: str = "baseline.csv"
    population: str = "population.csv"
    mobility: str = "mobility.csv"
    covariates: str = "covariates.csv"
    regions: Optional[str] = None
    region_deaths: Optional[str] = None
    unit_cases: Optional[str] = None
    region_cases: Optional[str] = None

    def resolve(self, base_dir: Path) -> "InputPaths":
        """Copy with relative paths anchored at ``base_dir``."""
        resolved = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None and not Path(value).is_absolute():
                value = str(base_dir / value)
            resolved[f.name] = value
        return InputPaths(**resolved)

    @property
    def has_comparison(self) -> bool:
        return self.regions is not None and (
            self.region_deaths is not None or (self.unit_cases is not None and self.region_cases is not None)
        )


@dataclass
class SmoothingSettings:
    n_knots: int = 21
    degree: int = 3
    lambda_min: float = 1e-6
    lambda_max: float = 1e6
    n_lambdas: int = 41
    shift_fill: str = "constant"
    areas_from: str = "unregistered"

    def lambda_grid(self) -> np.ndarray:
        return np.logspace(np.log10(self.lambda_min), np.log10(self.lambda_max), self.n_lambdas)


@dataclass
class PathSettings:
    n_lambdas: int = 100
    min_ratio: float = 1e-3
    spacing: str = "geometric"
    l2_ratio: float = 0.6
    loss: str = "sum"
    cv_folds: int = 5
    tol: float = 1e-8
    max_sweeps: int = 100_000
    fgen_tol: float = 1e-8
    fgen_max_sweeps: int = 10_000


@dataclass
class StabilitySettings:
    runs: int = 500
    min_fraction: float = 0.85
    workers: int = 1
    # entry points of subsample paths are taken on the grid unless set
    refine: bool = False


@dataclass
class ClusteringSettings:
    k_max: int = 10
    hartigan_threshold: float = 10.0


@dataclass
class ModelSpec:
    """A lagged concurrent model: functional predictors, scalar covariates and the group dummy."""

    name: str
    functional: List[str] = field(default_factory=list)
    scalars: List[str] = field(default_factory=list)
    use_dummy: bool = True
    waves: Optional[List[str]] = None

    def applies_to(self, wave_id: str) -> bool:
        return self.waves is None or wave_id in self.waves


def _default_waves() -> List[WaveConfig]:
    return [
        WaveConfig("W1", "2020-02-25", "2020-07-23", "2020-03-09", target_peak_day=20),
        WaveConfig("W2", "2020-10-01", "2021-02-27", "2020-11-04", target_peak_day=33),
    ]


def _default_models() -> List[ModelSpec]:
    return [
        ModelSpec("A", functional=["workplace"], scalars=["pc1"]),
        ModelSpec("B", functional=["workplace", "grocery_pharmacy"], scalars=["a_bef", "pc1"], waves=["W2"]),
    ]


@dataclass
class RunConfig:
    waves: List[WaveConfig] = field(default_factory=_default_waves)
    inputs: InputPaths = field(default_factory=InputPaths)
    smoothing: SmoothingSettings = field(default_factory=SmoothingSettings)
    paths: PathSettings = field(default_factory=PathSettings)
    stability: StabilitySettings = field(default_factory=StabilitySettings)
    clustering: ClusteringSettings = field(default_factory=ClusteringSettings)
    models: List[ModelSpec] = field(default_factory=_default_models)
    lag_min: int = 15
    lag_max: int = 24
    seed: int = 20200225
    output_dir: str = "output"

    @property
    def lags(self) -> List[int]:
        return list(range(self.lag_min, self.lag_max + 1))

    def wave(self, wave_id: str) -> WaveConfig:
        for wave in self.waves:
            if wave.wave_id == wave_id:
                return wave
        raise ConfigError(f"Unknown wave '{wave_id}'; configured: {[w.wave_id for w in self.waves]}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode("utf-8")).hexdigest()

    def validate(self) -> List[str]:
        """Consistency problems, one message each; empty when the config is usable."""
        errors: List[str] = []
        if not self.waves:
            errors.append("At least one wave must be configured")
        ids = [w.wave_id for w in self.waves]
        if len(ids) != len(set(ids)):
            errors.append("Duplicate wave ids")
        for wave in self.waves:
            errors.extend(wave.validate())
        if self.lag_min < 0 or self.lag_max < self.lag_min:
            errors.append(f"Lag range [{self.lag_min}, {self.lag_max}] is empty or negative")
        elif self.lag_max > WAVE_LENGTH_DAYS - 5:
            errors.append(f"Largest lag {self.lag_max} leaves too short a domain")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            errors.append("A fixed integer seed is required")
        if self.smoothing.shift_fill not in ("constant", "zero"):
            errors.append(f"Unknown shift fill '{self.smoothing.shift_fill}'")
        if self.smoothing.areas_from not in ("registered", "unregistered"):
            errors.append(f"Unknown area source '{self.smoothing.areas_from}'")
        if self.smoothing.n_lambdas < 1 or self.smoothing.lambda_min <= 0:
            errors.append("Smoothing lambda grid must be nonempty and positive")
        if self.paths.spacing not in ("geometric", "linear"):
            errors.append(f"Unknown path spacing '{self.paths.spacing}'")
        if self.paths.loss not in ("sum", "mean"):
            errors.append(f"Unknown loss normalization '{self.paths.loss}'")
        if not 0 < self.paths.min_ratio < 1:
            errors.append("Path min_ratio must lie in (0, 1)")
        if self.paths.cv_folds < 2:
            errors.append("Cross-validation needs at least 2 folds")
        if self.stability.runs < 1 or not 0 < self.stability.min_fraction <= 1:
            errors.append("Stability needs runs >= 1 and min_fraction in (0, 1]")
        if self.clustering.k_max < 1:
            errors.append("k_max must be at least 1")
        names = [m.name for m in self.models]
        if len(names) != len(set(names)):
            errors.append("Duplicate model names")
        for model in self.models:
            unknown = [c for c in model.functional if c not in MOBILITY_CATEGORIES]
            if unknown:
                errors.append(f"Model {model.name}: unknown mobility categories {unknown}")
            unknown = [s for s in model.scalars if s not in SCALAR_NAMES]
            if unknown:
                errors.append(f"Model {model.name}: unknown scalar covariates {unknown}")
            if not model.functional and not model.scalars:
                errors.append(f"Model {model.name}: no predictors")
        return errors

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        try:
            base = cls()
            return cls(
                waves=[WaveConfig(**w) for w in data["waves"]] if "waves" in data else base.waves,
                inputs=InputPaths(**data.get("inputs", {})),
                smoothing=SmoothingSettings(**data.get("smoothing", {})),
                paths=PathSettings(**data.get("paths", {})),
                stability=StabilitySettings(**data.get("stability", {})),
                clustering=ClusteringSettings(**data.get("clustering", {})),
                models=[ModelSpec(**m) for m in data["models"]] if "models" in data else base.models,
                lag_min=int(data.get("lag_min", base.lag_min)),
                lag_max=int(data.get("lag_max", base.lag_max)),
                seed=data.get("seed", base.seed),
                output_dir=data.get("output_dir", base.output_dir),
            )
        except TypeError as exc:
            raise ConfigError(f"Unrecognized configuration entry: {exc}") from exc


def load_config(path: str) -> RunConfig:
    """Read a JSON config; relative input and output paths are anchored at the file's directory."""
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
    config = RunConfig.from_dict(data)
    base_dir = config_path.resolve().parent
    config.inputs = config.inputs.resolve(base_dir)
    if not Path(config.output_dir).is_absolute():
        config.output_dir = str(base_dir / config.output_dir)
    problems = config.validate()
    if problems:
        raise ConfigError("Invalid configuration: " + "; ".join(problems))
    LOGGER.info("Loaded run configuration from %s (%d waves)", path, len(config.waves))
    return config


def save_config(config: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, ensure_ascii=False)
    LOGGER.info("Saved run configuration to %s", path)
