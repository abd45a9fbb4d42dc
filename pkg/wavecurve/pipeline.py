"""Wave-by-wave orchestration of the full analysis.

A :class:`WavePipeline` takes a validated :class:`InputBundle` and a
:class:`RunConfig` and runs, for one wave at a time:

differential mortality -> smoothing -> registration -> mobility shifting ->
clustering -> area/lag features -> scalar elastic net -> functional models
-> lagged concurrent models.

Every stage writes its artifacts through an :class:`ArtifactWriter`; stages
that cannot run on the data at hand leave a notice in the manifest instead.
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd

from .clustering import ClusteringResult, cluster_curves, clusters_table, dendrogram_payload
from .config import COVARIATE_COLUMNS, MOBILITY_CATEGORIES, ModelSpec, RunConfig, WaveConfig
from .errors import InputError, StageError
from .fda.basis import BasisSystem, Curve, Grid
from .fda.registration import RegistrationResult, align_and_integrate, apply_shifts, shift_summary
from .fda.smoothing import smooth_collection
from .features import (
    aggregate_to_regions,
    area_table,
    compute_lags,
    differential_mortality,
    group_dummy,
    lag_peak_summary,
    lags_table,
    peak_rank_diff,
    source_ratio_report,
    wave_totals,
)
from .ingest import InputBundle
from .models.functional import (
    collinearity_grid,
    fgen_cv_select,
    fgen_path_ratios,
    fgen_stability,
    fos_joint,
    fos_marginal,
    lag_sweep,
)
from .models.scalar import (
    correlation_matrix,
    cv_select,
    joint_ols,
    marginal_table,
    path_with_ratios,
    pca_first,
    stability,
    standardize,
    standardize_vector,
    vif,
)
from .report import ArtifactWriter, curves_frame, path_frame

LOGGER = logging.getLogger(__name__)

SCALAR_FEATURES = ["a_bef", *COVARIATE_COLUMNS]
JOINT_FEATURES = ["a_bef", "pc1"]


@contextmanager
def stage(name: str, wave_id: Optional[str] = None) -> Iterator[None]:
    """Wrap any failure inside a stage into a StageError naming it."""
    LOGGER.info("Stage %s%s", name, f" [{wave_id}]" if wave_id else "")
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(f"{name}[{wave_id}]" if wave_id else name, exc) from exc


@dataclass
class WaveResult:
    """Everything one wave produced, kept in memory for cross-wave steps and tests."""

    wave: WaveConfig
    grid: Grid
    basis: BasisSystem
    mortality: Dict[str, Curve]
    registration: RegistrationResult
    mobility: Dict[str, Dict[str, Curve]] = field(default_factory=dict)
    clustering: Optional[ClusteringResult] = None
    dummy: Dict[str, int] = field(default_factory=dict)
    areas: Optional[pd.DataFrame] = None
    scalars: Optional[pd.DataFrame] = None
    stability: List[pd.DataFrame] = field(default_factory=list)
    r2_summaries: Dict[str, pd.DataFrame] = field(default_factory=dict)

    @property
    def wave_id(self) -> str:
        return self.wave.wave_id

    @property
    def peak_values(self) -> Dict[str, float]:
        table = self.registration.peak_table
        return dict(zip(table["unit"], table["peak_value"].astype(float)))

    @property
    def positive_units(self) -> List[str]:
        if self.areas is None:
            return []
        return list(self.areas.loc[self.areas["flag"].astype(bool), "unit"])


class WavePipeline:
    """Runs configured waves over one bundle, writing artifacts under ``config.output_dir``."""

    def __init__(self, bundle: InputBundle, config: RunConfig, writer: Optional[ArtifactWriter] = None) -> None:
        self.bundle = bundle
        self.config = config
        self.writer = writer or ArtifactWriter.for_config(config)
        self.lambdas = config.smoothing.lambda_grid()

    # -- driver -----------------------------------------------------------

    def run(self, wave_ids: Optional[Sequence[str]] = None) -> Dict[str, WaveResult]:
        ids = list(wave_ids or [w.wave_id for w in self.config.waves])
        results = {wave_id: self.run_wave(wave_id) for wave_id in ids}
        with stage("ranks"):
            self._write_ranks(results)
        with stage("compare_sources"):
            compare_sources(self.bundle, self.config, self.writer)
        self.writer.write_manifest(self.config, self.bundle.checksums)
        return results

    def run_wave(self, wave_id: str) -> WaveResult:
        wave = self.config.wave(wave_id)
        LOGGER.info("Running wave %s (%s..%s, %d units)", wave_id, wave.start_date, wave.end_date, len(self.bundle.units))
        grid = Grid.daily(wave.n_days)
        basis = BasisSystem.for_grid(grid, self.config.smoothing.n_knots, self.config.smoothing.degree)

        with stage("differential_mortality", wave_id):
            mortality_raw = self._differential_mortality(wave)
        with stage("smoothing", wave_id):
            smoothed = smooth_collection(mortality_raw, basis, self.lambdas, grid)
            mortality = dict(zip(self.bundle.units, smoothed.curves))
            gcv_tables = [smoothed.gcv_table.assign(collection="mortality")]
        with stage("registration", wave_id):
            registration = self._register(wave, mortality, basis)
            gcv_tables.append(registration.smoothing.gcv_table.assign(collection="mortality_registered"))
        result = WaveResult(wave, grid, basis, mortality, registration)

        with stage("mobility", wave_id):
            gcv_tables.extend(self._shift_mobility(result))
        gcv = pd.concat(gcv_tables, ignore_index=True)[["collection", "lambda", "mean_gcv"]]
        self.writer.csv(gcv, wave_id, "gcv.csv")

        with stage("clustering", wave_id):
            self._cluster(result)
        with stage("features", wave_id):
            self._features(result)
        with stage("scalar_models", wave_id):
            self._scalar_models(result)
        with stage("functional_models", wave_id):
            self._functional_models(result)
        if result.stability:
            self.writer.csv(pd.concat(result.stability, ignore_index=True), wave_id, "stability.csv")
        with stage("concurrent_models", wave_id):
            for model in self.config.models:
                if model.applies_to(wave_id):
                    self._concurrent_model(result, model)
        LOGGER.info("Wave %s finished", wave_id)
        return result

    # -- stages -----------------------------------------------------------

    def _differential_mortality(self, wave: WaveConfig) -> np.ndarray:
        deaths = self.bundle.deaths_matrix(wave)
        baseline = self.bundle.baseline_matrix(wave)
        rows = []
        for i, unit in enumerate(self.bundle.units):
            try:
                rows.append(differential_mortality(deaths[i], baseline[i], self.bundle.population[unit]))
            except InputError as exc:
                raise StageError(f"differential_mortality[{wave.wave_id}]", exc, unit) from exc
        return np.vstack(rows)

    def _register(self, wave: WaveConfig, mortality: Dict[str, Curve], basis: BasisSystem) -> RegistrationResult:
        registration = align_and_integrate(
            mortality, tuple(wave.peak_window), basis, self.lambdas, self.config.smoothing.shift_fill,
        )
        expected = wave.target_peak_day
        if expected is not None and registration.target_peak_day != expected:
            self.writer.notice(
                "registration",
                f"earliest peak on day {registration.target_peak_day}, configured target {expected}",
                wave.wave_id,
            )
        for unit in registration.flagged:
            self.writer.notice("registration", f"unit {unit} has no interior peak; left unshifted", wave.wave_id)
        summary = shift_summary(registration)
        LOGGER.info("%s shifts: median %.1f, range [%d, %d] over %d units", wave.wave_id,
                    summary["median"], summary["min"], summary["max"], summary["n"])
        table = registration.peak_table.copy()
        table.insert(1, "wave", wave.wave_id)
        self.writer.csv(table, wave.wave_id, "shifts.csv")
        return registration

    def _shift_mobility(self, result: WaveResult) -> List[pd.DataFrame]:
        tables = []
        categories = set(self.bundle.mobility["category"])
        for category in MOBILITY_CATEGORIES:
            if category not in categories:
                self.writer.notice("mobility", f"no rows for category {category}; skipped", result.wave_id)
                continue
            values = self.bundle.mobility_matrix(result.wave, category)
            smoothed = smooth_collection(values, result.basis, self.lambdas, result.grid)
            curves = dict(zip(self.bundle.units, smoothed.curves))
            result.mobility[category] = apply_shifts(
                curves, result.registration.shifts, result.basis, self.lambdas, self.config.smoothing.shift_fill,
            )
            tables.append(smoothed.gcv_table.assign(collection=f"mobility_{category}"))
        return tables

    def _cluster(self, result: WaveResult) -> None:
        settings = self.config.clustering
        clustering = cluster_curves(
            result.registration.shifted_curves, result.peak_values, settings.k_max, settings.hartigan_threshold,
        )
        result.clustering = clustering
        result.dummy = group_dummy(clustering.severity_by_unit())
        self.writer.csv(clusters_table(clustering, result.wave_id), result.wave_id, "clusters.csv")
        self.writer.csv(clustering.hartigan, result.wave_id, "hartigan.csv")
        self.writer.json(dendrogram_payload(clustering, result.wave_id), result.wave_id, "dendrogram.json")

    def _features(self, result: WaveResult) -> None:
        wave = result.wave
        source = result.mortality
        if self.config.smoothing.areas_from == "registered":
            source = result.registration.shifted_curves
        areas = area_table(source, wave, wave.wave_id)
        result.areas = areas
        self.writer.csv(areas, wave.wave_id, "areas.csv")

        records = compute_lags(result.registration.peak_table, wave)
        self.writer.csv(lags_table(records, result.dummy, wave.wave_id), wave.wave_id, "lags.csv")
        summary = {"wave": wave.wave_id, **lag_peak_summary(records, result.dummy)}
        self.writer.csv(pd.DataFrame([summary]), wave.wave_id, "lag_summary.csv")

        covariates = self.bundle.covariates.loc[self.bundle.units, list(COVARIATE_COLUMNS)]
        pca = pca_first(covariates)
        self.writer.csv(pca.loading_table(), wave.wave_id, "pca.csv")
        scalars = pd.DataFrame(index=pd.Index(self.bundle.units, name="unit"))
        scalars["a_bef"] = areas.set_index("unit")["log_a_bef"]
        scalars["a_aft"] = areas.set_index("unit")["log_a_aft"]
        for column in COVARIATE_COLUMNS:
            scalars[column] = covariates[column].to_numpy(dtype=float)
        scalars["pc1"] = pca.scores
        result.scalars = scalars

    def _enough_units(self, result: WaveResult, stage_name: str, needed: int) -> bool:
        n = len(result.positive_units)
        if n < needed:
            self.writer.notice(stage_name, f"{n} units with positive areas, at least {needed} needed; skipped",
                               result.wave_id)
            return False
        return True

    def _path_kwargs(self) -> Dict[str, object]:
        paths = self.config.paths
        return {
            "grid_size": paths.n_lambdas,
            "min_ratio": paths.min_ratio,
            "l2_ratio": paths.l2_ratio,
            "spacing": paths.spacing,
            "loss": paths.loss,
        }

    def _scalar_models(self, result: WaveResult) -> None:
        wave_id = result.wave_id
        p = len(SCALAR_FEATURES)
        if not self._enough_units(result, "scalar_models", max(p + 2, self.config.paths.cv_folds)):
            return
        units = result.positive_units
        table = result.scalars.loc[units]
        X_raw = table[SCALAR_FEATURES].to_numpy(dtype=float)
        y_raw = table["a_aft"].to_numpy(dtype=float)
        design = standardize(X_raw, SCALAR_FEATURES)
        response = standardize_vector(y_raw)
        paths, settings = self.config.paths, self.config.stability
        kwargs = self._path_kwargs()

        fit = path_with_ratios(design.X, response, names=SCALAR_FEATURES, tol=paths.tol,
                               max_sweeps=paths.max_sweeps, **kwargs)
        self.writer.csv(path_frame(fit.feature_names, fit.lambdas, fit.coefs), wave_id, "enet_path.csv")

        cv = cv_select(design.X, response, folds=paths.cv_folds, seed=self.config.seed,
                       label=f"{wave_id}-enet-cv", **kwargs)
        self.writer.csv(
            pd.DataFrame({"feature": SCALAR_FEATURES, "lambda_min": cv.lambda_min, "lambda_1se": cv.lambda_1se,
                          "coef_min": cv.coefs_min, "coef_1se": cv.coefs_1se}),
            wave_id, "enet_cv.csv",
        )
        self.writer.csv(cv.curve_table(), wave_id, "enet_cv_curve.csv")

        summary = stability(
            X_raw, y_raw, runs=settings.runs, seed=self.config.seed, min_fraction=settings.min_fraction,
            names=SCALAR_FEATURES, workers=settings.workers, label=f"{wave_id}-enet-stability",
            refine=settings.refine, tol=paths.tol, max_sweeps=paths.max_sweeps, **kwargs,
        )
        for note in summary.notes:
            self.writer.notice("scalar_models", note, wave_id)
        frame = summary.table()
        frame.insert(0, "model", "enet")
        frame.insert(2, "full_ratio", fit.ratios)
        result.stability.append(frame)

        extended = SCALAR_FEATURES + ["pc1"]
        self.writer.csv(marginal_table(y_raw, table, extended), wave_id, "marginals.csv")
        vifs = pd.concat(
            [vif(table, SCALAR_FEATURES).assign(set="covariates"), vif(table, JOINT_FEATURES).assign(set="joint")],
            ignore_index=True,
        )[["set", "feature", "vif", "infinite"]]
        self.writer.csv(vifs, wave_id, "vif.csv")
        self.writer.csv(correlation_matrix(table[extended]), wave_id, "correlations.csv")
        joint, r2 = joint_ols(y_raw, table, JOINT_FEATURES)
        self.writer.csv(joint.assign(r2=r2), wave_id, "joint_ols.csv")

    def _functional_models(self, result: WaveResult) -> None:
        wave_id = result.wave_id
        p = len(SCALAR_FEATURES)
        if not self._enough_units(result, "functional_models", max(p + 2, self.config.paths.cv_folds)):
            return
        units = result.positive_units
        table = result.scalars.loc[units]
        X_raw = table[SCALAR_FEATURES].to_numpy(dtype=float)
        design = standardize(X_raw, SCALAR_FEATURES)
        curves = [result.registration.shifted_curves[u] for u in units]
        coefs = np.vstack([c.coefs for c in curves])
        centred = coefs - coefs.mean(axis=0)
        paths, settings = self.config.paths, self.config.stability
        kwargs = self._path_kwargs()

        fit = fgen_path_ratios(design.X, centred, result.basis, names=SCALAR_FEATURES, tol=paths.fgen_tol,
                               max_sweeps=paths.fgen_max_sweeps, **kwargs)
        cv = fgen_cv_select(design.X, centred, result.basis, folds=paths.cv_folds, seed=self.config.seed,
                            label=f"{wave_id}-fgen-cv", **kwargs)
        self.writer.csv(cv.curve_table().assign(lambda_min=cv.lambda_min, lambda_1se=cv.lambda_1se),
                        wave_id, "fgen_cv.csv")
        beta = {name: curve.values for name, curve in zip(SCALAR_FEATURES, cv.fit_min.curves(result.grid))}
        self.writer.csv(curves_frame(beta, result.grid.points), wave_id, "fgen_coefs.csv")

        summary = fgen_stability(
            X_raw, centred, result.basis, runs=settings.runs, seed=self.config.seed,
            min_fraction=settings.min_fraction, names=SCALAR_FEATURES, workers=settings.workers,
            label=f"{wave_id}-fgen-stability", refine=settings.refine, tol=paths.fgen_tol,
            max_sweeps=paths.fgen_max_sweeps, **kwargs,
        )
        for note in summary.notes:
            self.writer.notice("functional_models", note, wave_id)
        frame = summary.table()
        frame.insert(0, "model", "fgen")
        frame.insert(2, "full_ratio", fit.ratios)
        result.stability.append(frame)

        extended = SCALAR_FEATURES + ["pc1"]
        standardized = standardize(table[extended], extended)
        scaled = {name: standardized.X[:, j] for j, name in enumerate(extended)}
        smoothing = self.config.smoothing
        frames = []
        for name in extended:
            marginal = fos_marginal(curves, scaled[name], name, result.grid, smoothing.n_knots,
                                    smoothing.degree, self.lambdas)
            coef = marginal.beta
            frames.append(pd.DataFrame({
                "feature": name, "t": coef.days.astype(int), "beta": coef.values, "se": coef.se,
                "lower": coef.lower, "upper": coef.upper, "significant": coef.significant_mask, "r2": marginal.r2,
            }))
        self.writer.csv(pd.concat(frames, ignore_index=True), wave_id, "fos_marginals.csv")

        joint = fos_joint(curves, {name: scaled[name] for name in JOINT_FEATURES}, result.grid,
                          smoothing.n_knots, smoothing.degree, self.lambdas)
        joint_table = joint.table()
        joint_table["partial_r2"] = joint_table["predictor"].map(joint.partial_r2)
        joint_table["total_r2"] = joint.total_r2
        self.writer.csv(joint_table, wave_id, "fos_joint.csv")

        functional = {"mortality": curves}
        for category, shifted in result.mobility.items():
            functional[category] = [shifted[u] for u in units]
        grid_table = collinearity_grid(functional, {name: scaled[name] for name in JOINT_FEATURES}, result.grid)
        self.writer.csv(grid_table, wave_id, "collinearity_grid.csv")

    def _concurrent_model(self, result: WaveResult, model: ModelSpec) -> None:
        wave_id = result.wave_id
        missing = [c for c in model.functional if c not in result.mobility]
        if missing:
            self.writer.notice("concurrent_models", f"model {model.name}: no mobility curves for {missing}; skipped",
                               wave_id)
            return
        table = result.scalars
        usable = table[model.scalars].notna().all(axis=1) if model.scalars else pd.Series(True, index=table.index)
        units = [u for u in self.bundle.units if usable[u]]
        dropped = len(self.bundle.units) - len(units)
        if dropped:
            LOGGER.warning("%s model %s: %d unit(s) without finite scalars excluded", wave_id, model.name, dropped)
        if len(units) < 3:
            self.writer.notice("concurrent_models", f"model {model.name}: only {len(units)} usable units; skipped",
                               wave_id)
            return
        scalars = {}
        if model.scalars:
            standardized = standardize(table.loc[units, model.scalars], model.scalars)
            scalars = {name: standardized.X[:, j] for j, name in enumerate(model.scalars)}
        response = [result.registration.shifted_curves[u] for u in units]
        functional = {c: [result.mobility[c][u] for u in units] for c in model.functional}
        dummy = [result.dummy[u] for u in units] if model.use_dummy else None
        smoothing = self.config.smoothing
        sweep = lag_sweep(response, functional, scalars, dummy, self.config.lags, result.grid,
                          smoothing.n_knots, smoothing.degree, self.lambdas, self.config.stability.workers)
        folder = f"model_{model.name}"
        for lag, fit in sweep.fits.items():
            self.writer.csv(fit.table(), wave_id, folder, f"concurrent_fit_{lag}.csv")
        summary = sweep.r2_summary()
        result.r2_summaries[model.name] = summary
        self.writer.csv(summary, wave_id, folder, "r2_summary.csv")
        self.writer.csv(sweep.beams(), wave_id, folder, "beams.csv")
        LOGGER.info("%s model %s: mean R2 over lags %.3f", wave_id, model.name, sweep.mean_r2())

    # -- cross-wave -------------------------------------------------------

    def _write_ranks(self, results: Dict[str, WaveResult]) -> None:
        if len(results) < 2:
            self.writer.notice("ranks", "peak rank differences need two waves; skipped")
            return
        first, second = list(results.values())[:2]
        ranks = peak_rank_diff(first.peak_values, second.peak_values)
        ranks.insert(1, "waves", f"{first.wave_id}-{second.wave_id}")
        self.writer.csv(ranks, "ranks.csv")


def run_wave(bundle: InputBundle, config: RunConfig, wave_id: str) -> WaveResult:
    """Run a single wave and write its manifest."""
    pipeline = WavePipeline(bundle, config)
    result = pipeline.run_wave(wave_id)
    pipeline.writer.write_manifest(config, bundle.checksums)
    return result


def run_pipeline(bundle: InputBundle, config: RunConfig) -> Dict[str, WaveResult]:
    return WavePipeline(bundle, config).run()


def _excess_totals(bundle: InputBundle, wave: WaveConfig) -> pd.DataFrame:
    excess = bundle.deaths_matrix(wave) - bundle.baseline_matrix(wave)
    return pd.DataFrame({"unit": bundle.units, "wave": wave.wave_id, "total": excess.sum(axis=1)})


def compare_sources(
    bundle: InputBundle,
    config: RunConfig,
    writer: Optional[ArtifactWriter] = None,
) -> Optional[pd.DataFrame]:
    """Region-level consistency ratios between data sources; skipped with a notice when inputs are absent."""
    standalone = writer is None
    writer = writer or ArtifactWriter.for_config(config)
    comparison = bundle.comparison
    if comparison is None:
        writer.notice("compare_sources", "no region-level comparison inputs configured; skipped")
        if standalone:
            writer.write_manifest(config, bundle.checksums)
        return None

    frames = []
    for wave in config.waves:
        if comparison.region_deaths is not None:
            official = wave_totals(comparison.region_deaths, "region", "deaths", wave)
            excess = aggregate_to_regions(_excess_totals(bundle, wave), comparison.unit_region)
            frames.append(source_ratio_report(official, excess, "deaths"))
        if comparison.unit_cases is not None and comparison.region_cases is not None:
            units = wave_totals(comparison.unit_cases, "unit", "cases", wave)
            aggregated = aggregate_to_regions(units, comparison.unit_region)
            regional = wave_totals(comparison.region_cases, "region", "cases", wave)
            frames.append(source_ratio_report(aggregated, regional, "cases"))
    if not frames:
        writer.notice("compare_sources", "comparison inputs incomplete; skipped")
        report = None
    else:
        report = pd.concat(frames, ignore_index=True)
        writer.csv(report, "source_ratios.csv")
        LOGGER.info("Source ratios written for %d region-wave pairs", len(report))
    if standalone:
        writer.write_manifest(config, bundle.checksums)
    return report


__all__ = [
    "WavePipeline",
    "WaveResult",
    "compare_sources",
    "run_pipeline",
    "run_wave",
    "stage",
]
