"""Landmark registration: peak detection, integer shifts and domain integration."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import DomainError, InputError, KeyedJoinError
from .basis import BasisSystem, Curve, CurveLike, Grid, sample
from .smoothing import SmoothedCollection, smooth_collection

LOGGER = logging.getLogger(__name__)

FILL_MODES = ("constant", "zero")
PEAK_HALF_WIDTH = 5
MAX_RECENTRE = 10

CurveCollection = Union[Mapping[str, Curve], Sequence[Curve]]


@dataclass(frozen=True)
class Peak:
    day: int
    value: float
    flat: bool = False


@dataclass(frozen=True)
class RegistrationResult:
    units: List[str]
    shifts: Dict[str, int]
    target_peak_day: Optional[int]
    shifted_curves: Dict[str, Curve]
    peak_table: pd.DataFrame
    smoothing: SmoothedCollection

    @property
    def flagged(self) -> List[str]:
        return [u for u, flat in zip(self.peak_table["unit"], self.peak_table["flat_flag"]) if flat]


def _as_mapping(curves: CurveCollection) -> Dict[str, Curve]:
    if isinstance(curves, Mapping):
        return {str(k): v for k, v in curves.items()}
    return {str(i): c for i, c in enumerate(curves)}


def _nearest_index(grid: Grid, t: float) -> int:
    """Grid index closest to ``t``; an exact midpoint goes to the earlier day."""
    return int(np.argmin(np.abs(grid.points - t)))


def _refine_on_samples(
    samples: np.ndarray,
    grid: Grid,
    start: int,
    bounds: Tuple[int, int],
    half_width: int,
) -> int:
    """Vertex of a local quadratic through the observed samples, recentred until it settles.

    The fit window is symmetric about the current centre (clipped only by
    the domain), so a translated series settles on the translated day.
    A window whose fit is not concave leaves the centre where it is.
    """
    centre = start
    visited = {centre}
    for _ in range(MAX_RECENTRE):
        idx = np.arange(max(0, centre - half_width), min(grid.size - 1, centre + half_width) + 1)
        if idx.size < 3:
            return centre
        t = grid.points[idx] - grid.points[centre]
        curvature, slope, _ = np.polyfit(t, samples[idx], 2)
        if curvature >= 0:
            return centre
        vertex = grid.points[centre] - slope / (2.0 * curvature)
        step = int(np.clip(_nearest_index(grid, vertex), centre - half_width, centre + half_width))
        step = int(np.clip(step, bounds[0], bounds[1]))
        if step == centre:
            return centre
        if step in visited:
            return min(centre, step)
        visited.add(step)
        centre = step
    return centre


def find_peak(
    curve: CurveLike,
    window: Tuple[float, float] = (10, 100),
    grid: Optional[Grid] = None,
    flat_tol: float = 1e-10,
    half_width: int = PEAK_HALF_WIDTH,
) -> Peak:
    """Highest grid value inside ``window`` (inclusive); ties go to the earlier day.

    A curve whose values inside the window are constant, or whose maximum
    sits on a window edge (no interior peak), is returned with ``flat=True``.
    When the curve keeps the samples it was smoothed from, the day is pinned
    on those samples by a local quadratic of ``half_width`` days either side
    of the smoothed peak; ``half_width=0`` keeps the smoothed grid maximum.
    """
    if grid is None:
        if not isinstance(curve, Curve):
            raise InputError("A grid is required to locate the peak of a sampled series")
        grid = curve.grid
    lo, hi = float(window[0]), float(window[1])
    if lo > hi:
        raise InputError(f"Empty peak window [{lo}, {hi}]")
    if lo < 0 or hi > grid.domain_length:
        raise DomainError(f"Peak window [{lo}, {hi}] exceeds the domain [0, {grid.domain_length}]")
    inside = np.flatnonzero((grid.points >= lo) & (grid.points <= hi))
    if inside.size == 0:
        raise InputError(f"Peak window [{lo}, {hi}] contains no grid point")
    smoothed = sample(curve, grid)
    values = smoothed[inside]
    pos = int(np.argmax(values))
    peak_value = float(values[pos])
    spread = float(np.max(values) - np.min(values))
    flat = spread <= flat_tol * max(1.0, abs(peak_value)) or (
        inside.size > 1 and pos in (0, inside.size - 1)
    )
    index = int(inside[pos])
    if not flat and half_width > 0 and isinstance(curve, Curve) and curve.observed is not None:
        index = _refine_on_samples(curve.observed, grid, index, (int(inside[0]), int(inside[-1])), int(half_width))
    return Peak(day=int(round(grid.points[index])), value=float(smoothed[index]), flat=flat)


def shift_series(
    values: np.ndarray,
    shift: int,
    fill: str = "constant",
    edges: Optional[Tuple[float, float]] = None,
) -> np.ndarray:
    """Move a daily series ``shift`` days to the left (right when negative).

    Days pushed off one end are dropped; the vacated days at the other end
    take the boundary value (``fill="constant"``) or zero. ``edges`` overrides
    the (first, last) boundary values used by constant fill.
    """
    if fill not in FILL_MODES:
        raise InputError(f"Unknown fill mode '{fill}', expected one of {FILL_MODES}")
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    shift = int(shift)
    if abs(shift) >= n:
        raise InputError(f"Shift of {shift} days does not fit a {n}-day series")
    if shift == 0:
        return values.copy()
    first, last = (values[..., :1], values[..., -1:]) if edges is None else edges
    out = np.empty_like(values)
    if shift > 0:
        out[..., : n - shift] = values[..., shift:]
        out[..., n - shift :] = last if fill == "constant" else 0.0
    else:
        s = -shift
        out[..., s:] = values[..., : n - s]
        out[..., :s] = first if fill == "constant" else 0.0
    return out


def integrate_domain(
    series: Mapping[str, np.ndarray],
    shifts: Mapping[str, int],
    basis: BasisSystem,
    grid: Grid,
    lambda_grid: Optional[Sequence[float]] = None,
    fill: str = "constant",
    edges: Optional[Mapping[str, Tuple[float, float]]] = None,
) -> SmoothedCollection:
    """Shift every series, restore the fixed-length domain and re-smooth with a fresh GCV lambda."""
    missing = [u for u in series if u not in shifts]
    if missing:
        raise KeyedJoinError("No shift available for some units", missing)
    edges = edges or {}
    shifted = np.vstack([shift_series(series[u], shifts[u], fill, edges.get(u)) for u in series])
    return smooth_collection(shifted, basis, lambda_grid, grid)


def _samples_and_edges(by_unit: Mapping[str, Curve]) -> Tuple[Dict[str, np.ndarray], Dict[str, Tuple[float, float]]]:
    """Observed samples to shift, with the smoothed boundary values used to fill vacated days."""
    series = {u: np.asarray(c.samples) for u, c in by_unit.items()}
    edges = {u: (float(c.values[0]), float(c.values[-1])) for u, c in by_unit.items()}
    return series, edges


def align_and_integrate(
    curves: CurveCollection,
    window: Tuple[float, float] = (10, 100),
    basis: Optional[BasisSystem] = None,
    lambda_grid: Optional[Sequence[float]] = None,
    fill: str = "constant",
) -> RegistrationResult:
    """Align every curve's peak to the earliest peak in the collection."""
    by_unit = _as_mapping(curves)
    if not by_unit:
        raise InputError("Cannot register an empty collection")
    first = next(iter(by_unit.values()))
    grid = first.grid
    basis = basis or first.basis
    for unit, curve in by_unit.items():
        if not curve.grid.same_as(grid):
            raise DomainError(f"Curve for unit {unit} is not on the shared grid")

    peaks = {u: find_peak(c, window) for u, c in by_unit.items()}
    flagged = [u for u, p in peaks.items() if p.flat]
    for unit in flagged:
        LOGGER.warning("Unit %s has no interior peak in window %s; shift set to 0", unit, window)

    candidates = [p.day for u, p in peaks.items() if not p.flat]
    target = min(candidates) if candidates else None
    if target is None:
        LOGGER.warning("No curve has a peak inside window %s; registration is the identity", window)
    shifts = {u: (0 if p.flat or target is None else p.day - target) for u, p in peaks.items()}

    series, edges = _samples_and_edges(by_unit)
    smoothing = integrate_domain(series, shifts, basis, grid, lambda_grid, fill, edges)
    shifted = dict(zip(by_unit.keys(), smoothing.curves))

    table = pd.DataFrame(
        {
            "unit": list(by_unit.keys()),
            "peak_day": [peaks[u].day for u in by_unit],
            "peak_value": [peaks[u].value for u in by_unit],
            "shift": [shifts[u] for u in by_unit],
            "flat_flag": [peaks[u].flat for u in by_unit],
        }
    )
    LOGGER.info(
        "Registered %d curves to peak day %s (lambda=%g, %d flagged)",
        len(by_unit), target, smoothing.lam, len(flagged),
    )
    return RegistrationResult(
        units=list(by_unit.keys()),
        shifts=shifts,
        target_peak_day=target,
        shifted_curves=shifted,
        peak_table=table,
        smoothing=smoothing,
    )


def apply_shifts(
    other_curves: CurveCollection,
    shifts: Mapping[str, int],
    basis: Optional[BasisSystem] = None,
    lambda_grid: Optional[Sequence[float]] = None,
    fill: str = "constant",
) -> Dict[str, Curve]:
    """Shift companion curves (e.g. mobility) by their unit's mortality shift."""
    by_unit = _as_mapping(other_curves)
    missing = [u for u in by_unit if u not in shifts]
    if missing:
        raise KeyedJoinError("Companion curves reference units without a shift", missing)
    if not by_unit or all(int(shifts[u]) == 0 for u in by_unit):
        return dict(by_unit)
    first = next(iter(by_unit.values()))
    series, edges = _samples_and_edges(by_unit)
    smoothing = integrate_domain(series, shifts, basis or first.basis, first.grid, lambda_grid, fill, edges)
    return dict(zip(by_unit.keys(), smoothing.curves))


def shift_summary(result: RegistrationResult) -> Dict[str, float]:
    table = result.peak_table[~result.peak_table["flat_flag"]]
    applied = table["shift"].to_numpy(dtype=float)
    if applied.size == 0:
        return {"median": 0.0, "min": 0.0, "max": 0.0, "n": 0}
    return {
        "median": float(np.median(applied)),
        "min": float(applied.min()),
        "max": float(applied.max()),
        "n": int(applied.size),
    }
