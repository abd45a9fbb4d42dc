from __future__ import annotations

import numpy as np
import pytest

from wavecurve.errors import DomainError, InputError, KeyedJoinError
from wavecurve.fda.basis import Curve
from wavecurve.fda.registration import (
    align_and_integrate,
    apply_shifts,
    find_peak,
    shift_series,
    shift_summary,
)
from wavecurve.synthetic import wave_shape


def test_find_peak_on_sampled_wave(grid, bumps):
    peak = find_peak(bumps([42])[0], (10, 100), grid)
    assert peak.day == 42
    assert peak.value == pytest.approx(1.0)
    assert not peak.flat


def test_edge_maximum_and_constant_curves_are_flat(grid):
    ramp = find_peak(grid.points.copy(), (10, 100), grid)
    assert ramp.flat and ramp.day == 100
    constant = find_peak(np.full(grid.size, 2.0), (10, 100), grid)
    assert constant.flat and constant.day == 10


def test_peak_window_must_fit_the_domain(grid):
    with pytest.raises(DomainError):
        find_peak(np.ones(grid.size), (10, 200), grid)
    with pytest.raises(InputError):
        find_peak(np.ones(grid.size), (50, 40), grid)
    with pytest.raises(InputError):
        find_peak(np.ones(grid.size), (10, 100))


def test_shift_series_fill_modes():
    values = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    np.testing.assert_array_equal(shift_series(values, 2), [3.0, 4.0, 5.0, 5.0, 5.0])
    np.testing.assert_array_equal(shift_series(values, 2, fill="zero"), [3.0, 4.0, 5.0, 0.0, 0.0])
    np.testing.assert_array_equal(shift_series(values, -1), [1.0, 1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(shift_series(values, 0), values)
    with pytest.raises(InputError):
        shift_series(values, 5)
    with pytest.raises(InputError):
        shift_series(values, 1, fill="mirror")


def test_shift_series_edges_replace_the_boundary_values():
    values = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    np.testing.assert_array_equal(shift_series(values, 2, edges=(0.5, 9.0)), [3.0, 4.0, 5.0, 9.0, 9.0])
    np.testing.assert_array_equal(shift_series(values, -1, edges=(0.5, 9.0)), [0.5, 1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(shift_series(values, 2, fill="zero", edges=(0.5, 9.0)), [3.0, 4.0, 5.0, 0.0, 0.0])


def test_alignment_moves_every_peak_to_the_earliest(smooth, bumps):
    curves = dict(zip("abc", smooth(bumps([30, 35, 45]))))
    result = align_and_integrate(curves, (10, 100))
    assert result.target_peak_day == find_peak(curves["a"], (10, 100)).day
    assert result.shifts["a"] == 0
    assert result.shifts["b"] == 5
    assert result.shifts["c"] == 15
    for unit in "abc":
        assert find_peak(result.shifted_curves[unit], (10, 100)).day == result.target_peak_day
    assert list(result.peak_table.columns) == ["unit", "peak_day", "peak_value", "shift", "flat_flag"]
    assert result.flagged == []


def test_flat_curves_are_flagged_and_left_in_place(grid, smooth, bumps):
    values = np.vstack([bumps([30, 40]), 0.01 * grid.points[None, :]])
    curves = dict(zip(["a", "b", "ramp"], smooth(values)))
    result = align_and_integrate(curves, (10, 100))
    assert result.flagged == ["ramp"]
    assert result.shifts["ramp"] == 0
    summary = shift_summary(result)
    assert summary["n"] == 2
    assert summary["min"] == 0


def test_all_flat_collection_is_left_unregistered(grid, smooth):
    curves = dict(zip(["x", "y"], smooth(np.vstack([grid.points, 2.0 * grid.points]))))
    result = align_and_integrate(curves, (10, 100))
    assert result.target_peak_day is None
    assert set(result.shifts.values()) == {0}


def test_apply_shifts_to_companion_curves(smooth, bumps):
    mortality = dict(zip("ab", smooth(bumps([30, 50]))))
    mobility = dict(zip("ab", smooth(bumps([60, 60]))))
    registration = align_and_integrate(mortality, (10, 100))
    shifted = apply_shifts(mobility, registration.shifts)
    moved = registration.shifts["b"]
    assert moved == 20
    assert find_peak(shifted["b"], (10, 100)).day == 60 - moved

    unchanged = apply_shifts(mobility, {"a": 0, "b": 0})
    assert unchanged["a"] is mobility["a"]
    with pytest.raises(KeyedJoinError) as info:
        apply_shifts(mobility, {"a": 0})
    assert info.value.missing == ["b"]


@pytest.mark.parametrize("peak", [27, 33, 47, 58])
def test_peak_day_is_exact_on_smoothed_waves(smooth, bumps, peak):
    curve = smooth(bumps([peak], width=7.0))[0]
    assert curve.observed is not None
    assert find_peak(curve, (10, 100)).day == peak


def test_zero_half_width_keeps_the_smoothed_grid_maximum(grid, smooth, bumps):
    curve = smooth(bumps([27], width=7.0))[0]
    inside = (grid.points >= 10) & (grid.points <= 100)
    expected = int(grid.points[inside][np.argmax(curve.values[inside])])
    assert find_peak(curve, (10, 100), half_width=0).day == expected

    bare = Curve(curve.basis, curve.coefs, curve.grid)
    assert find_peak(bare, (10, 100)).day == expected


@pytest.mark.parametrize("width", [6.0, 10.0, 15.0])
def test_late_copy_of_an_early_wave_is_shifted_by_its_delay(grid, smooth, width):
    values = np.vstack([wave_shape(grid.points, 27, 1.0, width), wave_shape(grid.points, 47, 1.0, width)])
    result = align_and_integrate(dict(zip("ab", smooth(values))), (10, 100))
    assert result.target_peak_day == 27
    assert result.shifts == {"a": 0, "b": 20}


def test_translated_pairs_recover_the_delay_exactly(grid, smooth):
    rng = np.random.default_rng(20201001)
    misses = []
    for case in range(100):
        peak = int(rng.integers(15, 61))
        delay = int(rng.integers(1, 25))
        width = float(rng.uniform(6.0, 15.0))
        height = float(rng.uniform(0.5, 5.0))
        values = np.vstack([
            wave_shape(grid.points, peak, height, width),
            wave_shape(grid.points, peak + delay, height, width),
        ])
        result = align_and_integrate(dict(zip("ab", smooth(values))), (10, 100))
        if result.target_peak_day != peak or result.shifts != {"a": 0, "b": delay}:
            misses.append((case, peak, delay, round(width, 2), result.shifts))
    assert misses == []
