from __future__ import annotations

import logging

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid

from wavecurve.config import WaveConfig
from wavecurve.errors import InputError, KeyedJoinError, ShapeError
from wavecurve.fda.basis import Curve
from wavecurve.features import (
    aggregate_to_regions,
    area_split,
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


def test_differential_mortality_per_100k():
    dm = differential_mortality([10.0, 12.0, 9.0], [10.0, 10.0, 10.0], 200_000)
    np.testing.assert_allclose(dm, [0.0, 1.0, -0.5])
    shifted = differential_mortality([15.0, 17.0, 14.0], [15.0, 15.0, 15.0], 200_000)
    np.testing.assert_allclose(shifted, dm)


def test_differential_mortality_rejects_bad_inputs():
    with pytest.raises(InputError):
        differential_mortality([1.0], [1.0], 0)
    with pytest.raises(ShapeError):
        differential_mortality([1.0, 2.0], [1.0], 1000)
    with pytest.raises(InputError):
        differential_mortality([-1.0], [1.0], 1000)


def test_area_split_of_constant_curve(grid, basis):
    one = Curve.from_values(np.ones(grid.size), basis, grid)
    areas = area_split(one, 13)
    assert areas.a_bef == pytest.approx(13.0)
    assert areas.a_aft == pytest.approx(136.0)
    assert areas.positive
    assert areas.log_a_bef == pytest.approx(np.log(13.0))


def test_area_split_is_additive_at_fractional_days(grid, bumps):
    values = bumps([40])[0] - 0.1
    whole = trapezoid(values, grid.points)
    for r in (13, 33.5, 100.25):
        areas = area_split(values, r, grid)
        assert areas.total == pytest.approx(whole, abs=1e-8)
    with pytest.raises(InputError):
        area_split(values, 0, grid)
    with pytest.raises(InputError):
        area_split(values, 149, grid)


def test_area_table_flags_nonpositive_units(grid, basis, caplog):
    wave = WaveConfig("W1", "2020-02-25", "2020-07-23", "2020-03-09")
    curves = {
        "pos": Curve.from_values(np.ones(grid.size), basis, grid),
        "neg": Curve.from_values(-np.ones(grid.size), basis, grid),
    }
    with caplog.at_level(logging.WARNING):
        table = area_table(curves, wave, "W1")
    assert list(table.columns) == ["unit", "wave", "a_bef", "a_aft", "log_a_bef", "log_a_aft", "flag"]
    row = table.set_index("unit").loc["neg"]
    assert not row["flag"] and np.isnan(row["log_a_aft"])
    assert table.set_index("unit").loc["pos", "a_bef"] == pytest.approx(13.0)
    assert "neg" in caplog.text


def test_peak_rank_differences_are_antisymmetric():
    w1 = {"a": 3.0, "b": 1.0, "c": 2.0, "d": 2.0}
    w2 = {"a": 1.0, "b": 4.0, "c": 2.0, "d": 3.0}
    forward = peak_rank_diff(w1, w2).set_index("unit")
    backward = peak_rank_diff(w2, w1).set_index("unit")
    assert forward.loc["c", "rank_w1"] == 2.5
    np.testing.assert_allclose(forward["rank_diff"], -backward["rank_diff"])
    with pytest.raises(KeyedJoinError):
        peak_rank_diff(w1, {"a": 1.0})


def test_lags_dummy_and_summary():
    peaks = pd.DataFrame(
        {
            "unit": ["a", "b", "c", "d"],
            "peak_day": [23, 33, 43, 20],
            "peak_value": [1.0, 2.0, 3.0, 0.5],
            "flat_flag": [False, False, False, False],
        }
    )
    records = compute_lags(peaks, 13)
    assert [r.lag for r in records] == [10, 20, 30, 7]
    dummy = group_dummy({"a": 2, "b": 1, "c": 1, "d": 0})
    assert dummy == {"a": 1, "b": 1, "c": 1, "d": 0}
    table = lags_table(records, dummy, "W1")
    assert list(table.columns) == ["unit", "wave", "lag", "peak_value", "d", "flat_flag"]
    summary = lag_peak_summary(records, dummy)
    assert summary["n"] == 3
    assert summary["median_lag"] == 20
    assert summary["slope"] == pytest.approx(0.1)
    with pytest.raises(InputError):
        group_dummy({"a": -1})


def test_source_ratios_from_aggregated_units():
    wave = WaveConfig("W1", "2020-02-25", "2020-07-23", "2020-03-09")
    unit_totals = pd.DataFrame({"unit": ["p1", "p2", "p3", "p4"], "wave": "W1", "total": [1.0, 2.0, 3.0, 4.0]})
    regions = aggregate_to_regions(unit_totals, {"p1": "R", "p2": "R", "p3": "R", "p4": "S"})
    official = pd.DataFrame({"region": ["R", "S"], "wave": "W1", "total": [3.0, 4.0]})
    report = source_ratio_report(regions, official, "cases").set_index("region")
    assert report.loc["R", "ratio"] == pytest.approx(2.0)
    assert report.loc["S", "ratio"] == pytest.approx(1.0)
    identical = source_ratio_report(official, official, "deaths")
    assert (identical["ratio"] == 1.0).all()

    zero = pd.DataFrame({"region": ["R", "S"], "wave": "W1", "total": [0.0, 4.0]})
    flagged = source_ratio_report(official, zero, "deaths").set_index("region")
    assert np.isnan(flagged.loc["R", "ratio"]) and flagged.loc["R", "flag"] == "zero_denominator"

    daily = pd.DataFrame({"region": ["R", "R", "R"], "date": pd.to_datetime(["2020-02-24", "2020-03-01", "2020-07-23"]),
                          "deaths": [5.0, 1.0, 2.0]})
    totals = wave_totals(daily, "region", "deaths", wave)
    assert totals["total"].tolist() == [3.0]
    with pytest.raises(KeyedJoinError):
        aggregate_to_regions(unit_totals, {"p1": "R"})
