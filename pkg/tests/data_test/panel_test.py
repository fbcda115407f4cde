"""Test the bar sampling, realized variance and daily panel."""

import math
from concurrent.futures import ThreadPoolExecutor
from datetime import date

import numpy as np
import pandas as pd
import pytest

from vol_forecaster.data.panel import (
    DailyPanel,
    DailyRecord,
    IntradayBarSeries,
    build_bar_series,
    compute_log_returns,
    daily_record_from_bars,
    horizon_average,
    horizon_averages,
    n_intervals,
    realized_variance,
)
from vol_forecaster.definitions import SESSION_OPEN_SEC, PanelColumn
from vol_forecaster.errors import (
    ConfigError,
    DataError,
    DomainError,
    FormatError,
    InsufficientDataError,
)


@pytest.mark.parametrize(
    ("prices", "expected"),
    [
        ((100.0, 100.0), [0.0]),
        ((100.0, 105.0), [math.log(1.05)]),
        ((100.0, 105.0, 100.0), [math.log(1.05), math.log(100.0 / 105.0)]),
    ],
)
def test_compute_log_returns(prices: tuple[float, ...], expected: list[float]) -> None:
    """Test log returns of short price lists."""
    np.testing.assert_allclose(compute_log_returns(prices), expected, rtol=1e-15)


def test_compute_log_returns_of_105_over_100() -> None:
    """Test the rounded value of a 5% log return."""
    assert math.isclose(compute_log_returns([100.0, 105.0])[0], 0.048790, abs_tol=1e-6)


@pytest.mark.parametrize(
    ("prices", "error"),
    [
        ((100.0, 0.0), DomainError),
        ((100.0,), InsufficientDataError),
        ((-1.0, 2.0), DomainError),
    ],
)
def test_compute_log_returns_errors(
    prices: tuple[float, ...], error: type[Exception]
) -> None:
    """Test invalid price lists."""
    with pytest.raises(error):
        compute_log_returns(prices)


@pytest.mark.parametrize(
    ("returns", "expected"),
    [((0.0, 0.0, 0.0), 0.0), ((0.01, -0.02), 0.0005), ((0.03,), 0.0009)],
)
def test_realized_variance(returns: tuple[float, ...], expected: float) -> None:
    """Test the sum of squared returns."""
    assert math.isclose(
        realized_variance(returns), expected, rel_tol=1e-15, abs_tol=1e-18
    )


def test_realized_variance_needs_returns() -> None:
    """Test that an empty return list is rejected."""
    with pytest.raises(InsufficientDataError):
        realized_variance([])


def test_realized_variance_is_consistent_on_constant_volatility() -> None:
    """Test the mean of RV over many simulated days against the true variance."""
    # Arrange
    rng = np.random.default_rng(3)
    true_var = 4e-4
    returns = rng.standard_normal((10_000, 78)) * math.sqrt(true_var / 78)

    # Act
    rv = np.array([realized_variance(day) for day in returns])

    # Assert
    assert abs(rv.mean() / true_var - 1.0) < 0.02


def test_realized_variance_sampling_error_shrinks_with_finer_grid() -> None:
    """Test that 1-minute sampling gives a tighter RV than 5-minute sampling."""
    # Arrange
    rng = np.random.default_rng(5)
    true_var = 4e-4
    fine = rng.standard_normal((2_000, 390)) * math.sqrt(true_var / 390)
    coarse = fine.reshape(2_000, 78, 5).sum(axis=2)

    # Act
    rv_fine = np.array([realized_variance(day) for day in fine])
    rv_coarse = np.array([realized_variance(day) for day in coarse])

    # Assert
    assert rv_fine.std() < rv_coarse.std()


@pytest.mark.parametrize(("delta", "expected"), [(5, 78), (1, 390), (30, 13)])
def test_n_intervals(delta: int, expected: int) -> None:
    """Test the interval count of the session."""
    assert n_intervals(delta) == expected


@pytest.mark.parametrize("delta", [0, 7, -5])
def test_n_intervals_rejects_bad_delta(delta: int) -> None:
    """Test intervals that do not tile the session."""
    with pytest.raises(ConfigError):
        n_intervals(delta)


def _series(values: list[float]) -> pd.Series:
    return pd.Series(values, index=pd.bdate_range("2020-01-01", periods=len(values)))


@pytest.mark.parametrize("horizon", ["d", "w", "m"])
def test_horizon_average_of_constant_series(horizon: str) -> None:
    """Test that a constant series averages to itself."""
    series = _series([2.5e-4] * 30)
    assert math.isclose(
        horizon_average(series, series.index[-1], horizon), 2.5e-4, rel_tol=1e-12
    )


def test_horizon_average_weekly() -> None:
    """Test the weekly mean of the last five values."""
    series = _series([9e-4, 1e-4, 2e-4, 3e-4, 4e-4, 5e-4])
    assert math.isclose(
        horizon_average(series, series.index[-1], "w"), 3e-4, rel_tol=1e-12
    )


def test_horizon_average_stops_at_as_of() -> None:
    """Test that later values are ignored."""
    series = _series([1e-4, 2e-4, 3e-4, 4e-4])
    assert horizon_average(series, series.index[1], "d") == 2e-4


def test_horizon_average_monthly_needs_22_values() -> None:
    """Test the monthly horizon with 21 observations."""
    series = _series([1e-4] * 21)
    with pytest.raises(InsufficientDataError):
        horizon_average(series, series.index[-1], "m")


def test_horizon_average_unknown_horizon() -> None:
    """Test an unknown horizon name."""
    with pytest.raises(ConfigError):
        horizon_average(_series([1e-4]), date(2020, 1, 1), "q")


def test_horizon_averages() -> None:
    """Test all six averages at once."""
    # Arrange
    rv = _series([1e-4] * 21 + [1.2e-3])
    ret = _series([0.01] * 22)

    # Act
    averages = horizon_averages(rv, ret, rv.index[-1])

    # Assert
    assert math.isclose(averages.rv_d, 1.2e-3)
    assert math.isclose(averages.rv_w, (4e-4 + 1.2e-3) / 5)
    assert math.isclose(averages.rv_m, (21e-4 + 1.2e-3) / 22)
    assert math.isclose(averages.ret_m, 0.01)


def test_build_bar_series_carries_last_price_forward() -> None:
    """Test interval closes with an empty interval."""
    # Arrange
    times = [SESSION_OPEN_SEC, SESSION_OPEN_SEC + 200, SESSION_OPEN_SEC + 900]
    prices = [100.0, 101.0, 102.0]

    # Act
    bars = build_bar_series("F001", date(2020, 1, 2), times, prices)

    # Assert
    assert len(bars.prices) == 79
    assert bars.prices[:4] == (100.0, 101.0, 101.0, 102.0)
    assert bars.prices[-1] == 102.0


def test_build_bar_series_first_close_falls_back_to_first_print() -> None:
    """Test a day whose first print is after the open."""
    bars = build_bar_series("F001", date(2020, 1, 2), [SESSION_OPEN_SEC + 3600], [50.0])
    assert bars.prices[0] == 50.0
    assert set(bars.prices) == {50.0}


def test_build_bar_series_needs_prints() -> None:
    """Test a day without prints."""
    with pytest.raises(InsufficientDataError):
        build_bar_series("F001", date(2020, 1, 2), [], [])


def test_bar_series_rejects_wrong_length() -> None:
    """Test a bar series with the wrong close count."""
    with pytest.raises(DataError):
        IntradayBarSeries("F001", date(2020, 1, 2), (100.0, 101.0))


def test_daily_record_from_bars() -> None:
    """Test the full-day and 15:55 summaries of a bar series."""
    # Arrange
    prices = tuple([100.0] * 78 + [110.0])
    bars = IntradayBarSeries("F001", date(2020, 1, 2), prices)

    # Act
    first_day = daily_record_from_bars(bars)
    later_day = daily_record_from_bars(bars, prev_close=50.0)

    # Assert
    assert math.isclose(first_day.rv_day, math.log(1.1) ** 2)
    assert first_day.rv_355 == 0.0
    assert first_day.ret_355 == 0.0
    assert math.isclose(first_day.ret_full_day, math.log(1.1))
    assert math.isclose(later_day.ret_full_day, math.log(110.0 / 50.0))


def _records() -> list[DailyRecord]:
    return [
        DailyRecord("F002", date(2020, 1, 2), 0.01, 2e-4, 1.8e-4, 0.009),
        DailyRecord("F001", date(2020, 1, 2), -0.01, 1e-4, 0.9e-4, -0.008),
        DailyRecord("F001", date(2020, 1, 3), 0.02, 3e-4, 2.5e-4, 0.015),
    ]


def test_daily_panel_accessors() -> None:
    """Test the indexes, wide matrices and record lookups of a panel."""
    # Act
    panel = DailyPanel.from_records(_records())

    # Assert
    assert len(panel) == 3
    assert panel.firm_index == ["F001", "F002"]
    assert list(panel.date_index) == [
        pd.Timestamp("2020-01-02"), pd.Timestamp("2020-01-03")
    ]
    wide = panel.wide(PanelColumn.RV_DAY)
    assert wide.loc["2020-01-03", "F001"] == 3e-4
    assert np.isnan(wide.loc["2020-01-03", "F002"])
    assert panel.presence().sum().sum() == 3
    assert panel.record("F001", date(2020, 1, 3)).rv_day == 3e-4
    assert len(panel.records) == 3


def test_daily_panel_wide_is_a_copy() -> None:
    """Test that mutating a wide matrix leaves the panel untouched."""
    panel = DailyPanel.from_records(_records())
    wide = panel.wide(PanelColumn.RV_DAY)
    wide.iloc[0, 0] = 1.0
    assert panel.wide(PanelColumn.RV_DAY).iloc[0, 0] == 1e-4


def test_daily_panel_wide_reads_from_worker_threads() -> None:
    """Test that concurrent readers of a shared panel see the same matrices."""
    # Arrange
    panel = DailyPanel.from_records(_records())
    fields = [PanelColumn.RV_DAY, PanelColumn.RV_355, PanelColumn.RET_FULL_DAY] * 8

    # Act
    with ThreadPoolExecutor(max_workers=8) as pool:
        views = list(pool.map(panel.wide, fields))

    # Assert
    for field, view in zip(fields, views, strict=True):
        pd.testing.assert_frame_equal(view, panel.wide(field))


def test_daily_panel_rejects_duplicates() -> None:
    """Test a repeated (firm, date) key."""
    records = _records()
    with pytest.raises(FormatError):
        DailyPanel.from_records([*records, records[0]])


def test_daily_panel_rejects_negative_variance() -> None:
    """Test a negative realized variance."""
    bad = DailyRecord("F003", date(2020, 1, 2), 0.0, -1e-4, 0.0, 0.0)
    with pytest.raises(FormatError):
        DailyPanel.from_records([*_records(), bad])


def test_daily_panel_unknown_field() -> None:
    """Test a wide request for an unknown column."""
    with pytest.raises(ConfigError):
        DailyPanel.from_records(_records()).wide("volume")
