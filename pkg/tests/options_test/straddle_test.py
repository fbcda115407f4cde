"""Test straddle selection, weighting and returns."""

import math
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from vol_forecaster.data.io import write_dated_csv
from vol_forecaster.definitions import QUOTE_COLUMNS
from vol_forecaster.errors import DataError, DegenerateError
from vol_forecaster.options.quotes import OptionQuote
from vol_forecaster.options.straddle import (
    STRADDLE_COLUMNS,
    build_straddles,
    delta_hedged_excess_return,
    delta_neutral_weights,
    load_straddles_csv,
    prorate_rate,
    select_atm_straddle,
    straddle_excess_return,
    straddle_implied_vol,
    straddle_return,
    trading_days_to_expiry,
)

DAY = date(2021, 6, 1)
NEAR = date(2021, 6, 8)
FAR = date(2021, 6, 29)


def _leg(
    cp_flag: str, delta: float, bid: float, ask: float, iv: float = 0.3
) -> OptionQuote:
    return OptionQuote(
        "F001", DAY, FAR, 100.0, cp_flag, bid, ask, delta, iv, 99.95, 100.05, 100.0
    )


CALL = _leg("C", 0.6, 1.5, 2.5)
PUT = _leg("P", -0.4, 0.5, 1.5)


def test_delta_neutral_weights() -> None:
    """Test the put count and the value weights of both legs."""
    # Act
    position = delta_neutral_weights(CALL, PUT)

    # Assert
    assert position.n_put == pytest.approx(1.5, abs=1e-12)
    assert position.value == pytest.approx(3.5)
    assert position.w_call == pytest.approx(4.0 / 7.0, abs=1e-12)
    assert position.w_put == pytest.approx(3.0 / 7.0, abs=1e-12)
    assert position.portfolio_delta == pytest.approx(0.0, abs=1e-12)


def test_delta_neutral_weights_errors() -> None:
    """Test a zero put delta and a worthless leg."""
    with pytest.raises(DegenerateError):
        delta_neutral_weights(CALL, _leg("P", 0.0, 0.5, 1.5))
    with pytest.raises(DataError):
        delta_neutral_weights(CALL, _leg("P", -0.4, 0.0, 0.0))


def test_straddle_returns() -> None:
    """Test the weighted leg return less the risk-free rate."""
    # Arrange
    position = delta_neutral_weights(CALL, PUT)

    # Act / Assert
    assert straddle_excess_return(0.5, 0.5, 0.1, -0.05, 0.001) == pytest.approx(0.024)
    assert straddle_return(position, 2.2, 0.9, 0.0) == pytest.approx(1.0 / 70.0)
    assert straddle_return(position, None, 0.9, 0.0) is None


def test_straddle_implied_vol() -> None:
    """Test the weighted leg volatility and its validation."""
    position = delta_neutral_weights(CALL, PUT)
    assert straddle_implied_vol(position, 0.3, 0.4) == pytest.approx(2.4 / 7.0)
    with pytest.raises(DataError):
        straddle_implied_vol(position, 0.3, math.nan)


def test_delta_hedged_excess_return() -> None:
    """Test a long call hedged with short shares."""
    assert delta_hedged_excess_return(
        5.0, 6.0, 0.5, 100.0, 101.0, 0.0
    ) == pytest.approx(-0.1 / 9.0)
    with pytest.raises(DegenerateError):
        delta_hedged_excess_return(50.0, 60.0, 0.5, 100.0, 101.0, 0.0)


def test_calendar_helpers() -> None:
    """Test trading days to expiry and the accrued risk-free rate."""
    assert trading_days_to_expiry(DAY, date(2021, 6, 15)) == 10
    assert prorate_rate(0.001, date(2021, 6, 4), date(2021, 6, 7)) == pytest.approx(
        0.003
    )


def _chain() -> pd.DataFrame:
    rows = [
        ("F001", DAY, NEAR, 100.0, "C", 0.5),
        ("F001", DAY, NEAR, 100.0, "P", -0.5),
        ("F001", DAY, FAR, 95.0, "C", 0.625),
        ("F001", DAY, FAR, 95.0, "P", -0.375),
        ("F001", DAY, FAR, 105.0, "C", 0.375),
        ("F001", DAY, FAR, 105.0, "P", -0.625),
    ]
    frame = pd.DataFrame(
        rows, columns=["firm_id", "date", "expiry", "strike", "cp_flag", "delta"]
    )
    frame = frame.assign(
        bid=4.5, ask=5.5, iv=0.3, stock_bid=99.95, stock_ask=100.05, stock_close=100.0
    )
    frame["date"] = pd.to_datetime(frame["date"])
    frame["expiry"] = pd.to_datetime(frame["expiry"])
    return frame.loc[:, list(QUOTE_COLUMNS)]


def test_select_atm_straddle() -> None:
    """Test the near-expiry cutoff and the lower strike on a delta tie."""
    # Act
    call, put = select_atm_straddle(_chain())

    # Assert
    assert call.expiry == FAR
    assert call.strike == 95.0
    assert call.is_call
    assert (put.strike, put.cp_flag) == (95.0, "P")


def test_select_atm_straddle_without_candidates() -> None:
    """Test chains that yield no straddle."""
    chain = _chain()
    assert select_atm_straddle(chain.iloc[0:0]) is None
    assert select_atm_straddle(chain.iloc[:2]) is None
    assert select_atm_straddle(chain.drop(index=3)) is None


def test_build_straddles_on_simulated_quotes(small_simulation) -> None:
    """Test that simulated quotes give delta-neutral straddles held to the next date."""
    # Act
    straddles, counts = build_straddles(small_simulation.quotes)

    # Assert
    assert list(straddles.columns) == list(STRADDLE_COLUMNS)
    assert counts["straddles"] == len(straddles) > 0
    np.testing.assert_allclose(
        straddles["w_call"] + straddles["w_put"], 1.0, rtol=1e-12
    )
    np.testing.assert_allclose(
        straddles["call_delta"] + straddles["n_put"] * straddles["put_delta"],
        0.0,
        atol=1e-12,
    )
    held = straddles.loc[straddles["next_date"].notna()]
    assert (held["next_date"] > held["date"]).all()
    assert np.isfinite(held["straddle_excess_return"]).mean() > 0.9


def test_straddles_csv_round_trip(small_simulation, tmp_path: Path) -> None:
    """Test loading the straddles artifact with its missing fields."""
    # Arrange
    straddles, _ = build_straddles(small_simulation.quotes)
    path = write_dated_csv(
        straddles, tmp_path / "straddles.csv", ("date", "next_date", "expiry")
    )

    # Act
    loaded = load_straddles_csv(path)

    # Assert
    assert len(loaded) == len(straddles)
    assert loaded["next_date"].isna().sum() == straddles["next_date"].isna().sum()
    np.testing.assert_allclose(loaded["n_put"], straddles["n_put"], rtol=1e-9)
    np.testing.assert_allclose(
        loaded["straddle_excess_return"],
        straddles["straddle_excess_return"],
        rtol=1e-9,
        equal_nan=True,
    )
