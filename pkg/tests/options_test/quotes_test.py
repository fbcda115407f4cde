"""Test option quote midpoints, reversal detection and the quote filters."""

import pandas as pd
import pytest

from vol_forecaster.definitions import QUOTE_COLUMNS
from vol_forecaster.errors import CrossedQuoteError, DataError
from vol_forecaster.options.quotes import (
    MID,
    REASON,
    OptionQuote,
    apply_option_filters,
    find_reversals,
    midpoint_price,
)

DAYS = pd.bdate_range("2021-06-01", periods=3)
EXPIRY = pd.Timestamp("2021-07-16")


def _quote(**overrides) -> dict:
    """A clean at-the-money call quote, fields overridden by keyword."""
    row = {
        "firm_id": "F001",
        "date": DAYS[0],
        "expiry": EXPIRY,
        "strike": 100.0,
        "cp_flag": "C",
        "bid": 4.5,
        "ask": 5.5,
        "delta": 0.5,
        "iv": 0.3,
        "stock_bid": 99.95,
        "stock_ask": 100.05,
        "stock_close": 100.0,
    }
    return row | overrides


def _frame(rows: list[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=list(QUOTE_COLUMNS))


@pytest.mark.parametrize(
    ("bid", "ask", "expected"), [(1.0, 3.0, 2.0), (0.0, 0.5, 0.25), (2.0, 2.0, 2.0)]
)
def test_midpoint_price(bid: float, ask: float, expected: float) -> None:
    """Test the bid-ask midpoint."""
    assert midpoint_price(bid, ask) == expected


def test_midpoint_price_errors() -> None:
    """Test a negative bid and a crossed quote."""
    with pytest.raises(DataError):
        midpoint_price(-0.1, 1.0)
    with pytest.raises(CrossedQuoteError):
        midpoint_price(1.2, 1.0)


def test_option_quote_from_row() -> None:
    """Test building a quote from a frame row."""
    quote = OptionQuote.from_row(_frame([_quote(cp_flag="P")]).iloc[0])
    assert quote.date == DAYS[0].date()
    assert quote.expiry == EXPIRY.date()
    assert not quote.is_call
    assert quote.mid == 5.0


@pytest.mark.parametrize(
    ("overrides", "reason"),
    [
        ({"bid": 5.6, "ask": 5.5}, "REASONABLE_CROSSED"),
        ({"bid": 0.0, "ask": 20.0}, "REASONABLE_SPREAD"),
        ({"bid": 0.02, "ask": 0.06}, "MIN_PRICE"),
        ({"bid": 2.0, "ask": 4.0}, "SPREAD"),
        ({"bid": 101.0, "ask": 102.0}, "ARB_BOUND_1"),
        ({"strike": 80.0}, "ARB_BOUND_2"),
        ({"cp_flag": "P", "bid": 101.0, "ask": 102.0}, "ARB_BOUND_3"),
        ({"cp_flag": "P", "strike": 120.0}, "ARB_BOUND_4"),
    ],
)
def test_filter_rejections(overrides: dict, reason: str) -> None:
    """Test that each rule rejects the quote that breaks it, and only it."""
    # Act
    kept, rejected = apply_option_filters(_frame([_quote(**overrides)]))

    # Assert
    assert kept.empty
    assert rejected[REASON].tolist() == [reason]


def test_clean_quote_is_kept() -> None:
    """Test that a sensible quote passes every rule and gets its midpoint."""
    kept, rejected = apply_option_filters(_frame([_quote(), _quote(cp_flag="P")]))
    assert rejected.empty
    assert kept[MID].tolist() == [5.0, 5.0]


def _path(mids: list[float]) -> pd.DataFrame:
    return _frame(
        [
            _quote(date=day, bid=mid, ask=mid)
            for day, mid in zip(DAYS, mids, strict=True)
        ]
    )


def test_find_reversals_flags_both_returns() -> None:
    """Test a jump of more than 2000% undone the next day."""
    # Act
    flagged = find_reversals(_path([1.0, 25.0, 1.0]))

    # Assert
    key = ("F001", EXPIRY, 100.0, "C")
    assert flagged == {(*key, DAYS[1]), (*key, DAYS[2])}


@pytest.mark.parametrize("mids", [[1.0, 25.0, 25.0], [1.0, 1.1, 1.0], [25.0, 1.0, 1.0]])
def test_persistent_moves_are_not_reversals(mids: list[float]) -> None:
    """Test price paths whose large moves are not undone."""
    assert find_reversals(_path(mids)) == set()


def test_reversal_rule_rejects_flagged_dates() -> None:
    """Test the reversal rule after the static rules."""
    # Arrange
    quotes = _path([1.0, 25.0, 1.0])

    # Act
    kept, rejected = apply_option_filters(quotes, find_reversals(quotes))

    # Assert
    assert kept["date"].tolist() == [DAYS[0]]
    assert rejected[REASON].tolist() == ["REVERSAL", "REVERSAL"]
