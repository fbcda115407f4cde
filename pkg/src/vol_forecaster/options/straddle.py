"""Delta-neutral at-the-money straddles and their daily returns."""

import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from vol_forecaster.data.io import read_validated_csv
from vol_forecaster.definitions import (
    ATM_DELTA,
    CSV_DATE_FORMAT,
    MIN_DAYS_TO_EXPIRY,
    QuoteColumn,
)
from vol_forecaster.errors import DataError, DegenerateError
from vol_forecaster.options.quotes import (
    CONTRACT_KEY,
    OptionQuote,
    apply_option_filters,
    find_reversals,
)

STRADDLE_COLUMNS: tuple[str, ...] = (
    "firm_id",
    "date",
    "next_date",
    "expiry",
    "strike",
    "call_delta",
    "put_delta",
    "n_put",
    "w_call",
    "w_put",
    "straddle_iv",
    "straddle_excess_return",
    "dh_call_excess_return",
)


@dataclass(frozen=True)
class StraddlePosition:
    """One call plus ``n_put`` puts of the same strike and expiry, delta neutral."""

    firm_id: str
    formation_date: date
    expiry: date
    strike: float
    call_mid: float
    put_mid: float
    call_delta: float
    put_delta: float
    n_put: float
    w_call: float
    w_put: float
    n_call: float = 1.0

    @property
    def value(self) -> float:
        """Cost of the position."""
        return self.n_call * self.call_mid + self.n_put * self.put_mid

    @property
    def portfolio_delta(self) -> float:
        """Net delta, zero up to rounding."""
        return self.n_call * self.call_delta + self.n_put * self.put_delta


def trading_days_to_expiry(day: date, expiry: date) -> int:
    """Business days from ``day`` up to, not including, ``expiry``."""
    return int(np.busday_count(np.datetime64(day, "D"), np.datetime64(expiry, "D")))


def select_atm_straddle(quotes: pd.DataFrame) -> tuple[OptionQuote, OptionQuote] | None:
    """Pick the call nearest 0.5 delta and its matching put.

    Only the shortest expiry with at least ten trading days left is used.
    Equidistant calls resolve to the lower strike.

    :param quotes: Filtered quotes of one firm-date.
    :return: The call and put, or None if no expiry qualifies or the call
        has no matching put.
    """
    if quotes.empty:
        return None
    day = pd.Timestamp(quotes[QuoteColumn.DATE].iloc[0]).date()
    expiries = sorted(pd.to_datetime(quotes[QuoteColumn.EXPIRY].unique()))
    usable = [
        e
        for e in expiries
        if trading_days_to_expiry(day, e.date()) >= MIN_DAYS_TO_EXPIRY
    ]
    if not usable:
        return None

    chain = quotes.loc[pd.to_datetime(quotes[QuoteColumn.EXPIRY]) == usable[0]]
    calls = chain.loc[chain[QuoteColumn.CP_FLAG] == "C"]
    if calls.empty:
        return None
    distance = (calls[QuoteColumn.DELTA] - ATM_DELTA).abs()
    ranked = calls.assign(_distance=distance).sort_values(
        ["_distance", QuoteColumn.STRIKE], kind="stable"
    )
    call = ranked.iloc[0]
    puts = chain.loc[
        (chain[QuoteColumn.CP_FLAG] == "P")
        & (chain[QuoteColumn.STRIKE] == call[QuoteColumn.STRIKE])
    ]
    if puts.empty:
        return None
    return OptionQuote.from_row(call), OptionQuote.from_row(puts.iloc[0])


def delta_neutral_weights(call: OptionQuote, put: OptionQuote) -> StraddlePosition:
    """Size the put leg so the straddle has zero delta.

    :param call: Call quote.
    :param put: Put quote with the call's strike and expiry.
    :return: The position with value weights of both legs.
    :raises DegenerateError: If the put delta is zero.
    :raises DataError: If a midpoint is not positive.
    """
    if put.delta == 0:
        msg = f"Zero put delta for {put.firm_id} on {put.date}."
        logger.error(msg)
        raise DegenerateError(msg)
    call_mid, put_mid = call.mid, put.mid
    if call_mid <= 0 or put_mid <= 0:
        msg = f"Straddle legs need positive midpoints, got {call_mid} and {put_mid}."
        logger.error(msg)
        raise DataError(msg)

    n_put = -call.delta / put.delta
    value = call_mid + n_put * put_mid
    return StraddlePosition(
        firm_id=call.firm_id,
        formation_date=call.date,
        expiry=call.expiry,
        strike=call.strike,
        call_mid=call_mid,
        put_mid=put_mid,
        call_delta=call.delta,
        put_delta=put.delta,
        n_put=n_put,
        w_call=call_mid / value,
        w_put=n_put * put_mid / value,
    )


def straddle_excess_return(
    w_call: float, w_put: float, call_return: float, put_return: float, rf: float
) -> float:
    """Weighted leg return less the risk-free rate of the holding period."""
    return w_call * call_return + w_put * put_return - rf


def straddle_return(
    position: StraddlePosition,
    next_call_mid: float | None,
    next_put_mid: float | None,
    rf: float,
) -> float | None:
    """Excess return of holding the straddle to the next quote date.

    :param position: The position.
    :param next_call_mid: Call midpoint on the next date, None if unquoted.
    :param next_put_mid: Put midpoint on the next date, None if unquoted.
    :param rf: Risk-free rate over the holding period.
    :return: The excess return, or None when a leg is missing.
    """
    if next_call_mid is None or next_put_mid is None:
        return None
    return straddle_excess_return(
        position.w_call,
        position.w_put,
        next_call_mid / position.call_mid - 1.0,
        next_put_mid / position.put_mid - 1.0,
        rf,
    )


def prorate_rate(daily_rate: float, start: date, end: date) -> float:
    """Flat daily rate accrued over the calendar days between two dates."""
    return daily_rate * (pd.Timestamp(end) - pd.Timestamp(start)).days


def straddle_implied_vol(
    position: StraddlePosition, call_iv: float, put_iv: float
) -> float:
    """Implied volatility of the straddle as the weighted leg volatility.

    :param position: The position supplying the leg weights.
    :param call_iv: Call implied volatility.
    :param put_iv: Put implied volatility.
    :return: ``w_call * call_iv + w_put * put_iv``.
    :raises DataError: If a volatility is not positive or not finite.
    """
    if not all(v > 0 and math.isfinite(v) for v in (call_iv, put_iv)):
        msg = f"Implied volatilities must be positive, got {call_iv} and {put_iv}."
        logger.error(msg)
        raise DataError(msg)
    return position.w_call * call_iv + position.w_put * put_iv


def delta_hedged_excess_return(
    option_mid_t0: float,
    option_mid_t1: float,
    delta_t0: float,
    spot_t0: float,
    spot_t1: float,
    rf: float,
) -> float:
    """Excess return of a long option hedged with ``delta_t0`` short shares.

    :param option_mid_t0: Option midpoint at formation.
    :param option_mid_t1: Option midpoint one period later.
    :param delta_t0: Option delta at formation.
    :param spot_t0: Underlying price at formation.
    :param spot_t1: Underlying price one period later.
    :param rf: Risk-free rate over the period.
    :return: The hedged portfolio's excess return.
    :raises DegenerateError: If the hedged portfolio costs nothing.
    """
    value = option_mid_t0 - delta_t0 * spot_t0
    if value == 0:
        msg = "Delta-hedged portfolio has zero value."
        logger.error(msg)
        raise DegenerateError(msg)
    option_return = option_mid_t1 / option_mid_t0 - 1.0
    spot_return = spot_t1 / spot_t0 - 1.0
    return (option_mid_t0 / value) * (option_return - rf) + (
        -delta_t0 * spot_t0 / value
    ) * (spot_return - rf)


def _next_mid(next_quotes: pd.DataFrame, quote: OptionQuote) -> float | None:
    key = (pd.Timestamp(quote.expiry), quote.strike, quote.cp_flag)
    try:
        row = next_quotes.loc[key]
    except KeyError:
        return None
    bid, ask = float(row[QuoteColumn.BID]), float(row[QuoteColumn.ASK])
    if bid > ask or bid + ask <= 0:
        return None
    return (bid + ask) / 2.0


def build_straddles(
    quotes: pd.DataFrame, rf_daily: float = 0.0
) -> tuple[pd.DataFrame, dict[str, int]]:
    """Form a straddle per firm-date and hold it to the firm's next quote date.

    :param quotes: Option quotes of every firm and date.
    :param rf_daily: Flat daily risk-free rate, accrued per calendar day.
    :return: One row per formed straddle with the straddle columns, NaN
        returns where the next-day legs are missing or reversed, and skip
        counts by reason.
    """
    reversals = find_reversals(quotes)
    kept, rejected = apply_option_filters(quotes, reversals)
    counts: dict[str, int] = {"quotes": len(quotes), "rejected": len(rejected)}

    contracts = quotes.assign(
        **{QuoteColumn.EXPIRY: pd.to_datetime(quotes[QuoteColumn.EXPIRY])}
    )
    # (firm, date) -> quotes keyed by (expiry, strike, cp_flag)
    by_day = {
        (firm, pd.Timestamp(day)): group.set_index(
            list(CONTRACT_KEY[1:])
        ).sort_index()
        for (firm, day), group in contracts.groupby(
            [QuoteColumn.FIRM, QuoteColumn.DATE], sort=True
        )
    }
    rows = []
    for firm, firm_quotes in kept.groupby(QuoteColumn.FIRM, sort=True):
        all_dates = sorted(d for f, d in by_day if f == firm)
        following = dict(zip(all_dates[:-1], all_dates[1:], strict=True))
        for day, day_quotes in firm_quotes.groupby(QuoteColumn.DATE, sort=True):
            day = pd.Timestamp(day)
            pair = select_atm_straddle(day_quotes)
            if pair is None:
                counts["no_straddle"] = counts.get("no_straddle", 0) + 1
                continue
            call, put = pair
            try:
                position = delta_neutral_weights(call, put)
                iv = straddle_implied_vol(position, call.iv, put.iv)
            except (DegenerateError, DataError):
                counts["degenerate"] = counts.get("degenerate", 0) + 1
                continue

            nxt = following.get(day)
            ret, hedged = np.nan, np.nan
            if nxt is not None:
                next_quotes = by_day[(firm, nxt)]
                call_next = _next_mid(next_quotes, call)
                put_next = _next_mid(next_quotes, put)
                reversed_leg = any(
                    (q.firm_id, pd.Timestamp(q.expiry), q.strike, q.cp_flag, nxt)
                    in reversals
                    for q in (call, put)
                )
                rf = prorate_rate(rf_daily, day, nxt)
                value = (
                    None
                    if reversed_leg
                    else straddle_return(position, call_next, put_next, rf)
                )
                if value is not None:
                    ret = value
                    spot_next = float(next_quotes[QuoteColumn.STOCK_CLOSE].iloc[0])
                    hedged = delta_hedged_excess_return(
                        call.mid, call_next, call.delta, call.stock_close, spot_next, rf
                    )
            if not np.isfinite(ret):
                counts["missing_return"] = counts.get("missing_return", 0) + 1
            rows.append(
                {
                    "firm_id": firm,
                    "date": day,
                    "next_date": nxt if nxt is not None else pd.NaT,
                    "expiry": pd.Timestamp(position.expiry),
                    "strike": position.strike,
                    "call_delta": position.call_delta,
                    "put_delta": position.put_delta,
                    "n_put": position.n_put,
                    "w_call": position.w_call,
                    "w_put": position.w_put,
                    "straddle_iv": iv,
                    "straddle_excess_return": ret,
                    "dh_call_excess_return": hedged,
                }
            )

    counts["straddles"] = len(rows)
    logger.info("Built straddles. " + " ".join(f"{k}={v}" for k, v in counts.items()))
    return pd.DataFrame(rows, columns=list(STRADDLE_COLUMNS)), counts


def load_straddles_csv(path: Path) -> pd.DataFrame:
    """Load a straddles CSV written by the straddles stage.

    Empty ``next_date`` and return fields read as missing.

    :param path: Straddles CSV.
    :return: The straddles with parsed dates.
    :raises FormatError: On schema, key or order violations.
    """
    frame = read_validated_csv(
        path,
        STRADDLE_COLUMNS,
        key=("firm_id", "date"),
        date_columns=("date", "expiry"),
        numeric_columns=STRADDLE_COLUMNS[4:11],
    )
    frame["next_date"] = pd.to_datetime(
        frame["next_date"], format=CSV_DATE_FORMAT, errors="coerce"
    )
    for col in STRADDLE_COLUMNS[11:]:
        frame[col] = pd.to_numeric(frame[col], errors="coerce")
    logger.info(f"Loaded straddles. path={path} rows={len(frame)}")
    return frame
