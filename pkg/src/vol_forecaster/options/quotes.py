"""End-of-day option quotes and the quote filters."""

from collections.abc import Iterable
from dataclasses import dataclass
from datetime import date

import numpy as np
import pandas as pd
from loguru import logger

from vol_forecaster.definitions import QUOTE_COLUMNS, OptionFilterLimit, QuoteColumn
from vol_forecaster.errors import CrossedQuoteError, DataError

CONTRACT_KEY: tuple[str, ...] = (
    QuoteColumn.FIRM,
    QuoteColumn.EXPIRY,
    QuoteColumn.STRIKE,
    QuoteColumn.CP_FLAG,
)
REASON = "reason"
MID = "mid"
LEG_RETURN = "leg_return"


@dataclass(frozen=True)
class OptionQuote:
    """Closing quote of one option contract."""

    firm_id: str
    date: date
    expiry: date
    strike: float
    cp_flag: str
    bid: float
    ask: float
    delta: float
    iv: float
    stock_bid: float
    stock_ask: float
    stock_close: float

    @property
    def mid(self) -> float:
        """Midpoint of bid and ask."""
        return midpoint_price(self.bid, self.ask)

    @property
    def is_call(self) -> bool:
        """Whether the contract is a call."""
        return self.cp_flag == "C"

    @classmethod
    def from_row(cls, row: pd.Series) -> "OptionQuote":
        """Build a quote from a row of the quotes frame."""
        values = {col: row[col] for col in QUOTE_COLUMNS}
        values[QuoteColumn.DATE] = pd.Timestamp(values[QuoteColumn.DATE]).date()
        values[QuoteColumn.EXPIRY] = pd.Timestamp(values[QuoteColumn.EXPIRY]).date()
        return cls(**values)


def midpoint_price(bid: float, ask: float) -> float:
    """Average of bid and ask.

    :param bid: Bid, non-negative.
    :param ask: Ask.
    :return: ``(bid + ask) / 2``.
    :raises DataError: If the bid is negative.
    :raises CrossedQuoteError: If the bid exceeds the ask.
    """
    if bid < 0:
        msg = f"Negative bid {bid}."
        logger.error(msg)
        raise DataError(msg)
    if bid > ask:
        msg = f"Crossed quote: bid {bid} above ask {ask}."
        logger.error(msg)
        raise CrossedQuoteError(msg)
    return (bid + ask) / 2.0


def find_reversals(quotes: pd.DataFrame) -> set[tuple]:
    """Contract-dates whose leg return sits on an apparent price error.

    A leg return is the change in midpoint between consecutive quote dates
    of one contract. A jump above +2000% followed by a drop below -95%, or
    the reverse, flags the return of both days.

    :param quotes: Quotes of any number of dates.
    :return: ``(firm_id, expiry, strike, cp_flag, date)`` keys of flagged returns.
    """
    frame = quotes.loc[quotes[QuoteColumn.BID] <= quotes[QuoteColumn.ASK]].copy()
    frame[MID] = (frame[QuoteColumn.BID] + frame[QuoteColumn.ASK]) / 2.0
    frame = frame.loc[frame[MID] > 0].sort_values([*CONTRACT_KEY, QuoteColumn.DATE])
    frame[LEG_RETURN] = frame.groupby(list(CONTRACT_KEY), sort=False)[MID].pct_change()
    following = frame.groupby(list(CONTRACT_KEY), sort=False)[LEG_RETURN].shift(-1)

    up, down = OptionFilterLimit.REVERSAL_UP, OptionFilterLimit.REVERSAL_DOWN
    ret = frame[LEG_RETURN]
    first = ((ret > up) & (following < down)) | ((ret < down) & (following > up))
    by_contract = frame.groupby(list(CONTRACT_KEY), sort=False)
    next_date = by_contract[QuoteColumn.DATE].shift(-1)

    flagged: set[tuple] = set()
    for key, day, nxt in zip(
        frame.loc[first, list(CONTRACT_KEY)].itertuples(index=False, name=None),
        frame.loc[first, QuoteColumn.DATE],
        next_date.loc[first],
        strict=True,
    ):
        flagged.add((*key, pd.Timestamp(day)))
        flagged.add((*key, pd.Timestamp(nxt)))
    if flagged:
        logger.info(f"Flagged option leg reversals. returns={len(flagged)}")
    return flagged


def _contract_dates(frame: pd.DataFrame) -> Iterable[tuple]:
    keys = frame.loc[:, [*CONTRACT_KEY, QuoteColumn.DATE]].itertuples(
        index=False, name=None
    )
    return ((*k[:-1], pd.Timestamp(k[-1])) for k in keys)


def apply_option_filters(
    quotes: pd.DataFrame, reversals: set[tuple] | None = None
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Split quotes into kept and rejected, each rejection with its first failed rule.

    Rules, in order: reasonable quote (``REASONABLE_CROSSED``,
    ``REASONABLE_SPREAD``), ``MIN_PRICE``, ``SPREAD``, the four no-arbitrage
    bounds ``ARB_BOUND_1`` to ``ARB_BOUND_4`` and ``REVERSAL``.

    :param quotes: Quotes frame with the option quotes columns.
    :param reversals: Contract-date keys from ``find_reversals``.
    :return: Kept quotes with a ``mid`` column, and rejected quotes with a
        ``reason`` column.
    """
    frame = quotes.copy()
    bid, ask = frame[QuoteColumn.BID], frame[QuoteColumn.ASK]
    strike = frame[QuoteColumn.STRIKE]
    is_call = frame[QuoteColumn.CP_FLAG] == "C"
    mid = (bid + ask) / 2.0
    spread = ask - bid
    stock_bid, stock_ask = frame[QuoteColumn.STOCK_BID], frame[QuoteColumn.STOCK_ASK]
    limit = OptionFilterLimit

    rules = [
        ("REASONABLE_CROSSED", bid > ask),
        (
            "REASONABLE_SPREAD",
            spread
            > np.minimum(limit.REASONABLE_SPREAD_CAP, frame[QuoteColumn.STOCK_CLOSE]),
        ),
        ("MIN_PRICE", mid < limit.MIN_MIDPOINT),
        ("SPREAD", spread > limit.MAX_SPREAD_TO_MID * mid),
        ("ARB_BOUND_1", is_call & (bid > stock_ask)),
        ("ARB_BOUND_2", is_call & (ask < np.maximum(0.0, stock_bid - strike))),
        ("ARB_BOUND_3", ~is_call & (bid > strike)),
        ("ARB_BOUND_4", ~is_call & (ask < np.maximum(0.0, strike - stock_ask))),
    ]
    if reversals:
        flagged = [key in reversals for key in _contract_dates(frame)]
        rules.append(("REVERSAL", pd.Series(flagged, index=frame.index)))

    reason = pd.Series(None, index=frame.index, dtype=object)
    for name, failed in rules:
        reason = reason.mask(reason.isna() & failed, name)

    frame[MID] = mid
    kept = frame.loc[reason.isna()]
    rejected = frame.loc[reason.notna()].assign(**{REASON: reason[reason.notna()]})
    if not rejected.empty:
        counts = rejected[REASON].value_counts().sort_index()
        logger.debug(
            f"Filtered option quotes. kept={len(kept)} "
            + " ".join(f"{k}={v}" for k, v in counts.items())
        )
    return kept, rejected
