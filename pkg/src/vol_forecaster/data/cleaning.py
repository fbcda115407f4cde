"""Trade print cleaning for one firm-date."""

from collections.abc import Sequence

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import NDArray

from vol_forecaster.data.panel import (
    DailyPanel,
    DailyRecord,
    IntradayPrint,
    build_bar_series,
    daily_record_from_bars,
)
from vol_forecaster.definitions import (
    DEFAULT_DELTA_MINUTES,
    EXCLUDED_CONDITION_CODES,
    PRINT_REVERSAL_LOG_THRESHOLD,
    RANGE_COLUMNS,
    SESSION_CLOSE_SEC,
    SESSION_OPEN_SEC,
    PrintColumn,
)
from vol_forecaster.errors import InsufficientDataError


def size_weighted_median(prices: NDArray, sizes: NDArray) -> float:
    """Median of the multiset where each price is repeated ``size`` times.

    :param prices: Print prices.
    :param sizes: Positive integer sizes.
    :return: The median price; the mean of the two middle values for even totals.
    """
    order = np.argsort(prices, kind="stable")
    ordered = np.asarray(prices, dtype=float)[order]
    cum = np.cumsum(np.asarray(sizes, dtype=np.int64)[order])
    total = int(cum[-1])
    lower = ordered[np.searchsorted(cum, (total + 1) // 2, side="left")]
    upper = ordered[np.searchsorted(cum, total // 2 + 1, side="left")]
    return float((lower + upper) / 2.0)


def _has_excluded_code(code: object) -> bool:
    if not isinstance(code, str):
        return False
    return any(ch in EXCLUDED_CONDITION_CODES for ch in code.strip().upper())


def _merge_same_timestamps(frame: pd.DataFrame) -> pd.DataFrame:
    if not frame[PrintColumn.TIME].duplicated().any():
        return frame
    rows = []
    for time, group in frame.groupby(PrintColumn.TIME, sort=True):
        if len(group) == 1:
            rows.append(group.iloc[0].to_dict())
            continue
        rows.append(
            {
                PrintColumn.TIME: time,
                PrintColumn.PRICE: size_weighted_median(
                    group[PrintColumn.PRICE].to_numpy(),
                    group[PrintColumn.SIZE].to_numpy(),
                ),
                PrintColumn.SIZE: int(group[PrintColumn.SIZE].sum()),
                PrintColumn.COND: None,
                PrintColumn.CORR: 0,
            }
        )
    return pd.DataFrame(rows, columns=frame.columns)


def _drop_reversals(frame: pd.DataFrame) -> tuple[pd.DataFrame, int]:
    prices = frame[PrintColumn.PRICE].to_numpy(dtype=float)
    keep = np.ones(prices.size, dtype=bool)
    dropped = 0
    while True:
        kept = prices[keep]
        if kept.size < 3:
            break
        moves = np.diff(np.log(kept))
        big = np.abs(moves) >= PRINT_REVERSAL_LOG_THRESHOLD
        flagged = big[:-1] & big[1:] & (np.sign(moves[:-1]) == -np.sign(moves[1:]))
        if not flagged.any():
            break
        # print i+1 of the kept sequence caused the move that was reversed
        spike = int(np.flatnonzero(flagged)[0]) + 1
        keep[np.flatnonzero(keep)[spike]] = False
        dropped += 1
    return frame.loc[keep], dropped


def clean_print_frame(
    frame: pd.DataFrame,
    daily_high: float | None = None,
    daily_low: float | None = None,
) -> tuple[pd.DataFrame, dict[str, int]]:
    """Clean the prints of one firm-date.

    Rules run in order: zero price or size, excluded condition codes,
    corrected prints, outside the session or the daily range, same-timestamp
    merge to the size-weighted median, then transaction-to-transaction
    reversals until none remain.

    :param frame: Prints sorted by time with ``time``, ``price``, ``size`` and
        optional ``cond`` and ``corr`` columns.
    :param daily_high: Daily high, or None to skip the range rule.
    :param daily_low: Daily low, or None to skip the range rule.
    :return: The cleaned frame and per-rule drop counts.
    """
    data = frame.copy()
    if PrintColumn.COND not in data.columns:
        data[PrintColumn.COND] = None
    if PrintColumn.CORR not in data.columns:
        data[PrintColumn.CORR] = 0
    data = data.loc[
        :,
        [
            PrintColumn.TIME,
            PrintColumn.PRICE,
            PrintColumn.SIZE,
            PrintColumn.COND,
            PrintColumn.CORR,
        ],
    ]
    stats: dict[str, int] = {"input": len(data)}

    price = data[PrintColumn.PRICE].astype(float)
    size = data[PrintColumn.SIZE].astype(float)
    valid = (price > 0) & (size > 0) & np.isfinite(price)
    stats["zero_price_or_size"] = int((~valid).sum())
    data = data.loc[valid]

    excluded = data[PrintColumn.COND].map(_has_excluded_code).astype(bool)
    stats["condition_code"] = int(excluded.sum())
    data = data.loc[~excluded]

    corrected = data[PrintColumn.CORR].fillna(0).astype(float) != 0
    stats["corrected"] = int(corrected.sum())
    data = data.loc[~corrected]

    time = data[PrintColumn.TIME]
    inside = (time >= SESSION_OPEN_SEC) & (time <= SESSION_CLOSE_SEC)
    if daily_high is not None and daily_low is not None:
        inside &= data[PrintColumn.PRICE].between(daily_low, daily_high)
    stats["out_of_range"] = int((~inside).sum())
    data = data.loc[inside]

    before = len(data)
    data = _merge_same_timestamps(data)
    stats["merged_timestamps"] = before - len(data)

    data, stats["reversal"] = _drop_reversals(data)
    stats["output"] = len(data)
    return data.reset_index(drop=True), stats


def filter_intraday_prints(
    prints: Sequence[IntradayPrint],
    daily_high: float | None = None,
    daily_low: float | None = None,
) -> list[IntradayPrint]:
    """Apply the print cleaning rules to one firm-date.

    An empty result is legal; the caller decides whether the day is usable.

    :param prints: Prints of a single firm-date sorted by time.
    :param daily_high: Daily high, or None to skip the range rule.
    :param daily_low: Daily low, or None to skip the range rule.
    :return: The cleaned prints.
    """
    if not prints:
        return []
    firm_id, day = prints[0].firm_id, prints[0].date
    frame = pd.DataFrame(
        {
            PrintColumn.TIME: [p.time for p in prints],
            PrintColumn.PRICE: [p.price for p in prints],
            PrintColumn.SIZE: [p.size for p in prints],
            PrintColumn.COND: [p.condition_code for p in prints],
            PrintColumn.CORR: [int(p.corrected) for p in prints],
        }
    )
    cleaned, stats = clean_print_frame(
        frame, daily_high=daily_high, daily_low=daily_low
    )
    logger.trace(f"Cleaned prints. firm={firm_id} date={day} {stats}")
    return [
        IntradayPrint(
            firm_id=firm_id,
            date=day,
            time=int(row[PrintColumn.TIME]),
            price=float(row[PrintColumn.PRICE]),
            size=int(row[PrintColumn.SIZE]),
            condition_code=(
                row[PrintColumn.COND]
                if isinstance(row[PrintColumn.COND], str)
                else None
            ),
            corrected=bool(row[PrintColumn.CORR]),
        )
        for _, row in cleaned.iterrows()
    ]


def build_daily_panel(
    prints: pd.DataFrame,
    ranges: pd.DataFrame | None = None,
    delta_minutes: int = DEFAULT_DELTA_MINUTES,
) -> tuple[DailyPanel, dict[str, int]]:
    """Clean prints, sample interval closes and summarize every firm-date.

    :param prints: Prints sorted by firm, date and time.
    :param ranges: Optional daily ``high``/``low`` per firm-date.
    :param delta_minutes: Sampling interval in minutes.
    :return: The daily panel and aggregate cleaning counts.
    :raises InsufficientDataError: If no firm-date survives cleaning.
    """
    bounds: dict[tuple[str, pd.Timestamp], tuple[float, float]] = {}
    if ranges is not None:
        bounds = {
            (str(firm), pd.Timestamp(day)): (float(high), float(low))
            for firm, day, high, low in ranges.loc[
                :, list(RANGE_COLUMNS)
            ].itertuples(index=False)
        }

    totals: dict[str, int] = {}
    records: list[DailyRecord] = []
    last_close: dict[str, float] = {}
    by_firm_day = prints.groupby([PrintColumn.FIRM, PrintColumn.DATE], sort=True)
    for (firm, day), group in by_firm_day:
        high, low = bounds.get((str(firm), pd.Timestamp(day)), (None, None))
        cleaned, stats = clean_print_frame(group, daily_high=high, daily_low=low)
        for name, count in stats.items():
            totals[name] = totals.get(name, 0) + count
        if cleaned.empty:
            totals["empty_days"] = totals.get("empty_days", 0) + 1
            logger.debug(f"No usable prints. firm={firm} date={day.date()}")
            continue
        bars = build_bar_series(
            str(firm),
            day.date(),
            cleaned[PrintColumn.TIME].to_numpy(),
            cleaned[PrintColumn.PRICE].to_numpy(),
            delta_minutes=delta_minutes,
        )
        records.append(daily_record_from_bars(bars, last_close.get(str(firm))))
        last_close[str(firm)] = bars.prices[-1]

    if not records:
        msg = "No firm-date survived print cleaning."
        logger.error(msg)
        raise InsufficientDataError(msg)
    logger.info(
        f"Computed daily panel. records={len(records)} "
        + " ".join(f"{k}={v}" for k, v in totals.items())
    )
    return DailyPanel.from_records(records), totals
