"""Intraday bars, realized variance and the unbalanced daily panel."""

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, fields
from datetime import date

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import NDArray

from vol_forecaster.definitions import (
    CUTOFF_SEC,
    DEFAULT_DELTA_MINUTES,
    HORIZON_DAYS,
    PANEL_COLUMNS,
    SESSION_CLOSE_SEC,
    SESSION_OPEN_SEC,
    PanelColumn,
)
from vol_forecaster.errors import (
    ConfigError,
    DataError,
    DomainError,
    FormatError,
    InsufficientDataError,
)

VALUE_FIELDS: tuple[str, ...] = PANEL_COLUMNS[2:]


@dataclass(frozen=True)
class IntradayPrint:
    """A single trade print."""

    firm_id: str
    date: date
    time: int
    price: float
    size: int
    condition_code: str | None = None
    corrected: bool = False


@dataclass(frozen=True)
class IntradayBarSeries:
    """Interval closing prices of one firm-date."""

    firm_id: str
    date: date
    prices: tuple[float, ...]
    delta_minutes: int = DEFAULT_DELTA_MINUTES

    def __post_init__(self) -> None:
        """Check the close count matches the session grid."""
        expected = n_intervals(self.delta_minutes) + 1
        if len(self.prices) != expected:
            msg = (
                f"Bar series for {self.firm_id} on {self.date} has "
                f"{len(self.prices)} closes, expected {expected}."
            )
            logger.error(msg)
            raise DataError(msg)

    @property
    def n_cutoff_returns(self) -> int:
        """Number of returns whose interval ends at or before 15:55."""
        return (CUTOFF_SEC - SESSION_OPEN_SEC) // (self.delta_minutes * 60)


@dataclass(frozen=True)
class DailyRecord:
    """Daily summary of one firm-date."""

    firm_id: str
    date: date
    ret_full_day: float
    rv_day: float
    rv_355: float
    ret_355: float


@dataclass(frozen=True)
class HorizonAverages:
    """Daily, weekly and monthly trailing averages ending at one date."""

    rv_d: float
    rv_w: float
    rv_m: float
    ret_d: float
    ret_w: float
    ret_m: float


def n_intervals(delta_minutes: int) -> int:
    """Number of sampling intervals in the 6.5 hour session.

    :param delta_minutes: Sampling interval in minutes.
    :return: Interval count, 78 for five minutes.
    :raises ConfigError: If the interval does not tile the session.
    """
    session_minutes = (SESSION_CLOSE_SEC - SESSION_OPEN_SEC) // 60
    if delta_minutes <= 0 or session_minutes % delta_minutes != 0:
        msg = (
            f"delta_minutes={delta_minutes} must be a positive divisor of "
            f"{session_minutes}."
        )
        logger.error(msg)
        raise ConfigError(msg)
    return session_minutes // delta_minutes


def compute_log_returns(prices: Sequence[float] | NDArray) -> NDArray:
    """Continuously compounded returns of an ordered price list.

    :param prices: Positive prices in time order.
    :return: ``ln(p[j+1] / p[j])`` for every consecutive pair.
    :raises InsufficientDataError: If fewer than two prices are given.
    :raises DomainError: If any price is not positive.
    """
    values = np.asarray(prices, dtype=float)
    if values.size < 2:
        msg = f"Need at least 2 prices for a return, got {values.size}."
        logger.error(msg)
        raise InsufficientDataError(msg)
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        msg = "Log returns need strictly positive finite prices."
        logger.error(msg)
        raise DomainError(msg)
    return np.diff(np.log(values))


def realized_variance(intraday_returns: Sequence[float] | NDArray) -> float:
    """Sum of squared intraday returns.

    :param intraday_returns: Intraday log returns.
    :return: Realized variance.
    :raises InsufficientDataError: If no returns are given.
    """
    values = np.asarray(intraday_returns, dtype=float)
    if values.size == 0:
        msg = "Realized variance needs at least one return."
        logger.error(msg)
        raise InsufficientDataError(msg)
    return math.fsum(values * values)


def horizon_average(daily_series: pd.Series, as_of: date, horizon: str) -> float:
    """Trailing mean over 1, 5 or 22 observations ending at ``as_of`` inclusive.

    :param daily_series: Values indexed by ascending date.
    :param as_of: Last date of the window.
    :param horizon: One of ``d``, ``w`` or ``m``.
    :return: Arithmetic mean of the window.
    :raises ConfigError: If the horizon is unknown.
    :raises InsufficientDataError: If the window is not fully available.
    """
    if horizon not in HORIZON_DAYS:
        msg = f"Unknown horizon '{horizon}', expected one of {sorted(HORIZON_DAYS)}."
        logger.error(msg)
        raise ConfigError(msg)

    length = HORIZON_DAYS[horizon]
    trailing = daily_series.loc[: pd.Timestamp(as_of)].dropna()
    if len(trailing) < length:
        msg = (
            f"Horizon '{horizon}' needs {length} observations up to {as_of}, "
            f"found {len(trailing)}."
        )
        logger.error(msg)
        raise InsufficientDataError(msg)
    return float(np.mean(trailing.to_numpy()[-length:]))


def horizon_averages(
    rv_series: pd.Series, ret_series: pd.Series, as_of: date
) -> HorizonAverages:
    """All six trailing averages ending at ``as_of``.

    :param rv_series: Daily realized variances.
    :param ret_series: Daily returns.
    :param as_of: Last date of every window.
    :return: The trailing averages.
    """
    return HorizonAverages(
        rv_d=horizon_average(rv_series, as_of, "d"),
        rv_w=horizon_average(rv_series, as_of, "w"),
        rv_m=horizon_average(rv_series, as_of, "m"),
        ret_d=horizon_average(ret_series, as_of, "d"),
        ret_w=horizon_average(ret_series, as_of, "w"),
        ret_m=horizon_average(ret_series, as_of, "m"),
    )


def build_bar_series(
    firm_id: str,
    day: date,
    times: Sequence[int] | NDArray,
    prices: Sequence[float] | NDArray,
    delta_minutes: int = DEFAULT_DELTA_MINUTES,
) -> IntradayBarSeries:
    """Sample interval closes from cleaned prints.

    The close of an interval is the last print at or before its end. Empty
    intervals carry the previous close forward. The first close falls back
    to the first print of the day when nothing trades by 09:30.

    :param firm_id: Firm identifier.
    :param day: Trading date.
    :param times: Print times in seconds since midnight, ascending.
    :param prices: Print prices aligned with ``times``.
    :param delta_minutes: Sampling interval in minutes.
    :return: The bar series.
    :raises InsufficientDataError: If there are no prints.
    """
    times = np.asarray(times, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if times.size == 0:
        msg = f"No prints for {firm_id} on {day}."
        logger.error(msg)
        raise InsufficientDataError(msg)

    steps = np.arange(n_intervals(delta_minutes) + 1)
    ends = SESSION_OPEN_SEC + 60 * delta_minutes * steps
    last_idx = np.searchsorted(times, ends, side="right") - 1
    closes = prices[np.maximum(last_idx, 0)]
    return IntradayBarSeries(
        firm_id=firm_id,
        date=day,
        prices=tuple(float(p) for p in closes),
        delta_minutes=delta_minutes,
    )


def daily_record_from_bars(
    bars: IntradayBarSeries, prev_close: float | None = None
) -> DailyRecord:
    """Summarize one firm-date of interval closes.

    :param bars: Interval closes of the day.
    :param prev_close: Previous session close, or None for a firm's first day.
    :return: The daily record.
    """
    returns = compute_log_returns(bars.prices)
    cut = bars.n_cutoff_returns
    base = bars.prices[0] if prev_close is None else prev_close
    return DailyRecord(
        firm_id=bars.firm_id,
        date=bars.date,
        ret_full_day=math.log(bars.prices[-1] / base),
        rv_day=realized_variance(returns),
        rv_355=realized_variance(returns[:cut]),
        ret_355=math.log(bars.prices[cut] / bars.prices[0]),
    )


class DailyPanel:
    """Unbalanced firm by date panel of daily records.

    The panel is immutable after construction; accessors return copies.
    """

    def __init__(self, frame: pd.DataFrame) -> None:
        """Initialize the panel from a long frame.

        :param frame: One row per firm-date with the panel CSV columns.
        :raises FormatError: If a (firm, date) key repeats or a value is invalid.
        """
        missing = [c for c in PANEL_COLUMNS if c not in frame.columns]
        if missing:
            msg = f"Panel frame is missing columns {missing}."
            logger.error(msg)
            raise FormatError(msg)

        data = frame.loc[:, list(PANEL_COLUMNS)].copy()
        data[PanelColumn.FIRM] = data[PanelColumn.FIRM].astype(str)
        data[PanelColumn.DATE] = pd.to_datetime(data[PanelColumn.DATE]).dt.normalize()
        for field in VALUE_FIELDS:
            data[field] = data[field].astype(float)

        duplicated = data.duplicated([PanelColumn.FIRM, PanelColumn.DATE])
        if duplicated.any():
            row = int(np.flatnonzero(duplicated.to_numpy())[0])
            msg = f"Duplicate (firm, date) key at row {row}."
            logger.error(msg)
            raise FormatError(msg)
        values = data.loc[:, list(VALUE_FIELDS)].to_numpy()
        if not np.all(np.isfinite(values)):
            msg = "Panel values must be finite."
            logger.error(msg)
            raise FormatError(msg)
        if (data[PanelColumn.RV_DAY] < 0).any() or (data[PanelColumn.RV_355] < 0).any():
            msg = "Realized variances must be non-negative."
            logger.error(msg)
            raise FormatError(msg)

        self._frame = data.sort_values([PanelColumn.FIRM, PanelColumn.DATE]).set_index(
            [PanelColumn.FIRM, PanelColumn.DATE]
        )
        dates, firms = self.date_index, self.firm_index
        self._wide: dict[str, pd.DataFrame] = {
            name: self._frame[name]
            .unstack(PanelColumn.FIRM)
            .reindex(index=dates, columns=firms)
            for name in VALUE_FIELDS
        }
        logger.debug(
            f"Built panel. firms={len(self.firm_index)} dates={len(self.date_index)} "
            f"records={len(self._frame)}"
        )

    @classmethod
    def from_records(cls, records: Iterable[DailyRecord]) -> "DailyPanel":
        """Build a panel from daily records.

        :param records: Daily records in any order.
        :return: The panel.
        """
        rows = [asdict(r) for r in records]
        columns = [f.name for f in fields(DailyRecord)]
        return cls(pd.DataFrame(rows, columns=columns))

    def __len__(self) -> int:
        """Number of firm-date records."""
        return len(self._frame)

    @property
    def date_index(self) -> pd.DatetimeIndex:
        """Ordered unique dates."""
        dates = self._frame.index.get_level_values(PanelColumn.DATE).unique()
        return pd.DatetimeIndex(dates).sort_values()

    @property
    def firm_index(self) -> list[str]:
        """Sorted unique firms."""
        return sorted(self._frame.index.get_level_values(PanelColumn.FIRM).unique())

    @property
    def frame(self) -> pd.DataFrame:
        """Copy of the long frame with the CSV columns."""
        return self._frame.reset_index()

    @property
    def records(self) -> Mapping[tuple[str, pd.Timestamp], DailyRecord]:
        """All records keyed by (firm_id, date)."""
        return {
            (firm, day): self._to_record(firm, day, row)
            for (firm, day), row in zip(
                self._frame.index, self._frame.to_numpy(), strict=True
            )
        }

    def record(self, firm_id: str, day: date) -> DailyRecord:
        """Look up one record.

        :param firm_id: Firm identifier.
        :param day: Trading date.
        :return: The record.
        :raises KeyError: If the firm has no record on that date.
        """
        row = self._frame.loc[(firm_id, pd.Timestamp(day))]
        return self._to_record(firm_id, pd.Timestamp(day), row.to_numpy())

    def wide(self, field: str) -> pd.DataFrame:
        """Dates by firms matrix of one field, NaN where a firm is absent.

        :param field: One of the panel value columns.
        :return: A copy of the matrix.
        """
        if field not in VALUE_FIELDS:
            msg = f"Unknown panel field '{field}'."
            logger.error(msg)
            raise ConfigError(msg)
        return self._wide[field].copy()

    def presence(self) -> pd.DataFrame:
        """Dates by firms boolean matrix of record availability."""
        return self.wide(PanelColumn.RV_DAY).notna()

    @staticmethod
    def _to_record(firm_id: str, day: pd.Timestamp, row: NDArray) -> DailyRecord:
        return DailyRecord(firm_id, day.date(), *(float(v) for v in row))
