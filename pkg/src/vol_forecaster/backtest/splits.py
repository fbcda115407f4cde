"""Walk-forward splits, filtration stamps and the balanced-window filter."""

from collections.abc import Sequence
from dataclasses import dataclass
from datetime import date

import pandas as pd
from loguru import logger

from vol_forecaster.data.panel import DailyPanel
from vol_forecaster.definitions import CLOSE_MARKER, CUTOFF_MARKER, PanelColumn
from vol_forecaster.errors import ConfigError, EmptyUniverseError, InsufficientDataError

# fields observable at 15:55 on their own date
CUTOFF_FIELDS = frozenset({PanelColumn.RV_355, PanelColumn.RET_355})


@dataclass(frozen=True, order=True)
class FiltrationStamp:
    """Date and intraday marker of an observation or a forecast cutoff."""

    date: pd.Timestamp
    marker: str = CUTOFF_MARKER

    def __post_init__(self) -> None:
        """Normalize the date and check the marker."""
        if self.marker not in (CUTOFF_MARKER, CLOSE_MARKER):
            msg = f"Unknown filtration marker '{self.marker}'."
            logger.error(msg)
            raise ConfigError(msg)
        object.__setattr__(self, "date", pd.Timestamp(self.date).normalize())

    @classmethod
    def of_field(cls, field: str, day: date) -> "FiltrationStamp":
        """Stamp of a panel field observed on ``day``.

        :param field: Panel value column.
        :param day: Observation date.
        :return: 15:55 for the cutoff fields, 16:00 for full-day fields.
        """
        marker = CUTOFF_MARKER if field in CUTOFF_FIELDS else CLOSE_MARKER
        return cls(pd.Timestamp(day), marker)


@dataclass(frozen=True)
class SplitSpec:
    """One walk-forward step.

    Dates are target dates of (predictor, response) pairs. Training targets
    run from ``train_start`` to ``train_end``; the pair targeting
    ``excluded_target`` (the origin itself) is never trained on.
    """

    origin: pd.Timestamp
    train_start: pd.Timestamp
    train_end: pd.Timestamp
    forecast_target: pd.Timestamp
    window_start: pd.Timestamp
    position: int

    @property
    def excluded_target(self) -> pd.Timestamp:
        """Target date of the pair that is not yet observed at the origin."""
        return self.origin

    @property
    def stamp(self) -> FiltrationStamp:
        """Cutoff of everything the forecast may use."""
        return FiltrationStamp(self.origin, CUTOFF_MARKER)


def make_walkforward_splits(
    dates: Sequence[date] | pd.DatetimeIndex, window_w: int, lookback: int = 0
) -> list[SplitSpec]:
    """Enumerate the walk-forward splits of an ordered date list.

    Each origin ``t`` trains on targets ``t-W+1 .. t-1``, leaves out the
    pair targeting ``t`` and forecasts ``t+1``. The first origin keeps
    ``lookback`` extra dates before ``t-W`` for trailing averages.

    :param dates: Ascending trading dates.
    :param window_w: Window length ``W``.
    :param lookback: Dates needed before the first predictor date.
    :return: Splits in origin order.
    :raises ConfigError: If ``window_w`` is not positive or ``lookback`` negative.
    :raises InsufficientDataError: If no split fits.
    """
    if window_w < 1 or lookback < 0:
        msg = f"Need window_w >= 1 and lookback >= 0, got {window_w} and {lookback}."
        logger.error(msg)
        raise ConfigError(msg)

    index = pd.DatetimeIndex(dates)
    first = window_w + lookback
    if len(index) <= window_w + 1 or first > len(index) - 2:
        msg = (
            f"{len(index)} dates cannot hold a window of {window_w} "
            f"plus {lookback} lookback dates and a target."
        )
        logger.error(msg)
        raise InsufficientDataError(msg)

    return [
        SplitSpec(
            origin=index[p],
            train_start=index[p - window_w + 1],
            train_end=index[p - 1],
            forecast_target=index[p + 1],
            window_start=index[p - window_w - lookback],
            position=p,
        )
        for p in range(first, len(index) - 1)
    ]


def balanced_window_filter(panel: DailyPanel, window: tuple[date, date]) -> list[str]:
    """Firms with a record on every panel date inside ``window``.

    :param panel: The panel.
    :param window: First and last date, inclusive.
    :return: Surviving firms, sorted.
    :raises ConfigError: If the window holds no panel date.
    :raises EmptyUniverseError: If no firm survives.
    """
    presence = panel.presence()
    rows = presence.loc[pd.Timestamp(window[0]) : pd.Timestamp(window[1])]
    if rows.empty:
        msg = f"Window [{window[0]}, {window[1]}] holds no panel date."
        logger.error(msg)
        raise ConfigError(msg)

    survivors = [str(f) for f in rows.columns[rows.all(axis=0).to_numpy()]]
    if not survivors:
        msg = f"No firm has a full record over [{window[0]}, {window[1]}]."
        logger.error(msg)
        raise EmptyUniverseError(msg)
    return survivors
