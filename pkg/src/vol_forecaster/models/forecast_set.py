"""Collected out-of-sample forecasts and their gaps."""

from collections.abc import Mapping
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from vol_forecaster.data.io import read_validated_csv, write_dated_csv
from vol_forecaster.definitions import (
    FORECAST_COLUMNS,
    VARIANCE_FLOOR,
    ForecastColumn,
)
from vol_forecaster.errors import DataError, LeakageError
from vol_forecaster.utils import write_frame

ENTRY_KEY: tuple[str, ...] = (
    ForecastColumn.MODEL,
    ForecastColumn.FIRM,
    ForecastColumn.TARGET_DATE,
)
GAP_COLUMNS: tuple[str, ...] = (*ENTRY_KEY, "reason")
WEIGHT_COLUMNS: tuple[str, ...] = ("model", "weight")


class ForecastSet:
    """Forecasts keyed by (model, firm_id, target_date).

    Every entry was made at 15:55 on ``made_at_date``.
    """

    def __init__(
        self,
        entries: pd.DataFrame,
        gaps: pd.DataFrame | None = None,
        weights: Mapping[str, Mapping[str, float]] | None = None,
    ) -> None:
        """Initialize and validate the set.

        :param entries: Frame with the forecast CSV columns.
        :param gaps: Frame with ``model``, ``firm_id``, ``target_date`` and ``reason``.
        :param weights: Last member weights of each fitted combination.
        :raises DataError: If a forecast is below the floor or a key repeats.
        :raises LeakageError: If a forecast is not made before its target.
        """
        data = entries.loc[:, list(FORECAST_COLUMNS)].copy()
        for col in (ForecastColumn.TARGET_DATE, ForecastColumn.MADE_AT_DATE):
            data[col] = pd.to_datetime(data[col])
        forecast_var = data[ForecastColumn.FORECAST_VAR].astype(float)
        data[ForecastColumn.FORECAST_VAR] = forecast_var

        if (forecast_var < VARIANCE_FLOOR).any():
            msg = f"Forecasts must be at least {VARIANCE_FLOOR}."
            logger.error(msg)
            raise DataError(msg)
        made_at = data[ForecastColumn.MADE_AT_DATE]
        if (made_at >= data[ForecastColumn.TARGET_DATE]).any():
            msg = "Every forecast must be made strictly before its target date."
            logger.error(msg)
            raise LeakageError(msg)
        if data.duplicated(list(ENTRY_KEY)).any():
            msg = "Duplicate (model, firm_id, target_date) forecast."
            logger.error(msg)
            raise DataError(msg)

        self._entries = data.sort_values(list(ENTRY_KEY)).reset_index(drop=True)
        if gaps is None:
            gaps = pd.DataFrame(columns=list(GAP_COLUMNS))
        gaps = gaps.loc[:, list(GAP_COLUMNS)].copy()
        gaps[ForecastColumn.TARGET_DATE] = pd.to_datetime(
            gaps[ForecastColumn.TARGET_DATE]
        )
        self._gaps = gaps.sort_values(list(ENTRY_KEY)).reset_index(drop=True)
        self.weights = {name: dict(w) for name, w in (weights or {}).items()}

    def __len__(self) -> int:
        """Number of forecasts."""
        return len(self._entries)

    @property
    def entries(self) -> pd.DataFrame:
        """Copy of the forecast entries."""
        return self._entries.copy()

    @property
    def gaps(self) -> pd.DataFrame:
        """Copy of the recorded gaps."""
        return self._gaps.copy()

    @property
    def models(self) -> list[str]:
        """Models with at least one forecast or gap, sorted."""
        names = set(self._entries[ForecastColumn.MODEL])
        return sorted(names | set(self._gaps[ForecastColumn.MODEL]))

    def gap_counts(self) -> dict[str, int]:
        """Number of gaps per model, zero for models without gaps."""
        counts = self._gaps.groupby(ForecastColumn.MODEL).size()
        return {m: int(counts.get(m, 0)) for m in self.models}

    def wide(self, model: str) -> pd.DataFrame:
        """Target dates by firms matrix of one model's forecasts.

        :param model: Model name.
        :return: The matrix, NaN where no forecast exists.
        """
        subset = self._entries.loc[self._entries[ForecastColumn.MODEL] == model]
        return subset.pivot(
            index=ForecastColumn.TARGET_DATE,
            columns=ForecastColumn.FIRM,
            values=ForecastColumn.FORECAST_VAR,
        )

    def forecast(self, model: str, firm_id: str, target_date: pd.Timestamp) -> float:
        """Look up one forecast, NaN when absent."""
        mask = (
            (self._entries[ForecastColumn.MODEL] == model)
            & (self._entries[ForecastColumn.FIRM] == firm_id)
            & (self._entries[ForecastColumn.TARGET_DATE] == pd.Timestamp(target_date))
        )
        values = self._entries.loc[mask, ForecastColumn.FORECAST_VAR].to_numpy()
        return float(values[0]) if values.size else np.nan

    def to_csv(self, path: Path) -> Path:
        """Write the forecast CSV.

        :param path: Destination file.
        :return: The destination path.
        """
        return write_dated_csv(
            self._entries,
            path,
            (ForecastColumn.TARGET_DATE, ForecastColumn.MADE_AT_DATE),
        )

    def gaps_to_csv(self, path: Path) -> Path:
        """Write the gap list.

        :param path: Destination file.
        :return: The destination path.
        """
        return write_dated_csv(self._gaps, path, (ForecastColumn.TARGET_DATE,))

    @classmethod
    def from_csv(cls, path: Path) -> "ForecastSet":
        """Load a forecast CSV written by ``to_csv``.

        :param path: Forecast CSV.
        :return: The set, without gaps.
        :raises FormatError: On schema, key or order violations.
        """
        frame = read_validated_csv(
            path,
            FORECAST_COLUMNS,
            key=ENTRY_KEY,
            date_columns=(ForecastColumn.TARGET_DATE, ForecastColumn.MADE_AT_DATE),
            numeric_columns=(ForecastColumn.FORECAST_VAR,),
        )
        logger.info(f"Loaded forecasts. path={path} rows={len(frame)}")
        return cls(frame)


def write_weights_csv(weights: Mapping[str, float], path: Path) -> Path:
    """Write one combination's member weights as ``model,weight`` rows.

    :param weights: Weight per member model.
    :param path: Destination file.
    :return: The destination path.
    """
    frame = pd.DataFrame(list(weights.items()), columns=list(WEIGHT_COLUMNS))
    return write_frame(frame, path)
