"""Scoring forecasts against realized variance and aggregating over the panel."""

from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from vol_forecaster.data.panel import DailyPanel
from vol_forecaster.definitions import (
    ENCODING,
    ERROR_REPORT_COLUMNS,
    TRUTH_COLUMNS,
    VARIANCE_FLOOR,
    Aggregation,
    ForecastColumn,
    LossKind,
    PanelColumn,
)
from vol_forecaster.errors import (
    MODEL_FAILURES,
    ConfigError,
    DataError,
    InsufficientDataError,
)
from vol_forecaster.evaluation.losses import (
    forecast_loss,
    moment_summary,
    mz_regression,
)
from vol_forecaster.models.forecast_set import ForecastSet
from vol_forecaster.utils import write_frame

CELL_COLUMNS: tuple[str, ...] = (
    ForecastColumn.MODEL,
    ForecastColumn.FIRM,
    ForecastColumn.TARGET_DATE,
    "y",
    "yhat",
)
SUMMARY_COLUMNS: tuple[str, ...] = (
    "variable",
    "aggregation",
    "mean",
    "sd",
    "skew",
    "excess_kurtosis",
)


@dataclass(frozen=True)
class ScoredCell:
    """A realized variance and its forecast."""

    model: str
    firm_id: str
    target_date: pd.Timestamp
    y: float
    yhat: float

    def __post_init__(self) -> None:
        """Check the value ranges."""
        if self.y < 0 or self.yhat < VARIANCE_FLOOR:
            msg = (
                f"Invalid cell y={self.y} yhat={self.yhat} for "
                f"{self.model}/{self.firm_id}."
            )
            logger.error(msg)
            raise DataError(msg)


def cells_frame(cells: Iterable[ScoredCell]) -> pd.DataFrame:
    """Frame of scored cells in the layout ``build_scored_cells`` returns."""
    return pd.DataFrame([vars(c) for c in cells], columns=list(CELL_COLUMNS))


def realized_from_panel(panel: DailyPanel) -> pd.Series:
    """Daily realized variance keyed by (firm_id, date)."""
    frame = panel.frame
    return frame.set_index([PanelColumn.FIRM, PanelColumn.DATE])[PanelColumn.RV_DAY]


def realized_from_truth(truth: pd.DataFrame) -> pd.Series:
    """True integrated variance keyed by (firm_id, date)."""
    firm, day, value = TRUTH_COLUMNS
    frame = truth.assign(**{day: pd.to_datetime(truth[day])})
    return frame.set_index([firm, day])[value]


def build_scored_cells(forecasts: ForecastSet, realized: pd.Series) -> pd.DataFrame:
    """Match every forecast with the realized value of its target.

    Forecasts without a realized value are dropped.

    :param forecasts: The forecasts.
    :param realized: Realized variance keyed by (firm_id, date).
    :return: One row per cell with the cell columns.
    """
    entries = forecasts.entries
    keys = pd.MultiIndex.from_arrays(
        [entries[ForecastColumn.FIRM], entries[ForecastColumn.TARGET_DATE]]
    )
    y = realized.reindex(keys).to_numpy(dtype=float)
    cells = pd.DataFrame(
        {
            ForecastColumn.MODEL: entries[ForecastColumn.MODEL].to_numpy(),
            ForecastColumn.FIRM: entries[ForecastColumn.FIRM].to_numpy(),
            ForecastColumn.TARGET_DATE: entries[ForecastColumn.TARGET_DATE].to_numpy(),
            "y": y,
            "yhat": entries[ForecastColumn.FORECAST_VAR].to_numpy(dtype=float),
        }
    )
    missing = int(np.isnan(y).sum())
    if missing:
        logger.warning(f"Forecasts without realized value dropped. cells={missing}")
    return cells.loc[~np.isnan(y)].reset_index(drop=True)


def _mean_losses(cells: pd.DataFrame) -> pd.Series:
    y, yhat = cells["y"].to_numpy(), cells["yhat"].to_numpy()
    return pd.Series(
        {
            "rmse": float(np.sqrt(np.mean(forecast_loss(y, yhat, LossKind.RMSE_AGG)))),
            "mae": float(np.mean(forecast_loss(y, yhat, LossKind.MAE))),
            "qlike": float(np.mean(forecast_loss(y, yhat, LossKind.QLIKE))),
        }
    )


def _mz_or_none(cells: pd.DataFrame) -> pd.Series | None:
    try:
        result = mz_regression(cells["y"].to_numpy(), cells["yhat"].to_numpy())
    except MODEL_FAILURES:
        return None
    return pd.Series(
        {"mz_r2": result.r2, "mz_alpha": result.alpha, "mz_beta": result.beta}
    )


def aggregate_panel_errors(
    cells: pd.DataFrame, scheme: Aggregation | str
) -> tuple[dict[str, float], int]:
    """Error statistics of one model's cells under one aggregation scheme.

    ``average_firm`` averages per-firm statistics, ``average_cross_section``
    averages per-date statistics and ``pooled`` computes each statistic once
    over all cells. RMSE is taken per group before averaging.
    Groups with fewer than three cells, or a constant forecast, are skipped
    for the MZ regression.

    :param cells: Scored cells of a single model.
    :param scheme: Aggregation scheme.
    :return: The statistics and the number of groups skipped for MZ.
    :raises ConfigError: If the scheme is unknown.
    :raises InsufficientDataError: If there are no cells.
    """
    try:
        scheme = Aggregation(scheme)
    except ValueError as err:
        msg = (
            f"Unknown aggregation '{scheme}', expected one of "
            f"{[a.value for a in Aggregation]}."
        )
        logger.error(msg)
        raise ConfigError(msg) from err
    if cells.empty:
        msg = "No scored cells to aggregate."
        logger.error(msg)
        raise InsufficientDataError(msg)

    if scheme == Aggregation.POOLED:
        losses = _mean_losses(cells)
        mz = _mz_or_none(cells)
        skipped = int(mz is None)
    else:
        key = (
            ForecastColumn.FIRM
            if scheme == Aggregation.AVERAGE_FIRM
            else ForecastColumn.TARGET_DATE
        )
        groups = [group for _, group in cells.groupby(key, sort=True)]
        losses = pd.DataFrame([_mean_losses(g) for g in groups]).mean()
        fitted = [_mz_or_none(g) for g in groups]
        kept = [m for m in fitted if m is not None]
        skipped = len(fitted) - len(kept)
        mz = pd.DataFrame(kept).mean() if kept else None

    stats = {
        "rmse": float(losses["rmse"]),
        "mae": float(losses["mae"]),
        "qlike": float(losses["qlike"]),
    }
    for name in ("mz_r2", "mz_alpha", "mz_beta"):
        stats[name] = float(mz[name]) if mz is not None else float("nan")
    return stats, skipped


@dataclass
class ErrorReport:
    """Error statistics per (model, aggregation) and the skipped MZ groups."""

    rows: pd.DataFrame
    skipped: dict[tuple[str, str], int] = field(default_factory=dict)

    def to_csv(self, path: Path) -> Path:
        """Write the table followed by a ``#`` footer of skipped MZ groups.

        :param path: Destination file.
        :return: The destination path.
        """
        write_frame(self.rows.loc[:, list(ERROR_REPORT_COLUMNS)], path)
        footer = [
            f"# mz_skipped_groups model={model} aggregation={scheme} count={count}"
            for (model, scheme), count in self.skipped.items()
        ]
        if footer:
            with path.open("a", encoding=ENCODING) as handle:
                handle.write("\n".join(footer) + "\n")
        return path


def build_error_report(
    cells: pd.DataFrame, schemes: Iterable[Aggregation | str] = tuple(Aggregation)
) -> ErrorReport:
    """Aggregate every model's cells under each scheme.

    :param cells: Scored cells of any number of models.
    :param schemes: Aggregation schemes to report.
    :return: The report, rows ordered by model then scheme.
    """
    rows, skipped = [], {}
    schemes = [Aggregation(s) for s in schemes]
    for model, group in cells.groupby(ForecastColumn.MODEL, sort=True):
        for scheme in schemes:
            stats, n_skipped = aggregate_panel_errors(group, scheme)
            rows.append({"model": model, "aggregation": scheme.value} | stats)
            skipped[(str(model), scheme.value)] = n_skipped
            logger.info(
                f"Scored model. model={model} aggregation={scheme.value} "
                f"rmse={stats['rmse']:.4e} qlike={stats['qlike']:.4f} "
                f"mz_r2={stats['mz_r2']:.4f}"
            )
    return ErrorReport(pd.DataFrame(rows, columns=list(ERROR_REPORT_COLUMNS)), skipped)


def _summary_rows(variable: str, wide: pd.DataFrame) -> list[dict]:
    rows = []
    for scheme, axis_frame in (
        (Aggregation.AVERAGE_FIRM, wide),
        (Aggregation.AVERAGE_CROSS_SECTION, wide.T),
    ):
        summaries = []
        for _, series in axis_frame.items():
            try:
                summaries.append(moment_summary(series.dropna().to_numpy()))
            except MODEL_FAILURES:
                continue
        if not summaries:
            continue
        table = pd.DataFrame([vars(s) for s in summaries]).mean()
        row = {"variable": variable, "aggregation": scheme.value}
        rows.append(row | table.to_dict())
    return rows


def panel_summary(panel: DailyPanel) -> pd.DataFrame:
    """Moments of daily returns and realized variances, averaged by firm and by date.

    Series with fewer than four observations or no variation are left out.

    :param panel: The panel.
    :return: One row per (variable, aggregation).
    """
    rows = []
    for variable in (PanelColumn.RET_FULL_DAY, PanelColumn.RV_DAY):
        rows.extend(_summary_rows(variable, panel.wide(variable)))
    return pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))
