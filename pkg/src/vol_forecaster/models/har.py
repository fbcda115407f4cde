"""Heterogeneous autoregressive forecasts and the rolling-SD benchmark."""

from collections.abc import Sequence
from dataclasses import dataclass
from datetime import date

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import NDArray

from vol_forecaster.definitions import HORIZON_DAYS, MIN_FIT_ROWS
from vol_forecaster.errors import ConfigError, DataError, InsufficientDataError
from vol_forecaster.math_utils import floor_variance, trailing_mean
from vol_forecaster.models.regression import fit_ols


@dataclass(frozen=True)
class HARCoefficients:
    """Intercept and daily, weekly and monthly slopes of a HAR fit."""

    c: float
    beta_d: float
    beta_w: float
    beta_m: float

    def __post_init__(self) -> None:
        """Reject non-finite coefficients."""
        if not np.all(np.isfinite([self.c, self.beta_d, self.beta_w, self.beta_m])):
            msg = f"HAR coefficients must be finite, got {self}."
            logger.error(msg)
            raise DataError(msg)

    def predict(self, rv_d: float, rv_w: float, rv_m: float) -> float:
        """Evaluate the HAR equation, without flooring.

        :param rv_d: Latest daily average.
        :param rv_w: Latest weekly average.
        :param rv_m: Latest monthly average.
        :return: ``c + beta_d rv_d + beta_w rv_w + beta_m rv_m``.
        """
        return self.c + self.beta_d * rv_d + self.beta_w * rv_w + self.beta_m * rv_m


def har_design(values: Sequence[float] | NDArray) -> NDArray:
    """Trailing daily, weekly and monthly averages of a series.

    :param values: Series ordered in time.
    :return: ``n x 3`` matrix, NaN in rows without a full monthly window.
    """
    values = np.asarray(values, dtype=float)
    return np.column_stack(
        [trailing_mean(values, HORIZON_DAYS[h]) for h in ("d", "w", "m")]
    )


def _origin_position(index: pd.DatetimeIndex, target: pd.Timestamp) -> int:
    position = int(index.searchsorted(target, side="left")) - 1
    if position < 0:
        msg = f"No predictor date before target {target.date()}."
        logger.error(msg)
        raise InsufficientDataError(msg)
    return position


def har_forecast(
    trailing_rv: pd.Series,
    fit_window: tuple[date, date],
    target: date,
    predictor_rv: pd.Series | None = None,
    min_rows: int = MIN_FIT_ROWS,
) -> tuple[HARCoefficients, float]:
    """Fit the HAR regression and forecast the variance at ``target``.

    Training rows pair the regressors at one predictor date with the
    response on the next predictor date, keeping responses dated inside
    ``fit_window``. The forecast uses the regressors at the last predictor
    date before ``target``.

    :param trailing_rv: Response variances indexed by ascending date.
    :param fit_window: First and last response date used for fitting.
    :param target: Forecast target date.
    :param predictor_rv: Variances the regressors are built from, defaults to
        ``trailing_rv``. May run later than ``trailing_rv``.
    :param min_rows: Minimum number of usable training rows.
    :return: The coefficients and the floored forecast.
    :raises InsufficientDataError: If fewer than ``min_rows`` rows are usable.
    :raises SingularDesignError: If the regressors are collinear.
    """
    predictors = (trailing_rv if predictor_rv is None else predictor_rv).sort_index()
    index = pd.DatetimeIndex(predictors.index)
    design = har_design(predictors.to_numpy())

    start, end = pd.Timestamp(fit_window[0]), pd.Timestamp(fit_window[1])
    response = trailing_rv.reindex(index[1:]).to_numpy(dtype=float)
    in_window = (index[1:] >= start) & (index[1:] <= end)
    rows = in_window & np.isfinite(response) & np.all(np.isfinite(design[:-1]), axis=1)
    if rows.sum() < max(min_rows, 4):
        msg = (
            f"HAR needs {max(min_rows, 4)} training rows in "
            f"[{start.date()}, {end.date()}], found {int(rows.sum())}."
        )
        logger.error(msg)
        raise InsufficientDataError(msg)

    intercept, slopes = fit_ols(design[:-1][rows], response[rows])
    coefficients = HARCoefficients(float(intercept), *(float(b) for b in slopes))

    origin = _origin_position(index, pd.Timestamp(target))
    regressors = design[origin]
    if not np.all(np.isfinite(regressors)):
        msg = f"Missing HAR regressors at {index[origin].date()}."
        logger.error(msg)
        raise InsufficientDataError(msg)
    return coefficients, floor_variance(coefficients.predict(*regressors))


def rolling_sd_squared_forecast(
    trailing_full_day_returns: Sequence[float] | NDArray, window: int
) -> float:
    """Mean of squared returns over the last ``window`` days.

    Returns are not demeaned.

    :param trailing_full_day_returns: Full-day returns in time order.
    :param window: Number of trailing returns.
    :return: The floored variance forecast.
    :raises ConfigError: If the window is not positive.
    :raises InsufficientDataError: If fewer than ``window`` returns are given.
    """
    if window <= 0:
        msg = f"Rolling-SD window must be positive, got {window}."
        logger.error(msg)
        raise ConfigError(msg)

    returns = np.asarray(trailing_full_day_returns, dtype=float)
    if returns.size < window:
        msg = f"Rolling-SD needs {window} returns, got {returns.size}."
        logger.error(msg)
        raise InsufficientDataError(msg)
    tail = returns[-window:]
    return floor_variance(float(np.mean(tail * tail)))
