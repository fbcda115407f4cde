"""Per-cell forecast losses, Mincer-Zarnowitz regressions and moment summaries."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import statsmodels.api as sm
from loguru import logger
from numpy.typing import NDArray
from scipy import stats

from vol_forecaster.definitions import LossKind
from vol_forecaster.errors import (
    ConfigError,
    DegenerateError,
    DomainError,
    InsufficientDataError,
)

MIN_MZ_CELLS = 3
MIN_MOMENT_OBS = 4


def forecast_loss(
    y: float | NDArray, yhat: float | NDArray, kind: LossKind | str
) -> float | NDArray:
    """Loss of a forecast against a realized variance.

    ``RMSE_agg`` returns the squared error; the square root is taken after
    aggregation.

    :param y: Realized variance, non-negative.
    :param yhat: Forecast variance.
    :param kind: Loss kind.
    :return: The loss, scalar or elementwise.
    :raises ConfigError: If ``kind`` is unknown.
    :raises DomainError: If ``y`` is negative, or ``yhat`` is not positive for QLIKE.
    """
    try:
        kind = LossKind(kind)
    except ValueError as err:
        msg = f"Unknown loss kind '{kind}'."
        logger.error(msg)
        raise ConfigError(msg) from err

    y_arr = np.asarray(y, dtype=float)
    yhat_arr = np.asarray(yhat, dtype=float)
    if np.any(y_arr < 0):
        msg = "Realized variance must be non-negative."
        logger.error(msg)
        raise DomainError(msg)

    if kind in (LossKind.MSE, LossKind.RMSE_AGG):
        loss = (y_arr - yhat_arr) ** 2
    elif kind == LossKind.MAE:
        loss = np.abs(y_arr - yhat_arr)
    else:
        if np.any(yhat_arr <= 0):
            msg = "QLIKE needs strictly positive forecasts."
            logger.error(msg)
            raise DomainError(msg)
        loss = np.log(yhat_arr) + y_arr / yhat_arr
    return float(loss) if loss.ndim == 0 else loss


@dataclass(frozen=True)
class MZResult:
    """Mincer-Zarnowitz regression of realized values on forecasts."""

    alpha: float
    beta: float
    r2: float
    n: int


def mz_regression(
    y: Sequence[float] | NDArray, yhat: Sequence[float] | NDArray
) -> MZResult:
    """Regress realized values on forecasts with an intercept.

    :param y: Realized values.
    :param yhat: Forecasts aligned with ``y``.
    :return: Intercept, slope and R-squared.
    :raises InsufficientDataError: If fewer than three cells are given.
    :raises DegenerateError: If the forecasts are constant.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.size < MIN_MZ_CELLS:
        msg = f"MZ regression needs {MIN_MZ_CELLS} cells, got {y.size}."
        logger.error(msg)
        raise InsufficientDataError(msg)
    if np.ptp(yhat) == 0:
        msg = "MZ regression on a constant forecast."
        logger.error(msg)
        raise DegenerateError(msg)

    result = sm.OLS(y, sm.add_constant(yhat, has_constant="add")).fit()
    alpha, beta = (float(v) for v in result.params)
    return MZResult(alpha=alpha, beta=beta, r2=float(result.rsquared), n=int(y.size))


@dataclass(frozen=True)
class MomentSummary:
    """First four sample moments of a series."""

    mean: float
    sd: float
    skew: float
    excess_kurtosis: float


def moment_summary(series: Sequence[float] | NDArray) -> MomentSummary:
    """Sample mean, standard deviation, skewness and excess kurtosis.

    Skewness and kurtosis are the standardized third and fourth central
    moments, the latter less 3.

    :param series: Observations.
    :return: The summary.
    :raises InsufficientDataError: If fewer than four observations are given.
    :raises DegenerateError: If the series is constant.
    """
    values = np.asarray(series, dtype=float)
    if values.size < MIN_MOMENT_OBS:
        msg = f"Moment summary needs {MIN_MOMENT_OBS} observations, got {values.size}."
        logger.error(msg)
        raise InsufficientDataError(msg)
    if np.ptp(values) == 0:
        msg = "Moment summary of a constant series."
        logger.error(msg)
        raise DegenerateError(msg)
    return MomentSummary(
        mean=float(np.mean(values)),
        sd=float(np.std(values, ddof=1)),
        skew=float(stats.skew(values, bias=True)),
        excess_kurtosis=float(stats.kurtosis(values, fisher=True, bias=True)),
    )
