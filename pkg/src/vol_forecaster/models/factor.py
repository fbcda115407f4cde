"""Principal-component factor models of the cross-section of realized variance."""

from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import NDArray

from vol_forecaster.definitions import MIN_FIT_ROWS, N_FACTORS
from vol_forecaster.errors import (
    MODEL_FAILURES,
    ConfigError,
    DataError,
    DegenerateError,
    InsufficientDataError,
    SingularDesignError,
)
from vol_forecaster.math_utils import floor_variance, symmetrize_matrix
from vol_forecaster.models.regression import fit_ols
from vol_forecaster.models.har import har_design


@dataclass(frozen=True)
class FactorModel:
    """Eigen-decomposition of a variance window plus fitted factor dynamics.

    ``eigenvalues`` and ``eigenvectors`` hold the retained components only.
    The regression fields stay empty until ``factor_model_forecast`` fills them.
    """

    k: int
    eigenvalues: NDArray
    eigenvectors: NDArray
    mean: NDArray
    firms: list[str]
    dates: pd.DatetimeIndex
    factors: NDArray
    total_variance: float
    loadings_a: dict[str, float] = field(default_factory=dict)
    loadings_B: dict[str, NDArray] = field(default_factory=dict)
    factor_forecast_coeffs: list[tuple[float, float, float, float]] = field(
        default_factory=list
    )
    residual_forecast_coeffs: dict[str, tuple[float, float, float, float]] = field(
        default_factory=dict
    )

    @property
    def explained_share(self) -> NDArray:
        """Cumulative share of total variance explained by the retained components."""
        return np.cumsum(self.eigenvalues) / self.total_variance

    def reconstruct_covariance(self) -> NDArray:
        """Rebuild the covariance from the retained components."""
        q = self.eigenvectors
        return q @ np.diag(self.eigenvalues) @ q.T


def extract_pca_factors(rv_window: pd.DataFrame, k: int = N_FACTORS) -> FactorModel:
    """Eigen-decompose the covariance of a balanced dates by firms window.

    Eigenvectors are signed so their largest-magnitude entry is positive.
    Factors are projections of the demeaned window on the retained vectors.

    :param rv_window: Dates by firms matrix without gaps.
    :param k: Number of components to retain.
    :return: The decomposition.
    :raises ConfigError: If ``k`` is not in ``[1, min(firms, days)]``.
    :raises DataError: If the window holds non-finite values.
    :raises DegenerateError: If every column is constant.
    """
    values = rv_window.to_numpy(dtype=float)
    n_days, n_firms = values.shape
    if not 1 <= k <= min(n_firms, n_days):
        msg = (
            f"k={k} must lie in [1, {min(n_firms, n_days)}] for a {n_days}x{n_firms} "
            "window."
        )
        logger.error(msg)
        raise ConfigError(msg)
    if not np.all(np.isfinite(values)):
        msg = "PCA window must be balanced and finite."
        logger.error(msg)
        raise DataError(msg)

    mean = values.mean(axis=0)
    centered = values - mean
    covariance = symmetrize_matrix(
        np.atleast_2d(centered.T @ centered / max(n_days - 1, 1))
    )
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]
    flip = np.sign(
        eigenvectors[np.argmax(np.abs(eigenvectors), axis=0), np.arange(n_firms)]
    )
    eigenvectors = eigenvectors * np.where(flip == 0, 1.0, flip)

    total = float(np.trace(covariance))
    if total <= 0:
        msg = "PCA window has zero variance in every firm."
        logger.error(msg)
        raise DegenerateError(msg)

    retained = eigenvectors[:, :k]
    logger.debug(
        f"Extracted factors. days={n_days} firms={n_firms} k={k} "
        f"explained={eigenvalues[:k].sum() / total:.4f}"
    )
    return FactorModel(
        k=k,
        eigenvalues=eigenvalues[:k],
        eigenvectors=retained,
        mean=mean,
        firms=[str(c) for c in rv_window.columns],
        dates=pd.DatetimeIndex(rv_window.index),
        factors=centered @ retained,
        total_variance=total,
    )


def _lag_regression(
    series: NDArray, gap: int, min_rows: int
) -> tuple[tuple[float, float, float, float], NDArray]:
    """Regress ``series[s + gap]`` on the (d, w, m) averages at ``s``."""
    design = har_design(series)
    n_rows = series.size - gap
    rows = np.all(np.isfinite(design[:n_rows]), axis=1)
    if rows.sum() < max(min_rows, 4):
        msg = f"Lag regression needs {max(min_rows, 4)} rows, found {int(rows.sum())}."
        logger.error(msg)
        raise InsufficientDataError(msg)
    intercept, slopes = fit_ols(design[:n_rows][rows], series[gap:][rows])
    return (float(intercept), *(float(b) for b in slopes)), design[-1]


def _forecast_factors(model: FactorModel, min_rows: int) -> tuple[NDArray, list]:
    forecasts = np.empty(model.k)
    coeffs = []
    for j in range(model.k):
        phi, latest = _lag_regression(model.factors[:, j], 1, min_rows)
        coeffs.append(phi)
        forecasts[j] = phi[0] + np.dot(phi[1:], latest)
    return forecasts, coeffs


def _forecast_residual(
    residuals: NDArray, gap: int, min_rows: int
) -> tuple[float, tuple[float, float, float, float]]:
    try:
        phi, latest = _lag_regression(residuals, gap, min_rows)
    except (InsufficientDataError, SingularDesignError):
        phi = (float(np.mean(residuals)), 0.0, 0.0, 0.0)
        return phi[0], phi
    if not np.all(np.isfinite(latest)):
        return phi[0], phi
    return phi[0] + float(np.dot(phi[1:], latest)), phi


def factor_model_forecast(
    model: FactorModel,
    rv_window: pd.DataFrame,
    target: date,
    nested_har: bool = False,
    target_rv: pd.DataFrame | None = None,
    zero_loadings: bool = False,
    forecast_residuals: bool = True,
    persistent_factors: bool = False,
    oracle_factors: NDArray | None = None,
    min_rows: int = MIN_FIT_ROWS,
) -> tuple[FactorModel, pd.Series]:
    """Forecast every firm's variance at ``target`` from the factor model.

    Each firm's response is regressed on the contemporaneous factors, and in
    the nested form also on its own HAR regressors from the previous date.
    Factors are forecast from their own (d, w, m) averages, residuals from
    theirs, and the pieces are added up.

    :param model: Decomposition of ``rv_window``.
    :param rv_window: Dates by firms window the model was extracted from.
    :param target: Forecast date, after the last window date.
    :param nested_har: Add each firm's HAR regressors to its regression.
    :param target_rv: Response matrix, defaults to ``rv_window``. May end
        before the window does.
    :param zero_loadings: Drop the factors from the firm regressions.
    :param forecast_residuals: Add the residual forecast.
    :param persistent_factors: Use the last factor values as their forecast.
    :param oracle_factors: Realized factor values at ``target``.
    :param min_rows: Minimum rows of every regression.
    :return: The model with its regression fields filled, and per-firm
        floored forecasts with NaN where a firm could not be fitted.
    :raises ConfigError: If ``target`` is not after the window.
    :raises InsufficientDataError: If the factor history is too short.
    """
    dates = pd.DatetimeIndex(rv_window.index)
    if pd.Timestamp(target) <= dates[-1]:
        msg = f"Target {target} must be after the window end {dates[-1].date()}."
        logger.error(msg)
        raise ConfigError(msg)

    if oracle_factors is not None:
        factor_next = np.asarray(oracle_factors, dtype=float).ravel()
        factor_coeffs: list = []
    elif persistent_factors:
        factor_next = model.factors[-1].copy()
        factor_coeffs = []
    else:
        factor_next, factor_coeffs = _forecast_factors(model, min_rows)

    response = (rv_window if target_rv is None else target_rv).reindex(index=dates)
    forecasts = pd.Series(np.nan, index=model.firms, dtype=float)
    loadings_a: dict[str, float] = {}
    loadings_B: dict[str, NDArray] = {}
    residual_coeffs: dict[str, tuple[float, float, float, float]] = {}
    for i, firm in enumerate(model.firms):
        y = response[firm].to_numpy(dtype=float)
        blocks = [] if zero_loadings else [model.factors]
        latest = [] if zero_loadings else [factor_next]
        if nested_har:
            har = har_design(rv_window[firm].to_numpy(dtype=float))
            # regressors dated the day before each response
            blocks.append(np.vstack([np.full((1, 3), np.nan), har[:-1]]))
            latest.append(har[-1])
        design = np.hstack(blocks) if blocks else np.zeros((dates.size, 0))
        rows = np.isfinite(y) & np.all(np.isfinite(design), axis=1)
        try:
            if rows.sum() < max(min_rows, design.shape[1] + 1):
                msg = f"Factor regression for {firm} has {int(rows.sum())} rows."
                logger.error(msg)
                raise InsufficientDataError(msg)
            if design.shape[1] == 0:
                intercept, slopes = float(np.mean(y[rows])), np.zeros(0)
            else:
                intercept, slopes = fit_ols(design[rows], y[rows])
            point = intercept
            if latest:
                point += float(np.dot(slopes, np.concatenate(latest)))
            if forecast_residuals:
                residuals = y[rows] - intercept - design[rows] @ slopes
                # steps from the last observed response to the target
                gap = dates.size - int(np.flatnonzero(rows)[-1])
                shift, residual_coeffs[firm] = _forecast_residual(
                    residuals, gap, min_rows
                )
                point += shift
        except MODEL_FAILURES as err:
            logger.debug(
                f"Factor forecast failed. firm={firm} reason={type(err).__name__}"
            )
            continue
        loadings_a[firm] = intercept
        loadings_B[firm] = slopes[: 0 if zero_loadings else model.k]
        forecasts.iloc[i] = floor_variance(point)

    fitted = replace(
        model,
        loadings_a=loadings_a,
        loadings_B=loadings_B,
        factor_forecast_coeffs=factor_coeffs,
        residual_forecast_coeffs=residual_coeffs,
    )
    return fitted, forecasts
