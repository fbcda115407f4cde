"""Test the forecast losses, MZ regressions and moment summaries."""

import math

import numpy as np
import pytest

from vol_forecaster.definitions import LossKind
from vol_forecaster.errors import (
    ConfigError,
    DegenerateError,
    DomainError,
    InsufficientDataError,
)
from vol_forecaster.evaluation.losses import (
    forecast_loss,
    moment_summary,
    mz_regression,
)


@pytest.mark.parametrize(
    ("y", "yhat", "kind", "expected"),
    [
        (2.0, 1.0, LossKind.QLIKE, 2.0),
        (1.0, 2.0, LossKind.QLIKE, math.log(2.0) + 0.5),
        (3.0, 1.0, LossKind.MSE, 4.0),
        (3.0, 1.0, LossKind.RMSE_AGG, 4.0),
        (1.0, 3.5, LossKind.MAE, 2.5),
        (1.0, 3.5, "MAE", 2.5),
    ],
)
def test_forecast_loss(y: float, yhat: float, kind: LossKind, expected: float) -> None:
    """Test single-cell losses."""
    assert forecast_loss(y, yhat, kind) == pytest.approx(expected, rel=1e-15)


def test_qlike_is_minimized_by_the_truth() -> None:
    """Test that QLIKE over forecasts is smallest at the realized value."""
    grid = np.linspace(0.5, 4.0, 351)
    losses = forecast_loss(np.full(grid.size, 2.0), grid, LossKind.QLIKE)
    assert grid[np.argmin(losses)] == pytest.approx(2.0)


def test_forecast_loss_is_elementwise() -> None:
    """Test arrays of cells."""
    losses = forecast_loss(np.array([1.0, 2.0]), np.array([2.0, 2.0]), LossKind.MSE)
    np.testing.assert_allclose(losses, [1.0, 0.0])


@pytest.mark.parametrize(
    ("y", "yhat", "kind", "error"),
    [
        (-1.0, 1.0, LossKind.MSE, DomainError),
        (1.0, 0.0, LossKind.QLIKE, DomainError),
        (1.0, 1.0, "huber", ConfigError),
    ],
)
def test_forecast_loss_errors(
    y: float, yhat: float, kind: str, error: type[Exception]
) -> None:
    """Test negative realized values, non-positive QLIKE forecasts and unknown kinds."""
    with pytest.raises(error):
        forecast_loss(y, yhat, kind)


def test_mz_of_perfect_forecast() -> None:
    """Test a forecast equal to the realized value."""
    y = np.array([1e-4, 3e-4, 2e-4, 5e-4])
    result = mz_regression(y, y)
    assert result.alpha == pytest.approx(0.0, abs=1e-12)
    assert result.beta == pytest.approx(1.0)
    assert result.r2 == pytest.approx(1.0)
    assert result.n == 4


def test_mz_of_half_forecast() -> None:
    """Test a forecast that is half the realized value."""
    y = np.array([1.0, 3.0, 2.0, 5.0])
    result = mz_regression(y, y / 2)
    assert result.alpha == pytest.approx(0.0, abs=1e-12)
    assert result.beta == pytest.approx(2.0)
    assert result.r2 == pytest.approx(1.0)


def test_mz_errors() -> None:
    """Test too few cells and a constant forecast."""
    with pytest.raises(InsufficientDataError):
        mz_regression([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(DegenerateError):
        mz_regression([1.0, 2.0, 3.0], [2.0, 2.0, 2.0])


def test_moment_summary() -> None:
    """Test the four moments of a symmetric sample."""
    summary = moment_summary([1.0, 2.0, 3.0, 4.0])
    assert summary.mean == 2.5
    assert summary.sd == pytest.approx(math.sqrt(5.0 / 3.0))
    assert summary.skew == pytest.approx(0.0, abs=1e-12)
    assert summary.excess_kurtosis == pytest.approx(2.5625 / 1.5625 - 3.0)


@pytest.mark.parametrize(
    ("series", "skew", "excess_kurtosis"),
    [
        ([0.0, 0.0, 0.0, 1.0], 2.0 / math.sqrt(3.0), 7.0 / 3.0 - 3.0),
        ([-1.0, 1.0] * 3, 0.0, -2.0),
    ],
)
def test_moment_summary_uses_standardized_moments(
    series: list[float], skew: float, excess_kurtosis: float
) -> None:
    """Test skewness and excess kurtosis without small-sample correction."""
    summary = moment_summary(series)
    assert summary.skew == pytest.approx(skew, abs=1e-12)
    assert summary.excess_kurtosis == pytest.approx(excess_kurtosis, abs=1e-12)


def test_moment_summary_errors() -> None:
    """Test a short and a constant series."""
    with pytest.raises(InsufficientDataError):
        moment_summary([1.0, 2.0, 3.0])
    with pytest.raises(DegenerateError):
        moment_summary([1.0] * 5)
