"""Test the principal-component factor models."""

import numpy as np
import pandas as pd
import pytest

from tests.conftest import ar_variance_matrix
from vol_forecaster.errors import ConfigError, DataError, DegenerateError
from vol_forecaster.models.factor import extract_pca_factors, factor_model_forecast


def _rank_one_window(n_days: int = 90, n_firms: int = 5, seed: int = 0) -> pd.DataFrame:
    """Firm variances driven by one common path, without idiosyncratic noise."""
    rng = np.random.default_rng(seed)
    common = rng.uniform(-1.0, 1.0, n_days)
    loadings = 2e-5 * np.arange(1, n_firms + 1)
    values = 4e-4 + common[:, None] * loadings[None, :]
    dates = pd.bdate_range("2018-01-02", periods=n_days)
    return pd.DataFrame(
        values, index=dates, columns=[f"F{i:03d}" for i in range(1, n_firms + 1)]
    )


def test_extract_factors_of_full_rank() -> None:
    """Test the decomposition when every component is kept."""
    # Arrange
    window = ar_variance_matrix(120, 4)

    # Act
    model = extract_pca_factors(window, k=4)

    # Assert
    np.testing.assert_allclose(
        model.reconstruct_covariance(),
        np.cov(window.to_numpy().T),
        rtol=1e-9,
        atol=1e-20,
    )
    assert model.explained_share[-1] == pytest.approx(1.0)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    signs = model.eigenvectors[
        np.argmax(np.abs(model.eigenvectors), axis=0), np.arange(4)
    ]
    assert np.all(signs > 0)
    centered = window.to_numpy() - window.to_numpy().mean(axis=0)
    np.testing.assert_allclose(model.factors, centered @ model.eigenvectors)


def test_one_factor_explains_rank_one_window() -> None:
    """Test that a single component captures a one-factor cross-section."""
    model = extract_pca_factors(_rank_one_window(), k=1)
    assert model.explained_share[0] == pytest.approx(1.0, abs=1e-9)
    assert model.firms == ["F001", "F002", "F003", "F004", "F005"]


@pytest.mark.parametrize("k", [0, 6])
def test_extract_rejects_bad_k(k: int) -> None:
    """Test a component count outside the window size."""
    with pytest.raises(ConfigError):
        extract_pca_factors(ar_variance_matrix(30, 5), k=k)


def test_extract_rejects_gaps() -> None:
    """Test a window with a missing value."""
    window = ar_variance_matrix(30, 3)
    window.iloc[4, 1] = np.nan
    with pytest.raises(DataError):
        extract_pca_factors(window, k=1)


def test_extract_rejects_constant_window() -> None:
    """Test a window without any variation."""
    window = pd.DataFrame(
        4e-4, index=pd.bdate_range("2018-01-02", periods=10), columns=["F001", "F002"]
    )
    with pytest.raises(DegenerateError):
        extract_pca_factors(window, k=1)


def test_persistent_factor_forecast_repeats_last_fit() -> None:
    """Test that a random-walk factor forecast repeats the last day of the window."""
    # Arrange
    window = _rank_one_window()
    model = extract_pca_factors(window, k=1)
    target = window.index[-1] + pd.offsets.BDay(1)

    # Act
    fitted, forecasts = factor_model_forecast(
        model, window, target.date(), persistent_factors=True, forecast_residuals=False
    )

    # Assert
    np.testing.assert_allclose(
        forecasts.to_numpy(), window.iloc[-1].to_numpy(), rtol=1e-8
    )
    assert set(fitted.loadings_a) == set(window.columns)
    assert fitted.factor_forecast_coeffs == []


def test_zero_loadings_forecast_is_the_firm_mean() -> None:
    """Test the intercept-only firm regression."""
    window = _rank_one_window(n_days=80)
    model = extract_pca_factors(window, k=1)
    _, forecasts = factor_model_forecast(
        model,
        window,
        (window.index[-1] + pd.offsets.BDay(1)).date(),
        zero_loadings=True,
        forecast_residuals=False,
    )
    np.testing.assert_allclose(
        forecasts.to_numpy(), window.mean().to_numpy(), rtol=1e-12
    )


@pytest.mark.parametrize("nested_har", [False, True])
def test_factor_forecast_on_persistent_panel(nested_har: bool) -> None:
    """Test the full factor forecast, with and without the nested HAR terms."""
    # Arrange
    window = ar_variance_matrix(140, 5)
    model = extract_pca_factors(window, k=2)

    # Act
    fitted, forecasts = factor_model_forecast(
        model,
        window,
        (window.index[-1] + pd.offsets.BDay(1)).date(),
        nested_har=nested_har,
    )

    # Assert
    assert forecasts.notna().all()
    assert (forecasts > 0).all()
    assert len(fitted.factor_forecast_coeffs) == 2
    assert all(len(b) == 2 for b in fitted.loadings_B.values())
    assert set(fitted.residual_forecast_coeffs) == set(window.columns)


def test_short_response_becomes_a_missing_forecast() -> None:
    """Test that a firm without enough responses is left out."""
    # Arrange
    window = ar_variance_matrix(140, 5)
    response = window.copy()
    response.iloc[:100, 2] = np.nan
    model = extract_pca_factors(window, k=1)

    # Act
    _, forecasts = factor_model_forecast(
        model,
        window,
        (window.index[-1] + pd.offsets.BDay(1)).date(),
        target_rv=response,
    )

    # Assert
    assert np.isnan(forecasts["F003"])
    assert forecasts.drop("F003").notna().all()


def test_factor_forecast_rejects_past_target() -> None:
    """Test a target inside the window."""
    window = ar_variance_matrix(100, 3)
    model = extract_pca_factors(window, k=1)
    with pytest.raises(ConfigError):
        factor_model_forecast(model, window, window.index[-1].date())
