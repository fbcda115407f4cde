"""Test the walk-forward backtest driver."""

import numpy as np
import pandas as pd
import pytest

from tests.conftest import ar_variance_matrix, make_panel
from vol_forecaster.backtest.engine import (
    BacktestConfig,
    build_forecasters,
    run_backtest,
)
from vol_forecaster.backtest.forecasters import Forecaster, PanelView
from vol_forecaster.backtest.tuning import CVPolicy
from vol_forecaster.definitions import ForecastColumn, ModelName, PanelColumn
from vol_forecaster.errors import BacktestError, ConfigError, LeakageError

WINDOW_W = 70


class PeekingForecaster(Forecaster):
    """Asks for the full-day variance of the origin itself."""

    name = "peek"

    def forecast(self, view: PanelView) -> dict:
        """Request data past the cutoff."""
        view.fetch(PanelColumn.RV_DAY, view.window_start(), view.split.origin)
        return {}


def _member_config(**kwargs) -> BacktestConfig:
    return BacktestConfig(
        window_w=WINDOW_W,
        models=(ModelName.rolling_sd, ModelName.har, ModelName.avg),
        **kwargs,
    )


def test_backtest_forecasts_every_split(ar_panel) -> None:
    """Test the origin, target and firm coverage of a balanced run."""
    # Act
    result = run_backtest(ar_panel, _member_config())

    # Assert
    entries = result.entries
    dates = ar_panel.date_index
    assert len(result) == 3 * 48 * 5
    assert result.gap_counts() == {"avg": 0, "har": 0, "rolling_sd": 0}
    made_at = entries[ForecastColumn.MADE_AT_DATE].map(dates.get_loc)
    target = entries[ForecastColumn.TARGET_DATE].map(dates.get_loc)
    assert (target == made_at + 1).all()
    assert made_at.min() == WINDOW_W + 21
    assert target.max() == len(dates) - 1


def test_average_lies_between_members(ar_panel) -> None:
    """Test that the equal-weight forecast is the mean of its members."""
    # Act
    result = run_backtest(ar_panel, _member_config())

    # Assert
    har = result.wide(ModelName.har)
    rsd = result.wide(ModelName.rolling_sd)
    avg = result.wide(ModelName.avg)
    np.testing.assert_allclose(avg.to_numpy(), ((har + rsd) / 2).to_numpy(), rtol=1e-12)


def test_future_values_do_not_change_forecasts() -> None:
    """Test that editing data stamped after a cutoff leaves earlier forecasts alone."""
    # Arrange
    rv = ar_variance_matrix(130, 3)
    dates = rv.index
    k = 100
    rv_day_edit = rv.copy()
    rv_day_edit.iloc[k:] *= 10.0
    rv_355_edit = rv.copy()
    rv_355_edit.iloc[k + 1 :] *= 10.0
    config = BacktestConfig(
        window_w=WINDOW_W, models=(ModelName.rolling_sd, ModelName.har)
    )

    # Act
    base = run_backtest(make_panel(rv), config).entries
    edited = run_backtest(make_panel(rv_day_edit, rv_355=rv_355_edit), config).entries

    # Assert
    early = base[ForecastColumn.MADE_AT_DATE] <= dates[k]
    pd.testing.assert_frame_equal(
        base.loc[early].reset_index(drop=True),
        edited.loc[edited[ForecastColumn.MADE_AT_DATE] <= dates[k]].reset_index(
            drop=True
        ),
    )
    assert not base.loc[~early, ForecastColumn.FORECAST_VAR].equals(
        edited.loc[~early, ForecastColumn.FORECAST_VAR]
    )


def test_leakage_request_aborts_the_run(ar_panel) -> None:
    """Test that a model reading past its cutoff stops the backtest."""
    with pytest.raises(LeakageError):
        run_backtest(
            ar_panel,
            BacktestConfig(window_w=WINDOW_W, models=(ModelName.har,)),
            {"peek": PeekingForecaster()},
        )


def test_gap_firm_leaves_the_universe() -> None:
    """Test that a firm missing inside a window gets no forecast from that split."""
    # Arrange
    rv = ar_variance_matrix(140, 3)
    rv.iloc[120, 2] = np.nan
    dates = rv.index

    # Act
    entries = run_backtest(
        make_panel(rv), BacktestConfig(window_w=WINDOW_W, models=(ModelName.har,))
    ).entries

    # Assert
    f003 = entries.loc[
        entries[ForecastColumn.FIRM] == "F003", ForecastColumn.MADE_AT_DATE
    ]
    assert f003.max() < dates[120]
    assert len(entries.loc[entries[ForecastColumn.FIRM] == "F001"]) == 48


def test_failures_become_gaps() -> None:
    """Test that a factor model on too few firms records gaps with the error name."""
    # Act
    result = run_backtest(
        make_panel(ar_variance_matrix(140, 2)),
        BacktestConfig(window_w=WINDOW_W, models=(ModelName.har, ModelName.pca)),
    )

    # Assert
    gaps = result.gaps
    assert result.gap_counts() == {"har": 0, "pca": 48 * 2}
    assert set(gaps["reason"]) == {"InsufficientDataError"}


def test_backtest_without_forecasts_fails() -> None:
    """Test a panel on which every fit is singular."""
    rv = pd.DataFrame(
        4e-4, index=pd.bdate_range("2015-01-05", periods=120), columns=["F001", "F002"]
    )
    with pytest.raises(BacktestError):
        run_backtest(
            make_panel(rv), BacktestConfig(window_w=WINDOW_W, models=(ModelName.har,))
        )


def test_threaded_run_matches_serial(ar_panel) -> None:
    """Test that member models run in worker threads give the same forecasts."""
    serial = run_backtest(ar_panel, _member_config()).entries
    threaded = run_backtest(ar_panel, _member_config(n_jobs=3)).entries
    pd.testing.assert_frame_equal(serial, threaded)


def test_egalitarian_combination_fits_weights(ar_panel) -> None:
    """Test that the egalitarian combination produces forecasts and weights."""
    # Arrange
    config = BacktestConfig(
        window_w=WINDOW_W,
        models=(ModelName.har, ModelName.pca, ModelName.elasso),
        n_factors=2,
        cv=CVPolicy(folds=3, grid_size=5),
    )

    # Act
    result = run_backtest(ar_panel, config)

    # Assert
    assert (result.entries[ForecastColumn.MODEL] == ModelName.elasso).sum() > 0
    assert sorted(result.weights[ModelName.elasso]) == [ModelName.har, ModelName.pca]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"models": ("garch",)},
        {"models": ()},
        {"window_w": 60},
        {"window_overrides": {"har": 500}},
        {"n_jobs": 0},
    ],
)
def test_backtest_config_rejects_bad_values(kwargs: dict) -> None:
    """Test unknown models and out-of-range settings."""
    with pytest.raises(ConfigError):
        BacktestConfig(**kwargs)


def test_build_forecasters_follows_config_order() -> None:
    """Test the model registry."""
    config = BacktestConfig(
        models=(ModelName.pca_har, ModelName.lasso, ModelName.pelasso)
    )
    registry = build_forecasters(config)
    assert list(registry) == [ModelName.pca_har, ModelName.lasso, ModelName.pelasso]
    assert [f.name for f in registry.values()] == list(registry)
