"""Code to help initialize pytest."""

import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add the src directory to the path so that the vol_forecaster package can be imported
my_path = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(my_path, "../src"))

from vol_forecaster.data.panel import DailyPanel  # noqa: E402
from vol_forecaster.data.simulator import (  # noqa: E402
    SimConfig,
    SimulationResult,
    simulate_panel,
)
from vol_forecaster.definitions import PANEL_COLUMNS, PanelColumn  # noqa: E402


def make_panel(
    rv: pd.DataFrame,
    ret: pd.DataFrame | None = None,
    rv_355: pd.DataFrame | None = None,
    ret_355: pd.DataFrame | None = None,
) -> DailyPanel:
    """Build a panel from dates by firms matrices, NaN marking absent firm-dates.

    :param rv: Full-day realized variances.
    :param ret: Full-day returns, zero by default.
    :param rv_355: 15:55 realized variances, ``rv`` by default.
    :param ret_355: 15:55 returns, zero by default.
    :return: The panel.
    """
    ret = rv * 0.0 if ret is None else ret
    rv_355 = rv if rv_355 is None else rv_355
    ret_355 = rv * 0.0 if ret_355 is None else ret_355
    long = pd.concat(
        {
            PanelColumn.RV_DAY: rv.stack(),
            PanelColumn.RET_FULL_DAY: ret.stack(),
            PanelColumn.RV_355: rv_355.stack(),
            PanelColumn.RET_355: ret_355.stack(),
        },
        axis=1,
    ).dropna()
    long.index.names = [PanelColumn.DATE, PanelColumn.FIRM]
    return DailyPanel(long.reset_index().loc[:, list(PANEL_COLUMNS)])


def ar_variance_matrix(n_days: int, n_firms: int, seed: int = 0) -> pd.DataFrame:
    """Positive, persistent variance paths on a business-day calendar.

    :param n_days: Number of dates.
    :param n_firms: Number of firms.
    :param seed: Random seed.
    :return: Dates by firms matrix.
    """
    rng = np.random.default_rng(seed)
    log_var = np.empty((n_days, n_firms))
    log_var[0] = rng.normal(0.0, 0.3, n_firms)
    common = 0.0
    for t in range(1, n_days):
        common = 0.9 * common + 0.2 * rng.standard_normal()
        log_var[t] = 0.8 * log_var[t - 1] + common + 0.2 * rng.standard_normal(n_firms)
    dates = pd.bdate_range("2015-01-05", periods=n_days)
    firms = [f"F{i:03d}" for i in range(1, n_firms + 1)]
    return pd.DataFrame(4e-4 * np.exp(log_var), index=dates, columns=firms)


@pytest.fixture(scope="session")
def small_simulation() -> SimulationResult:
    """A small simulated panel with prints and option quotes."""
    return simulate_panel(SimConfig(n_firms=6, n_days=80, seed=11))


@pytest.fixture
def ar_panel() -> DailyPanel:
    """Balanced 5-firm panel of 140 persistent variance days."""
    return make_panel(ar_variance_matrix(140, 5))
