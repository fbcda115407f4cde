"""Synthetic firm panel with factor stochastic volatility and option chains."""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import NDArray
from scipy.stats import norm

from vol_forecaster.data.panel import DailyPanel, n_intervals
from vol_forecaster.definitions import (
    CUTOFF_SEC,
    DEFAULT_DELTA_MINUTES,
    PANEL_COLUMNS,
    SESSION_CLOSE_SEC,
    SESSION_OPEN_SEC,
    TRADING_DAYS_PER_YEAR,
    PanelColumn,
    PrintColumn,
    QuoteColumn,
)
from vol_forecaster.errors import ConfigError

EXPIRY_CYCLE_DAYS = 21
EXPIRY_OFFSET_DAYS = 15
CALENDAR_PADDING_DAYS = 3 * EXPIRY_CYCLE_DAYS
SPIKE_FACTOR = 1.5


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the synthetic panel."""

    n_firms: int = 20
    n_days: int = 600
    seed: int = 0
    k_common_factors: int = 1
    vol_of_vol: float = 0.1
    leverage_rho: float = -0.5
    mean_daily_var: float = 4e-4
    persistence: float = 0.97
    steps_per_day: int = 78
    overnight_var_share: float = 0.1
    unbalanced_fraction: float = 0.0
    emit_prints: bool = True
    emit_options: bool = True
    bad_print_rate: float = 0.0
    iv_bias: float = 0.1
    iv_noise: float = 0.15
    n_strikes: int = 5
    strike_spacing: float = 0.05
    option_spread: float = 0.02
    risk_free_rate: float = 0.0
    start_date: str = "2010-01-04"

    def __post_init__(self) -> None:
        """Validate the configuration.

        :raises ConfigError: If any field is out of range.
        """
        session_sec = SESSION_CLOSE_SEC - SESSION_OPEN_SEC
        bar_count = n_intervals(DEFAULT_DELTA_MINUTES)
        checks = {
            "n_firms must be positive": self.n_firms > 0,
            "n_days must be positive": self.n_days > 0,
            "seed must be a non-negative 64-bit integer": 0 <= self.seed < 2**64,
            "k_common_factors must be in [0, 10]": 0 <= self.k_common_factors <= 10,
            "vol_of_vol must be non-negative": self.vol_of_vol >= 0,
            "leverage_rho must be in [-1, 0]": -1 <= self.leverage_rho <= 0,
            "mean_daily_var must be positive": self.mean_daily_var > 0,
            "persistence must be in [0, 1)": 0 <= self.persistence < 1,
            "steps_per_day must be a multiple of 78 dividing the session": (
                self.steps_per_day > 0
                and self.steps_per_day % bar_count == 0
                and session_sec % self.steps_per_day == 0
            ),
            "overnight_var_share must be non-negative": self.overnight_var_share >= 0,
            "unbalanced_fraction must be in [0, 1]": 0 <= self.unbalanced_fraction <= 1,
            "bad_print_rate must be in [0, 1)": 0 <= self.bad_print_rate < 1,
            "iv_noise must be non-negative": self.iv_noise >= 0,
            "n_strikes must be positive": self.n_strikes > 0,
            "strike_spacing must be positive": self.strike_spacing > 0,
            "option_spread must be in [0, 1)": 0 <= self.option_spread < 1,
        }
        for msg, ok in checks.items():
            if not ok:
                logger.error(msg)
                raise ConfigError(msg)


@dataclass
class SimulationResult:
    """Everything one simulation emits."""

    panel: DailyPanel
    truth: pd.DataFrame
    prints: pd.DataFrame | None
    ranges: pd.DataFrame | None
    quotes: pd.DataFrame | None


def simulate_log_price_paths(
    rng: np.random.Generator, daily_var: NDArray, steps: int, start: NDArray
) -> tuple[NDArray, NDArray]:
    """Constant-variance intraday log-price paths, one per row.

    :param rng: Random generator.
    :param daily_var: Integrated variance of each path over the session.
    :param steps: Number of equal time steps.
    :param start: Opening log price of each path.
    :return: Log prices with ``steps + 1`` columns and the standardized
        session return shock of each path.
    """
    daily_var = np.asarray(daily_var, dtype=float)
    eps = rng.standard_normal((daily_var.size, steps))
    increments = np.sqrt(daily_var / steps)[:, None] * eps
    paths = np.empty((daily_var.size, steps + 1))
    paths[:, 0] = start
    paths[:, 1:] = start[:, None] + np.cumsum(increments, axis=1)
    return paths, eps.sum(axis=1) / np.sqrt(steps)


def black_scholes(
    spot: NDArray,
    strike: NDArray,
    tau: NDArray,
    vol: NDArray,
    rate: float,
    is_call: NDArray,
) -> tuple[NDArray, NDArray]:
    """European option prices and deltas.

    :param spot: Underlying prices.
    :param strike: Strikes.
    :param tau: Time to expiry in years.
    :param vol: Annualized volatilities.
    :param rate: Annual continuously compounded rate.
    :param is_call: True for calls.
    :return: Prices and deltas.
    """
    sq = vol * np.sqrt(tau)
    d1 = (np.log(spot / strike) + (rate + 0.5 * vol**2) * tau) / sq
    d2 = d1 - sq
    discount = strike * np.exp(-rate * tau)
    call = spot * norm.cdf(d1) - discount * norm.cdf(d2)
    put = discount * norm.cdf(-d2) - spot * norm.cdf(-d1)
    price = np.where(is_call, call, put)
    delta = np.where(is_call, norm.cdf(d1), norm.cdf(d1) - 1.0)
    return price, delta


class PanelSimulator:
    """Factor log-variance panel with leverage and a synthetic option feed."""

    def __init__(self, config: SimConfig) -> None:
        """Initialize the simulator.

        :param config: Simulation parameters.
        """
        self.config = config
        streams = np.random.SeedSequence(config.seed).spawn(5)
        (
            self._vol_rng,
            self._path_rng,
            self._layout_rng,
            self._print_rng,
            self._option_rng,
        ) = (np.random.default_rng(s) for s in streams)
        calendar = pd.bdate_range(
            config.start_date, periods=config.n_days + CALENDAR_PADDING_DAYS
        )
        self.calendar = calendar
        self.dates = calendar[: config.n_days]
        width = len(str(config.n_firms))
        self.firms = [f"F{i:0{max(width, 3)}d}" for i in range(1, config.n_firms + 1)]

    def run(self) -> SimulationResult:
        """Simulate the panel.

        :return: Panel, truth, prints, daily ranges and option quotes.
        """
        cfg = self.config
        logger.info(
            f"Simulating panel. firms={cfg.n_firms} days={cfg.n_days} seed={cfg.seed}"
        )
        present = self._presence()
        true_var, expected_next, paths = self._variance_and_paths()
        logp = np.log(self._layout_rng.uniform(20.0, 200.0, cfg.n_firms))

        records, prints, ranges = [], [], []
        closes = np.empty((cfg.n_days, cfg.n_firms))
        stride = cfg.steps_per_day // n_intervals(DEFAULT_DELTA_MINUTES)
        grid = SESSION_OPEN_SEC + (
            (SESSION_CLOSE_SEC - SESSION_OPEN_SEC) // cfg.steps_per_day
        ) * np.arange(cfg.steps_per_day + 1)
        cut = (CUTOFF_SEC - SESSION_OPEN_SEC) // (DEFAULT_DELTA_MINUTES * 60)
        prev_close = np.full(cfg.n_firms, np.nan)
        for t, day in enumerate(self.dates):
            day_paths = logp[:, None] + paths[t]
            logp = day_paths[:, -1]
            closes[t] = logp
            bars = day_paths[:, ::stride]
            rets = np.diff(bars, axis=1)
            for i in np.flatnonzero(present[t]):
                base = bars[i, 0] if np.isnan(prev_close[i]) else prev_close[i]
                records.append(
                    (
                        self.firms[i],
                        day,
                        float(bars[i, -1] - base),
                        float(np.sum(rets[i] ** 2)),
                        float(np.sum(rets[i, :cut] ** 2)),
                        float(bars[i, cut] - bars[i, 0]),
                    )
                )
                if cfg.emit_prints:
                    prints.append(
                        self._prints_for(self.firms[i], day, grid, day_paths[i])
                    )
                    prices = np.exp(day_paths[i])
                    ranges.append((self.firms[i], day, prices.max(), prices.min()))
            prev_close = np.where(present[t], logp, np.nan)

        panel = DailyPanel(pd.DataFrame(records, columns=list(PANEL_COLUMNS)))
        rows, cols = np.nonzero(present)
        truth = pd.DataFrame(
            {
                PanelColumn.FIRM: [self.firms[c] for c in cols],
                PanelColumn.DATE: self.dates[rows],
                "true_ivar": true_var[rows, cols],
            }
        ).sort_values([PanelColumn.FIRM, PanelColumn.DATE], kind="stable")

        prints_frame = ranges_frame = quotes = None
        if cfg.emit_prints:
            prints_frame = (
                pd.concat(prints, ignore_index=True)
                .sort_values(
                    [PrintColumn.FIRM, PrintColumn.DATE, PrintColumn.TIME],
                    kind="stable",
                )
                .reset_index(drop=True)
            )
            ranges_frame = pd.DataFrame(
                ranges, columns=[PanelColumn.FIRM, PanelColumn.DATE, "high", "low"]
            ).sort_values([PanelColumn.FIRM, PanelColumn.DATE], kind="stable")
            ranges_frame = ranges_frame.reset_index(drop=True)
        if cfg.emit_options:
            quotes = self._option_quotes(present, np.exp(closes), expected_next)
        logger.success(
            f"Simulation finished. records={len(panel)} "
            f"prints={0 if prints_frame is None else len(prints_frame)} "
            f"quotes={0 if quotes is None else len(quotes)}"
        )
        return SimulationResult(
            panel=panel,
            truth=truth.reset_index(drop=True),
            prints=prints_frame,
            ranges=ranges_frame,
            quotes=quotes,
        )

    def _presence(self) -> NDArray:
        cfg = self.config
        present = np.ones((cfg.n_days, cfg.n_firms), dtype=bool)
        n_unbalanced = int(round(cfg.unbalanced_fraction * cfg.n_firms))
        chosen = self._layout_rng.choice(cfg.n_firms, size=n_unbalanced, replace=False)
        for i in np.sort(chosen):
            entry = int(self._layout_rng.integers(0, max(cfg.n_days // 3, 1)))
            exit_ = int(self._layout_rng.integers(2 * cfg.n_days // 3, cfg.n_days + 1))
            present[:entry, i] = False
            present[max(exit_, entry + 1) :, i] = False
        return present

    def _variance_and_paths(self) -> tuple[NDArray, NDArray, NDArray]:
        cfg = self.config
        k, phi = cfg.k_common_factors, cfg.persistence
        vov, rho = cfg.vol_of_vol, cfg.leverage_rho
        loadings = self._vol_rng.uniform(0.5, 1.5, (cfg.n_firms, k))
        loadings /= np.sqrt(max(k, 1))
        load_sq = np.sum(loadings**2, axis=1)
        stationary = vov**2 / (1 - phi**2)
        level = np.log(cfg.mean_daily_var) - 0.5 * stationary * (load_sq + 1)

        factors = self._vol_rng.standard_normal(k) * np.sqrt(stationary)
        idio = self._vol_rng.standard_normal(cfg.n_firms) * np.sqrt(stationary)
        true_var = np.empty((cfg.n_days, cfg.n_firms))
        expected_next = np.empty((cfg.n_days, cfg.n_firms))
        paths = np.empty((cfg.n_days, cfg.n_firms, cfg.steps_per_day + 1))
        next_var_of_shock = vov**2 * (load_sq + 1 - rho**2)
        for t in range(cfg.n_days):
            h = level + loadings @ factors + idio
            true_var[t] = np.exp(h)
            overnight = np.sqrt(
                cfg.overnight_var_share * true_var[t]
            ) * self._path_rng.standard_normal(cfg.n_firms)
            paths[t], z = simulate_log_price_paths(
                self._path_rng, true_var[t], cfg.steps_per_day, overnight
            )
            persistent = phi * (loadings @ factors + idio)
            expected_next[t] = np.exp(
                level + persistent + vov * rho * z + 0.5 * next_var_of_shock
            )
            factors = phi * factors + vov * self._vol_rng.standard_normal(k)
            own_shock = self._vol_rng.standard_normal(cfg.n_firms)
            idio = phi * idio + vov * (rho * z + np.sqrt(1 - rho**2) * own_shock)
        return true_var, expected_next, paths

    def _prints_for(
        self, firm: str, day: pd.Timestamp, grid: NDArray, path: NDArray
    ) -> pd.DataFrame:
        cfg = self.config
        times = grid.astype(np.int64)
        prices = np.exp(path)
        sizes = self._print_rng.integers(100, 1000, times.size)
        conds: list[str | None] = [None] * times.size
        if cfg.bad_print_rate > 0 and self._print_rng.random() < cfg.bad_print_rate:
            j = int(self._print_rng.integers(0, times.size - 1))
            times = np.insert(times, [j + 1, j + 1], [times[j] + 1, times[j] + 2])
            prices = np.insert(
                prices, [j + 1, j + 1], [prices[j] * SPIKE_FACTOR, prices[j] * 0.7]
            )
            sizes = np.insert(sizes, [j + 1, j + 1], [100, 100])
            conds[j + 1 : j + 1] = [None, "Z"]
        return pd.DataFrame(
            {
                PrintColumn.FIRM: firm,
                PrintColumn.DATE: day,
                PrintColumn.TIME: times,
                PrintColumn.PRICE: prices,
                PrintColumn.SIZE: sizes,
                PrintColumn.COND: conds,
            }
        )

    def _option_quotes(
        self, present: NDArray, spots: NDArray, expected_next: NDArray
    ) -> pd.DataFrame:
        cfg = self.config
        anchors = spots[0]
        expiry_idx = np.arange(
            EXPIRY_OFFSET_DAYS, len(self.calendar), EXPIRY_CYCLE_DAYS
        )
        offsets = np.arange(cfg.n_strikes) - cfg.n_strikes // 2
        frames = []
        for t, day in enumerate(self.dates):
            firms = np.flatnonzero(present[t])
            upcoming = expiry_idx[expiry_idx > t][:2]
            if firms.size == 0 or upcoming.size == 0:
                continue
            premium = self._option_rng.standard_normal(firms.size)
            iv = np.sqrt(TRADING_DAYS_PER_YEAR * expected_next[t, firms]) * np.exp(
                cfg.iv_bias + cfg.iv_noise * premium
            )
            spot = spots[t, firms]
            centre = np.round(np.log(spot / anchors[firms]) / cfg.strike_spacing)
            grid_pos = centre[:, None] + offsets[None, :]
            strikes = np.round(
                anchors[firms][:, None] * np.exp(cfg.strike_spacing * grid_pos), 2
            )

            n_exp, n_k = upcoming.size, cfg.n_strikes
            shape = (firms.size, n_exp, n_k, 2)
            firm_ix, exp_ix, k_ix, leg_ix = (
                ix.ravel() for ix in np.indices(shape, sparse=False)
            )
            is_call = leg_ix == 0

            days_left = upcoming[exp_ix] - t
            tau = days_left / TRADING_DAYS_PER_YEAR
            price, delta = black_scholes(
                spot[firm_ix],
                strikes[firm_ix, k_ix],
                tau,
                iv[firm_ix],
                cfg.risk_free_rate,
                is_call,
            )
            frames.append(
                pd.DataFrame(
                    {
                        QuoteColumn.FIRM: np.array(self.firms)[firms][firm_ix],
                        QuoteColumn.DATE: day,
                        QuoteColumn.EXPIRY: self.calendar[upcoming[exp_ix]],
                        QuoteColumn.STRIKE: strikes[firm_ix, k_ix],
                        QuoteColumn.CP_FLAG: np.where(is_call, "C", "P"),
                        QuoteColumn.BID: price * (1 - cfg.option_spread),
                        QuoteColumn.ASK: price * (1 + cfg.option_spread),
                        QuoteColumn.DELTA: delta,
                        QuoteColumn.IV: iv[firm_ix],
                        QuoteColumn.STOCK_BID: spot[firm_ix] * (1 - 5e-4),
                        QuoteColumn.STOCK_ASK: spot[firm_ix] * (1 + 5e-4),
                        QuoteColumn.STOCK_CLOSE: spot[firm_ix],
                    }
                )
            )
        quotes = pd.concat(frames, ignore_index=True)
        return quotes.sort_values(
            [
                QuoteColumn.FIRM,
                QuoteColumn.DATE,
                QuoteColumn.EXPIRY,
                QuoteColumn.STRIKE,
                QuoteColumn.CP_FLAG,
            ],
            kind="stable",
        ).reset_index(drop=True)


def simulate_panel(config: SimConfig) -> SimulationResult:
    """Simulate prints, the daily panel, true variances and option quotes.

    :param config: Simulation parameters.
    :return: The simulation outputs; fully determined by the config.
    """
    return PanelSimulator(config).run()
