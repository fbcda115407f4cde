"""Walk-forward backtest driver."""

from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import pandas as pd
from loguru import logger

from vol_forecaster.backtest.forecasters import (
    AverageForecaster,
    CombinationForecaster,
    EgalitarianForecaster,
    Forecaster,
    HARForecaster,
    MemberHistory,
    Outcome,
    PanelView,
    PCAForecaster,
    PenalizedForecaster,
    RollingSDForecaster,
)
from vol_forecaster.backtest.splits import (
    balanced_window_filter,
    make_walkforward_splits,
)
from vol_forecaster.backtest.tuning import CVPolicy
from vol_forecaster.data.panel import DailyPanel
from vol_forecaster.definitions import (
    COMBINATION_MODELS,
    DEFAULT_WINDOW,
    ENET_L2_RATIO,
    HAR_LOOKBACK,
    MIN_FIT_ROWS,
    N_FACTORS,
    PENALIZED_MODELS,
    PENALIZED_RETRAIN_EVERY,
    ROLLING_SD_WINDOW,
    ForecastColumn,
    ModelName,
)
from vol_forecaster.errors import BacktestError, ConfigError, EmptyUniverseError
from vol_forecaster.models.forecast_set import GAP_COLUMNS, ForecastSet

DEFAULT_MODELS: tuple[str, ...] = (
    ModelName.rolling_sd,
    ModelName.har,
    ModelName.lasso,
    ModelName.pca,
    ModelName.pca_har,
    ModelName.avg,
)


@dataclass(frozen=True)
class BacktestConfig:
    """Walk-forward run settings."""

    window_w: int = DEFAULT_WINDOW
    models: tuple[str, ...] = DEFAULT_MODELS
    cv: CVPolicy = field(default_factory=CVPolicy)
    rolling_sd_window: int = ROLLING_SD_WINDOW
    n_factors: int = N_FACTORS
    min_fit_rows: int = MIN_FIT_ROWS
    lookback: int = HAR_LOOKBACK
    retrain_every: int = PENALIZED_RETRAIN_EVERY
    enet_l2_ratio: float = ENET_L2_RATIO
    window_overrides: Mapping[str, int] = field(default_factory=dict)
    n_jobs: int = 1

    def __post_init__(self) -> None:
        """Validate the config.

        :raises ConfigError: If a field is out of range or a model is unknown.
        """
        known = set(ModelName())
        unknown = [m for m in self.models if m not in known]
        if unknown:
            msg = f"Unknown models {unknown}, valid models are {sorted(known)}."
            logger.error(msg)
            raise ConfigError(msg)
        if not self.models:
            msg = "At least one model is required."
            logger.error(msg)
            raise ConfigError(msg)
        if self.window_w <= self.min_fit_rows:
            msg = (
                f"window_w={self.window_w} must exceed the minimum fit rows "
                f"{self.min_fit_rows}."
            )
            logger.error(msg)
            raise ConfigError(msg)
        for name, width in self.window_overrides.items():
            fits = self.min_fit_rows < width <= self.window_w
            if name not in self.models or not fits:
                msg = f"Bad window override {name}={width}."
                logger.error(msg)
                raise ConfigError(msg)
        counts = (
            self.rolling_sd_window,
            self.n_factors,
            self.retrain_every,
            self.n_jobs,
        )
        if min(counts) < 1:
            msg = (
                "rolling_sd_window, n_factors, retrain_every and n_jobs must be "
                "positive."
            )
            logger.error(msg)
            raise ConfigError(msg)
        if self.lookback < HAR_LOOKBACK or self.enet_l2_ratio < 0:
            msg = f"Need lookback >= {HAR_LOOKBACK} and enet_l2_ratio >= 0."
            logger.error(msg)
            raise ConfigError(msg)

    @property
    def member_models(self) -> list[str]:
        """Configured models that are not combinations."""
        return [m for m in self.models if m not in COMBINATION_MODELS]

    @property
    def combination_models(self) -> list[str]:
        """Configured combination models."""
        return [m for m in self.models if m in COMBINATION_MODELS]


def build_forecasters(
    config: BacktestConfig,
) -> dict[str, Forecaster | CombinationForecaster]:
    """Instantiate the configured models.

    :param config: Run config.
    :return: Forecasters keyed by model name, in config order.
    """
    overrides = config.window_overrides
    registry: dict[str, Forecaster | CombinationForecaster] = {}
    for name in config.models:
        width = overrides.get(name)
        if name == ModelName.rolling_sd:
            registry[name] = RollingSDForecaster(
                config.rolling_sd_window, window_w=width
            )
        elif name == ModelName.har:
            registry[name] = HARForecaster(config.min_fit_rows, window_w=width)
        elif name in PENALIZED_MODELS:
            registry[name] = PenalizedForecaster(
                name,
                policy=config.cv,
                retrain_every=config.retrain_every,
                l2_ratio=config.enet_l2_ratio,
                min_rows=config.min_fit_rows,
                window_w=width,
            )
        elif name in (ModelName.pca, ModelName.pca_har):
            registry[name] = PCAForecaster(
                nested_har=name == ModelName.pca_har,
                k=config.n_factors,
                min_rows=config.min_fit_rows,
                window_w=width,
            )
        elif name == ModelName.avg:
            registry[name] = AverageForecaster()
        else:
            registry[name] = EgalitarianForecaster(
                partial=name == ModelName.pelasso,
                policy=config.cv,
                retrain_every=config.retrain_every,
                min_rows=config.min_fit_rows,
            )
    return registry


def _collect(
    name: str, outcome: Outcome, view: PanelView, rows: list[dict], gaps: list[dict]
) -> dict[str, float]:
    values: dict[str, float] = {}
    for firm in view.firms:
        result = outcome.get(firm)
        key = {
            ForecastColumn.MODEL: name,
            ForecastColumn.FIRM: firm,
            ForecastColumn.TARGET_DATE: view.split.forecast_target,
        }
        if isinstance(result, float):
            rows.append(
                key
                | {
                    ForecastColumn.FORECAST_VAR: result,
                    ForecastColumn.MADE_AT_DATE: view.split.origin,
                }
            )
            values[firm] = result
        else:
            reason = type(result).__name__ if result is not None else "missing"
            gaps.append(key | {"reason": reason})
    return values


def run_backtest(
    panel: DailyPanel,
    config: BacktestConfig,
    forecasters: Mapping[str, Forecaster | CombinationForecaster] | None = None,
) -> ForecastSet:
    """Run the walk-forward protocol over every feasible origin.

    For each origin the firms with a full window are selected, every member
    model forecasts the next date from data stamped up to 15:55 on the
    origin, and the combinations weigh the members. Model failures become
    gaps; a leakage request aborts the run.

    :param panel: Daily panel.
    :param config: Run config.
    :param forecasters: Extra models added to the configured ones.
    :return: All forecasts and gaps.
    :raises InsufficientDataError: If the panel is too short for one split.
    :raises LeakageError: If a model requests data past its cutoff.
    :raises BacktestError: If no forecast is produced.
    """
    registry = build_forecasters(config)
    registry.update(forecasters or {})
    members = {n: f for n, f in registry.items() if isinstance(f, Forecaster)}
    combinations = {
        n: f for n, f in registry.items() if isinstance(f, CombinationForecaster)
    }
    if combinations and not members:
        msg = "Combination models need at least one member model."
        logger.error(msg)
        raise ConfigError(msg)

    splits = make_walkforward_splits(panel.date_index, config.window_w, config.lookback)
    logger.info(
        f"Starting backtest. splits={len(splits)} window_w={config.window_w} "
        f"models={','.join(registry)}"
    )

    rows: list[dict] = []
    gaps: list[dict] = []
    history = MemberHistory()
    skipped = 0
    pool = ThreadPoolExecutor(max_workers=config.n_jobs) if config.n_jobs > 1 else None
    try:
        for split in splits:
            try:
                firms = balanced_window_filter(
                    panel, (split.window_start, split.origin)
                )
            except EmptyUniverseError:
                skipped += 1
                continue
            view = PanelView(panel, split, firms, config.window_w, config.lookback)

            if pool is None:
                outcomes = [f.forecast(view) for f in members.values()]
            else:
                outcomes = list(
                    pool.map(lambda f: f.forecast(view), members.values())
                )
            members_now = pd.DataFrame(
                index=firms, columns=list(members), dtype=float
            )
            for name, outcome in zip(members, outcomes, strict=True):
                values = _collect(name, outcome, view, rows, gaps)
                members_now.loc[list(values), name] = pd.Series(values)

            for name, combination in combinations.items():
                outcome = combination.combine(view, members_now, history)
                _collect(name, outcome, view, rows, gaps)
            history.append(split.forecast_target, members_now)
    finally:
        if pool is not None:
            pool.shutdown()

    if not rows:
        msg = f"Backtest produced no forecasts. splits={len(splits)} skipped={skipped}"
        logger.error(msg)
        raise BacktestError(msg)

    weights = {
        name: c.weights.to_dict()
        for name, c in combinations.items()
        if isinstance(c, EgalitarianForecaster) and c.weights is not None
    }
    result = ForecastSet(
        pd.DataFrame(rows), pd.DataFrame(gaps, columns=list(GAP_COLUMNS)), weights
    )
    counts = result.gap_counts()
    for name in registry:
        n_fc = int((result.entries[ForecastColumn.MODEL] == name).sum())
        logger.info(
            f"Backtest model summary. model={name} forecasts={n_fc} "
            f"gaps={counts.get(name, 0)}"
        )
    logger.success(
        f"Backtest finished. forecasts={len(result)} skipped_splits={skipped}"
    )
    return result
