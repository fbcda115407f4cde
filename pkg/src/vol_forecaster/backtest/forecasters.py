"""Forecasters driven by the walk-forward engine and their filtered panel view."""

from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import NDArray

from vol_forecaster.backtest.splits import FiltrationStamp, SplitSpec
from vol_forecaster.backtest.tuning import (
    CVPolicy,
    PathFit,
    pointwise,
    tune_hyperparameters,
)
from vol_forecaster.data.panel import DailyPanel
from vol_forecaster.definitions import (
    ENET_L2_RATIO,
    HAR_LOOKBACK,
    MIN_FIT_ROWS,
    N_FACTORS,
    PENALIZED_RETRAIN_EVERY,
    ROLLING_SD_WINDOW,
    TRUTH_COLUMNS,
    ModelName,
    PanelColumn,
)
from vol_forecaster.errors import (
    MODEL_FAILURES,
    ConfigError,
    InsufficientDataError,
    LeakageError,
    TuningError,
)
from vol_forecaster.math_utils import floor_variance
from vol_forecaster.models.combination import average_forecasts, egalitarian_combine
from vol_forecaster.models.factor import extract_pca_factors, factor_model_forecast
from vol_forecaster.models.har import (
    har_design,
    har_forecast,
    rolling_sd_squared_forecast,
)
from vol_forecaster.models.regression import (
    PenalizedFit,
    PenaltySpec,
    fit_penalized,
    fit_penalized_path,
    lambda_grid,
    lambda_max,
)

Outcome = dict[str, float | Exception]
PREDICTOR_FIELDS: tuple[str, ...] = (PanelColumn.RV_355, PanelColumn.RET_355)
FORECAST_FAILURES = (*MODEL_FAILURES, TuningError)


class PanelView:
    """The panel as observable at 15:55 on a split's origin.

    Cutoff fields are readable through the origin, full-day fields through
    the previous date. Any request past that raises ``LeakageError``.
    """

    def __init__(
        self,
        panel: DailyPanel,
        split: SplitSpec,
        firms: Sequence[str],
        window_w: int,
        lookback: int = HAR_LOOKBACK,
    ) -> None:
        """Initialize the view.

        :param panel: The full panel.
        :param split: The current split.
        :param firms: Firms surviving the balanced-window filter.
        :param window_w: Window length of the run.
        :param lookback: Dates kept before the window for trailing averages.
        """
        self._panel = panel
        self.split = split
        self.firms = list(firms)
        self.window_w = window_w
        self.lookback = lookback
        self._dates = panel.date_index

    @property
    def cutoff(self) -> FiltrationStamp:
        """Latest stamp this view may serve."""
        return self.split.stamp

    def last_visible(self, field: str) -> pd.Timestamp:
        """Last date of ``field`` observable at the cutoff."""
        if FiltrationStamp.of_field(field, self.split.origin) <= self.cutoff:
            return self.split.origin
        return self._dates[self.split.position - 1]

    def fetch(
        self,
        field: str,
        start: pd.Timestamp,
        end: pd.Timestamp,
        firms: Sequence[str] | None = None,
    ) -> pd.DataFrame:
        """Dates by firms values of ``field`` between two dates.

        :param field: Panel value column.
        :param start: First date.
        :param end: Last date.
        :param firms: Columns to return, defaults to the view's universe.
        :return: The matrix.
        :raises LeakageError: If ``end`` is stamped after the cutoff.
        """
        stamp = FiltrationStamp.of_field(field, end)
        if stamp > self.cutoff:
            msg = (
                f"Request for {field} at ({stamp.date.date()}, {stamp.marker}) "
                f"after cutoff ({self.cutoff.date.date()}, {self.cutoff.marker})."
            )
            logger.error(msg)
            raise LeakageError(msg)
        wide = self._panel.wide(field).loc[pd.Timestamp(start) : pd.Timestamp(end)]
        return wide.loc[:, list(self.firms if firms is None else firms)]

    def window_start(self, window_w: int | None = None) -> pd.Timestamp:
        """First date of the estimation window, lookback included."""
        width = window_w or self.window_w
        return self._dates[self.split.position - width - self.lookback]

    def window(self, field: str, window_w: int | None = None) -> pd.DataFrame:
        """Estimation window of ``field`` through its last visible date.

        :param field: Panel value column.
        :param window_w: Window length, defaults to the run's.
        :return: Dates by firms matrix.
        """
        return self.fetch(field, self.window_start(window_w), self.last_visible(field))

    def train_range(
        self, window_w: int | None = None
    ) -> tuple[pd.Timestamp, pd.Timestamp]:
        """First and last training target date."""
        width = window_w or self.window_w
        p = self.split.position
        return self._dates[p - width + 1], self._dates[p - 1]


def _per_firm(firms: Sequence[str], fn: Callable[[str], float]) -> Outcome:
    out: Outcome = {}
    for firm in firms:
        try:
            out[firm] = fn(firm)
        except FORECAST_FAILURES as err:
            logger.debug(f"Forecast failed. firm={firm} reason={type(err).__name__}")
            out[firm] = err
    return out


def _all_failed(firms: Sequence[str], err: Exception) -> Outcome:
    return {firm: err for firm in firms}


class Forecaster(ABC):
    """A member model producing one forecast per surviving firm per split."""

    name: str = ""

    def __init__(self, window_w: int | None = None) -> None:
        """Initialize the forecaster.

        :param window_w: Per-model window override, or None for the run's.
        """
        self.window_w = window_w

    @abstractmethod
    def forecast(self, view: PanelView) -> Outcome:
        """Forecast every firm of the view at the split's target.

        :param view: Filtered panel view.
        :return: Forecast or failure per firm.
        """


class RollingSDForecaster(Forecaster):
    """Mean squared full-day return over a trailing window."""

    name = ModelName.rolling_sd

    def __init__(
        self, window: int = ROLLING_SD_WINDOW, window_w: int | None = None
    ) -> None:
        """Initialize with the number of trailing returns."""
        super().__init__(window_w)
        self.window = window

    def forecast(self, view: PanelView) -> Outcome:
        """Forecast from returns through the previous close."""
        returns = view.window(PanelColumn.RET_FULL_DAY, self.window_w)
        return _per_firm(
            view.firms,
            lambda firm: rolling_sd_squared_forecast(
                returns[firm].dropna().to_numpy(), self.window
            ),
        )


class HARForecaster(Forecaster):
    """Per-firm HAR on 15:55 regressors, refit every day."""

    name = ModelName.har

    def __init__(
        self, min_rows: int = MIN_FIT_ROWS, window_w: int | None = None
    ) -> None:
        """Initialize with the minimum training rows."""
        super().__init__(window_w)
        self.min_rows = min_rows

    def forecast(self, view: PanelView) -> Outcome:
        """Fit and forecast each firm on its own history."""
        rv_day = view.window(PanelColumn.RV_DAY, self.window_w)
        rv_355 = view.window(PanelColumn.RV_355, self.window_w)
        fit_window = view.train_range(self.window_w)
        target = view.split.forecast_target
        return _per_firm(
            view.firms,
            lambda firm: har_forecast(
                rv_day[firm],
                fit_window,
                target,
                predictor_rv=rv_355[firm],
                min_rows=self.min_rows,
            )[1],
        )


def cross_section_design(
    view: PanelView, window_w: int | None = None
) -> tuple[NDArray, list]:
    """Lagged (d, w, m) averages of every firm's 15:55 variance and return.

    :param view: Filtered panel view.
    :param window_w: Window override.
    :return: Window dates by predictors matrix and the predictor ids
        ``(firm_id, field, horizon)``.
    """
    blocks, ids = [], []
    for field in PREDICTOR_FIELDS:
        values = view.window(field, window_w)
        for firm in view.firms:
            blocks.append(har_design(values[firm].to_numpy(dtype=float)))
            ids.extend((firm, field, h) for h in ("d", "w", "m"))
    return np.hstack(blocks), ids


class PenalizedForecaster(Forecaster):
    """LASSO, ridge or elastic net on the whole cross-section of lagged predictors.

    Coefficients and the tuned penalty are held between refits.
    """

    def __init__(
        self,
        kind: str = ModelName.lasso,
        policy: CVPolicy | None = None,
        retrain_every: int = PENALIZED_RETRAIN_EVERY,
        l2_ratio: float = ENET_L2_RATIO,
        min_rows: int = MIN_FIT_ROWS,
        window_w: int | None = None,
    ) -> None:
        """Initialize the forecaster.

        :param kind: One of ``lasso``, ``ridge`` or ``enet``.
        :param policy: Cross-validation policy.
        :param retrain_every: Origins between refits.
        :param l2_ratio: Ridge penalty as a multiple of the l1 penalty for ``enet``.
        :param min_rows: Minimum training rows.
        :param window_w: Window override.
        :raises ConfigError: If ``kind`` is not a penalized model.
        """
        super().__init__(window_w)
        if kind not in (ModelName.lasso, ModelName.ridge, ModelName.enet):
            msg = f"Unknown penalized model '{kind}'."
            logger.error(msg)
            raise ConfigError(msg)
        self.name = kind
        self.policy = policy or CVPolicy()
        self.retrain_every = retrain_every
        self.l2_ratio = l2_ratio
        self.min_rows = min_rows
        self._fits: dict[str, PenalizedFit | Exception] = {}
        self._fitted_at: int | None = None
        self._universe: tuple[str, ...] = ()

    def penalty(self, lam: float) -> PenaltySpec:
        """Penalty spec of this model at strength ``lam``."""
        if self.name == ModelName.ridge:
            return PenaltySpec(lambda_l2=lam)
        if self.name == ModelName.enet:
            return PenaltySpec(lambda_l1=lam, lambda_l2=self.l2_ratio * lam)
        return PenaltySpec(lambda_l1=lam)

    def _path_fit(self, ids: list) -> PathFit:
        def path_fit(X: NDArray, y: NDArray, grid: Sequence[float]) -> list:
            fits = fit_penalized_path(X, y, [self.penalty(lam) for lam in grid], ids)
            return [f if isinstance(f, Exception) else f.predict for f in fits]

        return path_fit

    def _fit_firm(self, X: NDArray, y: NDArray, ids: list) -> PenalizedFit:
        rows = np.isfinite(y)
        if rows.sum() < self.min_rows:
            msg = (
                f"{self.name} needs {self.min_rows} training rows, "
                f"found {int(rows.sum())}."
            )
            logger.error(msg)
            raise InsufficientDataError(msg)
        X, y = X[rows], y[rows]
        grid = lambda_grid(
            lambda_max(X, y), self.policy.grid_size, self.policy.min_ratio
        )
        lam = tune_hyperparameters(X, y, grid, self._path_fit(ids), self.policy)
        return fit_penalized(X, y, self.penalty(lam), predictor_ids=ids)

    def _refit(self, view: PanelView, design: NDArray, ids: list) -> None:
        start, end = view.train_range(self.window_w)
        rv_day = view.fetch(PanelColumn.RV_DAY, start, end)
        dates = view.window(PanelColumn.RV_355, self.window_w).index
        # predictor rows dated one day before each training target
        lo = int(dates.get_loc(start)) - 1
        X = design[lo : lo + len(rv_day)]
        if not np.all(np.isfinite(X)):
            err = InsufficientDataError("Incomplete predictor history.")
            self._fits = _all_failed(view.firms, err)
        else:
            self._fits = {}
            for firm in view.firms:
                target = rv_day[firm].to_numpy(dtype=float)
                try:
                    self._fits[firm] = self._fit_firm(X, target, ids)
                except FORECAST_FAILURES as err:
                    logger.debug(
                        f"Penalized fit failed. model={self.name} firm={firm} "
                        f"reason={type(err).__name__}"
                    )
                    self._fits[firm] = err
        self._fitted_at = view.split.position
        self._universe = tuple(view.firms)
        logger.debug(
            f"Refit penalized model. model={self.name} "
            f"origin={view.split.origin.date()} firms={len(view.firms)}"
        )

    def forecast(self, view: PanelView) -> Outcome:
        """Forecast from the cached fits, refitting when due or on a new universe."""
        design, ids = cross_section_design(view, self.window_w)
        due = (
            self._fitted_at is None
            or view.split.position - self._fitted_at >= self.retrain_every
            or tuple(view.firms) != self._universe
        )
        if due:
            self._refit(view, design, ids)

        latest = design[-1]

        def predict(firm: str) -> float:
            fit = self._fits[firm]
            if isinstance(fit, Exception):
                raise fit
            return floor_variance(float(fit.predict(latest)[0]))

        return _per_firm(view.firms, predict)


class PCAForecaster(Forecaster):
    """Factor model of the cross-section, optionally nested with firm HAR terms."""

    def __init__(
        self,
        nested_har: bool = False,
        k: int = N_FACTORS,
        min_rows: int = MIN_FIT_ROWS,
        forecast_residuals: bool = True,
        persistent_factors: bool = False,
        window_w: int | None = None,
    ) -> None:
        """Initialize the forecaster.

        :param nested_har: Add each firm's HAR regressors.
        :param k: Retained components.
        :param min_rows: Minimum rows of every regression.
        :param forecast_residuals: Add residual forecasts.
        :param persistent_factors: Carry the last factor values forward.
        :param window_w: Window override.
        """
        super().__init__(window_w)
        self.name = ModelName.pca_har if nested_har else ModelName.pca
        self.nested_har = nested_har
        self.k = k
        self.min_rows = min_rows
        self.forecast_residuals = forecast_residuals
        self.persistent_factors = persistent_factors

    def forecast(self, view: PanelView) -> Outcome:
        """Extract factors on the 15:55 window and forecast every firm."""
        if len(view.firms) < self.k:
            err = InsufficientDataError(
                f"{len(view.firms)} firms cannot carry {self.k} factors."
            )
            logger.debug(
                f"Factor model skipped. model={self.name} firms={len(view.firms)}"
            )
            return _all_failed(view.firms, err)

        rv_window = view.window(PanelColumn.RV_355, self.window_w)
        target_rv = view.window(PanelColumn.RV_DAY, self.window_w)
        try:
            model = extract_pca_factors(rv_window, self.k)
            _, forecasts = factor_model_forecast(
                model,
                rv_window,
                view.split.forecast_target,
                nested_har=self.nested_har,
                target_rv=target_rv,
                forecast_residuals=self.forecast_residuals,
                persistent_factors=self.persistent_factors,
                min_rows=self.min_rows,
            )
        except MODEL_FAILURES as err:
            return _all_failed(view.firms, err)

        def pick(firm: str) -> float:
            value = forecasts[firm]
            if not np.isfinite(value):
                msg = f"Factor regression failed for {firm}."
                raise InsufficientDataError(msg)
            return float(value)

        return _per_firm(view.firms, pick)


class OracleForecaster(Forecaster):
    """Returns the true integrated variance of the target date."""

    name = "oracle"

    def __init__(self, truth: pd.DataFrame) -> None:
        """Initialize from a ``firm_id,date,true_ivar`` frame."""
        super().__init__()
        firm, day, value = TRUTH_COLUMNS
        self._truth = truth.set_index([firm, pd.to_datetime(truth[day])])[value]

    def forecast(self, view: PanelView) -> Outcome:
        """Look up the truth of every firm at the target date."""
        target = view.split.forecast_target

        def lookup(firm: str) -> float:
            try:
                return floor_variance(float(self._truth.loc[(firm, target)]))
            except KeyError as err:
                msg = f"No true variance for {firm} on {target.date()}."
                raise InsufficientDataError(msg) from err

        return _per_firm(view.firms, lookup)


class MemberHistory:
    """Out-of-sample member forecasts accumulated across splits."""

    def __init__(self) -> None:
        """Initialize an empty history."""
        self._frames: list[pd.DataFrame] = []

    def append(self, target: pd.Timestamp, members_now: pd.DataFrame) -> None:
        """Record the member forecasts of one target date.

        :param target: Target date.
        :param members_now: Firms by members forecasts.
        """
        frame = members_now.copy()
        frame.index = pd.MultiIndex.from_product(
            [[target], frame.index], names=["target_date", "firm_id"]
        )
        self._frames.append(frame)

    def pooled(self, start: pd.Timestamp, end: pd.Timestamp) -> pd.DataFrame:
        """Rows (target_date, firm_id) by members with targets in ``[start, end]``."""
        if not self._frames:
            return pd.DataFrame()
        frame = pd.concat(self._frames)
        dates = frame.index.get_level_values("target_date")
        return frame.loc[(dates >= start) & (dates <= end)].sort_index()


class CombinationForecaster(ABC):
    """Combines member forecasts of the same split."""

    name: str = ""

    @abstractmethod
    def combine(
        self, view: PanelView, members_now: pd.DataFrame, history: MemberHistory
    ) -> Outcome:
        """Combine the members' forecasts for every firm.

        :param view: Filtered panel view.
        :param members_now: Firms by members forecasts, NaN for gaps.
        :param history: Earlier member forecasts.
        :return: Forecast or failure per firm.
        """


class AverageForecaster(CombinationForecaster):
    """Equal-weight mean of the available members."""

    name = ModelName.avg

    def combine(
        self, view: PanelView, members_now: pd.DataFrame, history: MemberHistory
    ) -> Outcome:
        """Average each firm's available member forecasts."""
        return _per_firm(
            view.firms,
            lambda firm: floor_variance(
                average_forecasts(members_now.loc[firm].to_numpy())
            ),
        )


class EgalitarianForecaster(CombinationForecaster):
    """Egalitarian LASSO weights fitted on the pooled member history."""

    def __init__(
        self,
        partial: bool = False,
        policy: CVPolicy | None = None,
        retrain_every: int = PENALIZED_RETRAIN_EVERY,
        min_rows: int = MIN_FIT_ROWS,
    ) -> None:
        """Initialize the combination.

        :param partial: Select members before shrinking toward equal weights.
        :param policy: Cross-validation policy for the penalty.
        :param retrain_every: Origins between refits.
        :param min_rows: Minimum pooled history rows.
        """
        self.name = ModelName.pelasso if partial else ModelName.elasso
        self.partial = partial
        self.policy = policy or CVPolicy()
        self.retrain_every = retrain_every
        self.min_rows = min_rows
        self.weights: pd.Series | None = None
        self._fitted_at: int | None = None
        self._failure: Exception | None = None

    def _fit(self, view: PanelView, history: MemberHistory, members: list[str]) -> None:
        start, end = view.train_range()
        pooled = history.pooled(start, end)
        if pooled.empty:
            raise InsufficientDataError("No member history yet.")
        pooled = pooled.loc[:, members].dropna()
        realized = view.fetch(
            PanelColumn.RV_DAY, start, end, firms=self._all_firms(pooled)
        ).stack()
        realized.index.names = ["target_date", "firm_id"]
        joined = pooled.join(realized.rename("realized"), how="inner").dropna()
        needed = max(self.min_rows, len(members) + 1, self.policy.folds + 1)
        if len(joined) < needed:
            msg = f"{self.name} needs {needed} pooled rows, found {len(joined)}."
            raise InsufficientDataError(msg)

        X = joined[members].to_numpy(dtype=float)
        y = joined["realized"].to_numpy(dtype=float)
        grid = lambda_grid(
            lambda_max(X, y - X.mean(axis=1), center=False),
            self.policy.grid_size,
            self.policy.min_ratio,
        )
        fit_lam = pointwise(
            lambda Xt, yt, lam: egalitarian_combine(Xt, yt, lam, self.partial).combine
        )
        lam = tune_hyperparameters(X, y, grid, fit_lam, self.policy)
        result = egalitarian_combine(X, y, lam, self.partial)
        self.weights = pd.Series(result.weights, index=members)
        logger.debug(
            f"Refit combination. model={self.name} rows={len(joined)} lam={lam:.3e} "
            + " ".join(f"{m}={w:.4f}" for m, w in self.weights.items())
        )

    @staticmethod
    def _all_firms(pooled: pd.DataFrame) -> list[str]:
        return sorted(set(pooled.index.get_level_values("firm_id")))

    def combine(
        self, view: PanelView, members_now: pd.DataFrame, history: MemberHistory
    ) -> Outcome:
        """Refit the weights when due, then weight each firm's member forecasts."""
        members = list(members_now.columns)
        due = (
            self._fitted_at is None
            or self.weights is None
            or view.split.position - self._fitted_at >= self.retrain_every
            or list(self.weights.index) != members
        )
        if due:
            try:
                self._fit(view, history, members)
                self._failure = None
                self._fitted_at = view.split.position
            except FORECAST_FAILURES as err:
                self._failure = err
                self.weights = None
        if self._failure is not None or self.weights is None:
            failure = self._failure or InsufficientDataError("No weights.")
            return _all_failed(view.firms, failure)

        weights = self.weights

        def weigh(firm: str) -> float:
            row = members_now.loc[firm, list(weights.index)].to_numpy(dtype=float)
            if not np.all(np.isfinite(row)):
                msg = f"Member forecast missing for {firm}."
                raise InsufficientDataError(msg)
            return floor_variance(float(row @ weights.to_numpy()))

        return _per_firm(view.firms, weigh)
