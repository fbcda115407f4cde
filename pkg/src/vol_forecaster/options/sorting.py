"""Volatility risk premium signals and sorted straddle portfolios."""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger
from scipy import stats

from vol_forecaster.backtest.splits import FiltrationStamp
from vol_forecaster.data.io import write_dated_csv
from vol_forecaster.definitions import (
    CLOSE_MARKER,
    CUTOFF_MARKER,
    ENCODING,
    N_BINS,
    TRADING_DAYS_PER_YEAR,
    VARIANCE_FLOOR,
    ForecastColumn,
    VRPForm,
)
from vol_forecaster.errors import (
    MODEL_FAILURES,
    ConfigError,
    DegenerateError,
    DomainError,
    InsufficientDataError,
    LagViolationError,
)
from vol_forecaster.evaluation.aggregation import SUMMARY_COLUMNS
from vol_forecaster.evaluation.losses import MIN_MOMENT_OBS, moment_summary
from vol_forecaster.models.forecast_set import ForecastSet

HML = "hml"
SIGNAL = "signal"
RV_FORECAST_VOL = "rv_forecast_vol"
IV_DAILY = "iv_daily"


def bin_labels(n_bins: int) -> list[str]:
    """Column names ``q1 .. qn`` of the sorted portfolios."""
    return [f"q{i}" for i in range(1, n_bins + 1)]


@dataclass(frozen=True)
class VRPSignal:
    """Spread between forecast realized and implied daily volatility."""

    rv_forecast_vol: float
    iv_daily: float
    signal: float
    form: VRPForm
    firm_id: str = ""
    date: pd.Timestamp | None = None


def vrp_value(rv_vol: float, iv_daily: float, form: VRPForm | str) -> float:
    """Apply the signal's functional form to two daily volatilities.

    :param rv_vol: Forecast realized volatility.
    :param iv_daily: De-annualized implied volatility.
    :param form: ``difference``, ``ratio`` or ``log_ratio``.
    :return: The signal value.
    :raises ConfigError: If the form is unknown.
    :raises DomainError: If a ratio form gets a non-positive input.
    """
    try:
        form = VRPForm(form)
    except ValueError as err:
        msg = (
            f"Unknown VRP form '{form}', expected one of {[f.value for f in VRPForm]}."
        )
        logger.error(msg)
        raise ConfigError(msg) from err
    if form == VRPForm.DIFFERENCE:
        return rv_vol - iv_daily
    if rv_vol <= 0 or iv_daily <= 0:
        msg = (
            f"{form.value} signal needs positive volatilities, got {rv_vol} and "
            f"{iv_daily}."
        )
        logger.error(msg)
        raise DomainError(msg)
    ratio = rv_vol / iv_daily
    return ratio if form == VRPForm.RATIO else math.log(ratio)


def vrp_signal(
    forecast_var: float,
    iv_annualized: float,
    form: VRPForm | str = VRPForm.LOG_RATIO,
    firm_id: str = "",
    date: pd.Timestamp | None = None,
) -> VRPSignal:
    """Build the sorting signal from a variance forecast and an annualized IV.

    :param forecast_var: Forecast daily variance.
    :param iv_annualized: Annualized implied volatility.
    :param form: Functional form of the spread.
    :param firm_id: Firm of the signal.
    :param date: Formation date.
    :return: The signal.
    :raises DomainError: If the forecast is below the floor or the IV is not positive.
    """
    if not forecast_var >= VARIANCE_FLOOR or not iv_annualized > 0:
        msg = (
            f"Need forecast_var >= {VARIANCE_FLOOR} and iv > 0, got {forecast_var} and "
            f"{iv_annualized}."
        )
        logger.error(msg)
        raise DomainError(msg)
    rv_vol = math.sqrt(forecast_var)
    iv_daily = iv_annualized / math.sqrt(TRADING_DAYS_PER_YEAR)
    return VRPSignal(
        rv_forecast_vol=rv_vol,
        iv_daily=iv_daily,
        signal=vrp_value(rv_vol, iv_daily, form),
        form=VRPForm(form),
        firm_id=firm_id,
        date=date,
    )


def assign_bins(signals: pd.Series, n_bins: int = N_BINS) -> pd.Series:
    """Rank firms by signal into ``n_bins`` groups of near-equal size.

    Ties keep firm-id order and bins 1, 2, ... take one extra firm each
    until the remainder is used up.

    :param signals: Signal per firm id.
    :param n_bins: Number of groups.
    :return: Bin number, 1 for the lowest signals, per firm id.
    :raises InsufficientDataError: If there are fewer firms than bins.
    """
    if n_bins < 2:
        msg = f"n_bins must be at least 2, got {n_bins}."
        logger.error(msg)
        raise ConfigError(msg)
    if len(signals) < n_bins:
        msg = f"Sorting needs {n_bins} firms, got {len(signals)}."
        logger.debug(msg)
        raise InsufficientDataError(msg)

    order = (
        pd.DataFrame(
            {
                SIGNAL: signals.to_numpy(dtype=float),
                "firm": signals.index.astype(str),
            }
        )
        .sort_values(["firm"], kind="stable")
        .sort_values([SIGNAL], kind="stable")
    )
    base, extra = divmod(len(order), n_bins)
    sizes = [base + (1 if b < extra else 0) for b in range(n_bins)]
    labels = np.repeat(np.arange(1, n_bins + 1), sizes)
    bins = pd.Series(labels, index=signals.index[order.index.to_numpy()])
    return bins.reindex(signals.index)


def sort_portfolios(
    signals: pd.Series, returns: pd.Series, n_bins: int = N_BINS
) -> pd.Series | None:
    """Equal-weight returns of signal-sorted portfolios for one formation date.

    :param signals: Signal per firm id.
    :param returns: Next-period excess return per firm id.
    :param n_bins: Number of portfolios.
    :return: ``q1 .. qn`` means and ``hml`` (top minus bottom), or None if
        fewer than ``n_bins`` firms have both a signal and a return.
    """
    joined = pd.concat({SIGNAL: signals, "ret": returns}, axis=1).dropna()
    try:
        bins = assign_bins(joined[SIGNAL], n_bins)
    except InsufficientDataError:
        return None
    means = joined["ret"].groupby(bins).mean().reindex(range(1, n_bins + 1))
    out = pd.Series(means.to_numpy(), index=bin_labels(n_bins))
    out[HML] = out.iloc[-1] - out.iloc[0]
    return out


@dataclass(frozen=True)
class PerformanceStats:
    """Daily, unannualized statistics of a return series."""

    mean: float
    sd: float
    skew: float
    excess_kurtosis: float
    sharpe: float
    t_stat: float
    n_days: int


def performance_stats(series: pd.Series | np.ndarray) -> PerformanceStats:
    """Summary statistics of a daily excess return series.

    Skewness and excess kurtosis are NaN below four observations.

    :param series: Returns; NaN entries are dropped.
    :return: The statistics.
    :raises InsufficientDataError: If fewer than two returns remain.
    :raises DegenerateError: If the series is constant.
    """
    values = np.asarray(series, dtype=float)
    values = values[np.isfinite(values)]
    if values.size < 2:
        msg = f"Performance statistics need two returns, got {values.size}."
        logger.error(msg)
        raise InsufficientDataError(msg)
    if np.ptp(values) == 0:
        msg = "Performance statistics of a constant series."
        logger.error(msg)
        raise DegenerateError(msg)

    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1))
    if values.size >= MIN_MOMENT_OBS:
        skew = float(stats.skew(values, bias=True))
        kurt = float(stats.kurtosis(values, fisher=True, bias=True))
    else:
        skew = kurt = float("nan")
    return PerformanceStats(
        mean=mean,
        sd=sd,
        skew=skew,
        excess_kurtosis=kurt,
        sharpe=mean / sd,
        t_stat=mean / (sd / math.sqrt(values.size)),
        n_days=int(values.size),
    )


@dataclass
class SortReport:
    """Daily portfolio returns, their statistics and the skipped dates."""

    returns: pd.DataFrame
    stats: dict[str, PerformanceStats] = field(default_factory=dict)
    skipped: dict[pd.Timestamp, str] = field(default_factory=dict)

    def to_csv(self, path: Path) -> Path:
        """Write ``date,q1..qn,hml`` rows with a ``#`` statistics footer.

        :param path: Destination file.
        :return: The destination path.
        """
        write_dated_csv(self.returns, path, ("date",))
        footer = [
            f"# stats portfolio={name} "
            + " ".join(f"{k}={v:.10g}" for k, v in vars(s).items())
            for name, s in self.stats.items()
        ]
        footer.append(f"# skipped_dates count={len(self.skipped)}")
        with path.open("a", encoding=ENCODING) as handle:
            handle.write("\n".join(footer) + "\n")
        return path


def _signal_frame(
    straddles: pd.DataFrame, forecasts: ForecastSet, model: str, form: VRPForm
) -> pd.DataFrame:
    frame = straddles.assign(
        date=pd.to_datetime(straddles["date"]),
        next_date=pd.to_datetime(straddles["next_date"]),
    )
    frame = frame.loc[frame["next_date"].notna()]
    entries = forecasts.entries
    entries = entries.loc[entries[ForecastColumn.MODEL] == model]
    if entries.empty:
        msg = f"No forecasts of model '{model}' to sort on."
        logger.error(msg)
        raise ConfigError(msg)

    merged = frame.merge(
        entries.loc[
            :,
            [
                ForecastColumn.FIRM,
                ForecastColumn.TARGET_DATE,
                ForecastColumn.FORECAST_VAR,
                ForecastColumn.MADE_AT_DATE,
            ],
        ],
        left_on=["firm_id", "next_date"],
        right_on=[ForecastColumn.FIRM, ForecastColumn.TARGET_DATE],
        how="inner",
    )
    made_dates = merged[ForecastColumn.MADE_AT_DATE]
    for made_at, formed in zip(made_dates, merged["date"], strict=True):
        made = FiltrationStamp(made_at, CUTOFF_MARKER)
        if not made < FiltrationStamp(formed, CLOSE_MARKER):
            msg = (
                f"Signal made on {made_at.date()} is not before the straddle formed on "
                f"{formed.date()}."
            )
            logger.error(msg)
            raise LagViolationError(msg)

    values = [
        vrp_signal(var, iv, form)
        for var, iv in zip(
            merged[ForecastColumn.FORECAST_VAR], merged["straddle_iv"], strict=True
        )
    ]
    return merged.assign(
        **{
            SIGNAL: [v.signal for v in values],
            RV_FORECAST_VOL: [v.rv_forecast_vol for v in values],
            IV_DAILY: [v.iv_daily for v in values],
        }
    )


def build_sort_report(
    straddles: pd.DataFrame,
    forecasts: ForecastSet,
    model: str,
    form: VRPForm | str = VRPForm.LOG_RATIO,
    n_bins: int = N_BINS,
) -> SortReport:
    """Sort straddles on the VRP signal each date and hold them one period.

    The straddle formed at the close of ``date`` is ranked with the forecast
    targeting ``next_date``, which must be made no later than 15:55 on
    ``date``, and the straddle's implied volatility at ``date``.

    :param straddles: Output of ``build_straddles``.
    :param forecasts: Forecasts of at least ``model``.
    :param model: Model whose forecast feeds the signal.
    :param form: Functional form of the signal.
    :param n_bins: Number of portfolios.
    :return: The report.
    :raises LagViolationError: If a forecast is made after the formation close.
    :raises ConfigError: If the model has no forecasts.
    """
    form = VRPForm(form)
    frame = _signal_frame(straddles, forecasts, model, form)
    frame = frame.loc[np.isfinite(frame["straddle_excess_return"])]

    rows, skipped = [], {}
    for day, group in frame.groupby("date", sort=True):
        indexed = group.set_index("firm_id")
        sorted_returns = sort_portfolios(
            indexed[SIGNAL], indexed["straddle_excess_return"], n_bins
        )
        if sorted_returns is None:
            skipped[pd.Timestamp(day)] = f"fewer_than_{n_bins}_firms"
            continue
        rows.append({"date": pd.Timestamp(day)} | sorted_returns.to_dict())
    columns = ["date", *bin_labels(n_bins), HML]
    returns = pd.DataFrame(rows, columns=columns)

    report_stats = {}
    for name in columns[1:]:
        try:
            report_stats[name] = performance_stats(returns[name])
        except MODEL_FAILURES:
            logger.warning(f"No statistics for portfolio. portfolio={name}")
    if skipped:
        logger.warning(f"Dates skipped in sort. count={len(skipped)}")
    if HML in report_stats:
        hml = report_stats[HML]
        logger.info(
            f"Sorted straddles. model={model} form={form.value} days={hml.n_days} "
            f"hml_mean={hml.mean:.5f} hml_sharpe={hml.sharpe:.4f} "
            f"hml_t={hml.t_stat:.3f}"
        )
    return SortReport(returns, report_stats, skipped)


def options_summary(
    straddles: pd.DataFrame,
    forecasts: ForecastSet,
    model: str,
    form: VRPForm | str = VRPForm.LOG_RATIO,
) -> pd.DataFrame:
    """Moments of straddle returns, volatility levels and the signal.

    Each variable is summarized over the cross-section of every date and
    the per-date summaries are averaged.

    :param straddles: Output of ``build_straddles``.
    :param forecasts: Forecasts of at least ``model``.
    :param model: Model whose forecast feeds the signal.
    :param form: Functional form of the signal.
    :return: One row per variable with the summary columns.
    """
    frame = _signal_frame(straddles, forecasts, model, VRPForm(form))
    rows = []
    variables = (
        "straddle_excess_return",
        "dh_call_excess_return",
        IV_DAILY,
        RV_FORECAST_VOL,
        SIGNAL,
    )
    for variable in variables:
        summaries = []
        for _, group in frame.groupby("date", sort=True):
            values = group[variable].to_numpy(dtype=float)
            try:
                summaries.append(moment_summary(values[np.isfinite(values)]))
            except MODEL_FAILURES:
                continue
        if not summaries:
            continue
        table = pd.DataFrame([vars(s) for s in summaries]).mean()
        row = {"variable": variable, "aggregation": "average_cross_section"}
        rows.append(row | table.to_dict())
    return pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))
