"""Pipeline stages behind the command-line front end."""

from collections.abc import Callable, Mapping
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from loguru import logger

from vol_forecaster import __version__
from vol_forecaster.backtest.engine import DEFAULT_MODELS, BacktestConfig, run_backtest
from vol_forecaster.backtest.tuning import CVPolicy
from vol_forecaster.data.cleaning import build_daily_panel
from vol_forecaster.data.io import (
    load_panel_csv,
    load_prints_csv,
    load_quotes_csv,
    load_ranges_csv,
    load_truth_csv,
    write_dated_csv,
    write_panel_csv,
    write_prints_csv,
)
from vol_forecaster.data.simulator import SimConfig, simulate_panel
from vol_forecaster.definitions import (
    CV_FOLDS,
    DEFAULT_DELTA_MINUTES,
    DEFAULT_WINDOW,
    LAMBDA_GRID_SIZE,
    LAMBDA_MIN_RATIO,
    N_BINS,
    N_FACTORS,
    OUTPUT_DIR,
    PENALIZED_RETRAIN_EVERY,
    Aggregation,
    ModelName,
    PanelColumn,
    QuoteColumn,
    VRPForm,
)
from vol_forecaster.errors import ConfigError, UsageError
from vol_forecaster.evaluation.aggregation import (
    build_error_report,
    build_scored_cells,
    panel_summary,
    realized_from_panel,
    realized_from_truth,
)
from vol_forecaster.models.forecast_set import ForecastSet, write_weights_csv
from vol_forecaster.options.sorting import build_sort_report, options_summary
from vol_forecaster.options.straddle import build_straddles, load_straddles_csv
from vol_forecaster.utils import write_frame, write_manifest


@dataclass
class Command:
    """Pipeline subcommands."""

    simulate: str = "simulate"
    compute_rv: str = "compute-rv"
    backtest: str = "backtest"
    evaluate: str = "evaluate"
    straddles: str = "straddles"
    sort: str = "sort"
    report: str = "report"

    def __iter__(self):
        """Iterate over subcommands."""
        return iter(asdict(self).values())


@dataclass(frozen=True)
class Artifact:
    """File names of the stage outputs inside the output directory."""

    PANEL: str = "panel.csv"
    TRUTH: str = "truth.csv"
    PRINTS: str = "prints.csv"
    RANGES: str = "ranges.csv"
    QUOTES: str = "quotes.csv"
    FORECASTS: str = "forecasts.csv"
    GAPS: str = "gaps.csv"
    ERROR_REPORT: str = "error_report.csv"
    ERROR_REPORT_TRUTH: str = "error_report_truth.csv"
    STRADDLES: str = "straddles.csv"
    SORT_REPORT: str = "sort_report.csv"
    PANEL_SUMMARY: str = "panel_summary.csv"
    OPTIONS_SUMMARY: str = "options_summary.csv"


def _split(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


# Parsers for values read from a config file or the command line
FIELD_PARSERS: dict[str, Callable[[str], object]] = {
    "out_dir": Path,
    "seed": int,
    "n_firms": int,
    "n_days": int,
    "window_w": int,
    "models": _split,
    "n_factors": int,
    "cv_folds": int,
    "lambda_grid_size": int,
    "lambda_min_ratio": float,
    "retrain_every": int,
    "n_jobs": int,
    "delta_minutes": int,
    "aggregation": _split,
    "vrp_form": str,
    "n_bins": int,
    "rf_daily": float,
    "sort_model": str,
    "panel": Path,
    "prints": Path,
    "ranges": Path,
    "quotes": Path,
    "truth": Path,
    "forecasts": Path,
    "straddles": Path,
}


@dataclass(frozen=True)
class RunConfig:
    """Settings of one pipeline command."""

    command: str
    out_dir: Path = OUTPUT_DIR
    seed: int = 0
    n_firms: int = 20
    n_days: int = 600
    window_w: int = DEFAULT_WINDOW
    models: tuple[str, ...] = DEFAULT_MODELS
    n_factors: int = N_FACTORS
    cv_folds: int = CV_FOLDS
    lambda_grid_size: int = LAMBDA_GRID_SIZE
    lambda_min_ratio: float = LAMBDA_MIN_RATIO
    retrain_every: int = PENALIZED_RETRAIN_EVERY
    n_jobs: int = 1
    delta_minutes: int = DEFAULT_DELTA_MINUTES
    aggregation: tuple[str, ...] = tuple(a.value for a in Aggregation)
    vrp_form: str = VRPForm.LOG_RATIO.value
    n_bins: int = N_BINS
    rf_daily: float = 0.0
    sort_model: str = ModelName.har
    panel: Path | None = None
    prints: Path | None = None
    ranges: Path | None = None
    quotes: Path | None = None
    truth: Path | None = None
    forecasts: Path | None = None
    straddles: Path | None = None

    def __post_init__(self) -> None:
        """Validate every field before any stage runs.

        :raises UsageError: If the command or a model name is unknown.
        :raises ConfigError: If any other field is out of range.
        """
        if self.command not in set(Command()):
            msg = (
                f"Unknown command '{self.command}', expected one of {list(Command())}."
            )
            logger.error(msg)
            raise UsageError(msg)
        known = list(ModelName())
        unknown = [m for m in (*self.models, self.sort_model) if m not in known]
        if unknown:
            msg = f"Unknown models {unknown}, valid models are {known}."
            logger.error(msg)
            raise UsageError(msg)
        try:
            [Aggregation(a) for a in self.aggregation]
            VRPForm(self.vrp_form)
        except ValueError as err:
            msg = (
                f"Bad aggregation {list(self.aggregation)} or VRP form "
                f"'{self.vrp_form}'."
            )
            logger.error(msg)
            raise ConfigError(msg) from err
        if self.n_bins < 2 or self.delta_minutes < 1:
            msg = (
                f"Need n_bins >= 2 and delta_minutes >= 1, got {self.n_bins} and "
                f"{self.delta_minutes}."
            )
            logger.error(msg)
            raise ConfigError(msg)
        _ = (self.sim_config, self.backtest_config)

    @property
    def sim_config(self) -> SimConfig:
        """Simulator settings of this run."""
        return SimConfig(
            n_firms=self.n_firms,
            n_days=self.n_days,
            seed=self.seed,
        )

    @property
    def backtest_config(self) -> BacktestConfig:
        """Backtest settings of this run."""
        policy = CVPolicy(
            folds=self.cv_folds,
            grid_size=self.lambda_grid_size,
            min_ratio=self.lambda_min_ratio,
        )
        return BacktestConfig(
            window_w=self.window_w,
            models=self.models,
            cv=policy,
            n_factors=self.n_factors,
            retrain_every=self.retrain_every,
            n_jobs=self.n_jobs,
        )

    def input_path(self, name: str, default: str) -> Path:
        """Explicit input path of ``name``, else ``default`` in the output directory."""
        explicit = getattr(self, name)
        return explicit if explicit is not None else self.out_dir / default

    @classmethod
    def from_sources(
        cls,
        command: str,
        file_values: Mapping[str, str] | None = None,
        overrides: Mapping[str, object] | None = None,
    ) -> "RunConfig":
        """Merge config-file values with command-line overrides.

        :param command: Subcommand.
        :param file_values: Raw ``key = value`` pairs from a config file.
        :param overrides: Already parsed values; None entries are ignored.
        :return: The validated config.
        :raises ConfigError: If a config key is unknown or a value does not parse.
        """
        values: dict[str, object] = {}
        for key, raw in (file_values or {}).items():
            parser = FIELD_PARSERS.get(key)
            if parser is None:
                msg = (
                    f"Unknown config key '{key}', expected one of "
                    f"{sorted(FIELD_PARSERS)}."
                )
                logger.error(msg)
                raise ConfigError(msg)
            try:
                values[key] = parser(raw)
            except ValueError as err:
                msg = f"Bad value for config key '{key}': {raw!r}."
                logger.error(msg)
                raise ConfigError(msg) from err
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(command=command, **values)

    def manifest_entries(self) -> dict[str, object]:
        """Flat ``key -> value`` view of the config for the run manifest."""
        entries: dict[str, object] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            entries[f.name] = ",".join(value) if isinstance(value, tuple) else value
        return entries


class PipelineRunner:
    """Runs one pipeline stage and records its artifacts."""

    def __init__(self, config: RunConfig) -> None:
        """Initialize the runner.

        :param config: Validated run config.
        """
        logger.info(
            f"Initializing pipeline. command={config.command} out_dir={config.out_dir}"
        )
        self.config = config
        self.artifacts: dict[str, Path] = {}
        self.notes: dict[str, object] = {}
        self._stages: dict[str, Callable[[], None]] = {
            Command.simulate: self.simulate,
            Command.compute_rv: self.compute_rv,
            Command.backtest: self.backtest,
            Command.evaluate: self.evaluate,
            Command.straddles: self.straddles,
            Command.sort: self.sort,
            Command.report: self.report,
        }

    def run(self) -> dict[str, Path]:
        """Run the configured stage and write its manifest.

        :return: Artifact paths keyed by artifact name.
        """
        cfg = self.config
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        self._stages[cfg.command]()

        manifest = {"version": __version__} | cfg.manifest_entries() | self.notes
        manifest |= {
            f"artifact.{name}": path.name for name, path in self.artifacts.items()
        }
        self.artifacts["manifest"] = write_manifest(
            cfg.out_dir / f"manifest_{cfg.command}.txt", manifest
        )
        logger.success(
            f"Stage finished. command={cfg.command} artifacts={len(self.artifacts)}"
        )
        return self.artifacts

    def _out(self, name: str) -> Path:
        return self.config.out_dir / name

    def simulate(self) -> None:
        """Simulate the panel, prints, daily ranges, truth and option quotes."""
        result = simulate_panel(self.config.sim_config)
        self.artifacts["panel"] = write_panel_csv(
            result.panel, self._out(Artifact.PANEL)
        )
        self.artifacts["truth"] = write_dated_csv(
            result.truth, self._out(Artifact.TRUTH), (PanelColumn.DATE,)
        )
        if result.prints is not None:
            self.artifacts["prints"] = write_prints_csv(
                result.prints, self._out(Artifact.PRINTS)
            )
        if result.ranges is not None:
            self.artifacts["ranges"] = write_dated_csv(
                result.ranges, self._out(Artifact.RANGES), (PanelColumn.DATE,)
            )
        if result.quotes is not None:
            self.artifacts["quotes"] = write_dated_csv(
                result.quotes,
                self._out(Artifact.QUOTES),
                (QuoteColumn.DATE, QuoteColumn.EXPIRY),
            )

    def compute_rv(self) -> None:
        """Clean the prints and build the daily panel."""
        cfg = self.config
        prints = load_prints_csv(cfg.input_path("prints", Artifact.PRINTS))
        ranges_path = cfg.input_path("ranges", Artifact.RANGES)
        ranges = None
        if cfg.ranges is not None or ranges_path.exists():
            ranges = load_ranges_csv(ranges_path)
        else:
            logger.warning("No daily range file, skipping the range rule.")
        panel, totals = build_daily_panel(prints, ranges, cfg.delta_minutes)
        self.notes |= {f"cleaning.{k}": v for k, v in totals.items()}
        self.artifacts["panel"] = write_panel_csv(panel, self._out(Artifact.PANEL))

    def backtest(self) -> None:
        """Run the walk-forward backtest and write forecasts, gaps and weights."""
        cfg = self.config
        panel = load_panel_csv(cfg.input_path("panel", Artifact.PANEL))
        result = run_backtest(panel, cfg.backtest_config)
        self.artifacts["forecasts"] = result.to_csv(self._out(Artifact.FORECASTS))
        self.artifacts["gaps"] = result.gaps_to_csv(self._out(Artifact.GAPS))
        for name, weights in result.weights.items():
            self.artifacts[f"weights_{name}"] = write_weights_csv(
                weights, self._out(f"weights_{name}.csv")
            )
        self.notes |= {f"gaps.{m}": n for m, n in result.gap_counts().items()}

    def evaluate(self) -> None:
        """Score the forecasts against realized variance, and the truth if given."""
        cfg = self.config
        forecasts = ForecastSet.from_csv(
            cfg.input_path("forecasts", Artifact.FORECASTS)
        )
        panel = load_panel_csv(cfg.input_path("panel", Artifact.PANEL))
        cells = build_scored_cells(forecasts, realized_from_panel(panel))
        report = build_error_report(cells, cfg.aggregation)
        self.artifacts["error_report"] = report.to_csv(self._out(Artifact.ERROR_REPORT))
        if cfg.truth is not None:
            truth = realized_from_truth(load_truth_csv(cfg.truth))
            truth_cells = build_scored_cells(forecasts, truth)
            truth_report = build_error_report(truth_cells, cfg.aggregation)
            self.artifacts["error_report_truth"] = truth_report.to_csv(
                self._out(Artifact.ERROR_REPORT_TRUTH)
            )

    def straddles(self) -> None:
        """Filter the option quotes and form the daily straddles."""
        cfg = self.config
        quotes = load_quotes_csv(cfg.input_path("quotes", Artifact.QUOTES))
        frame, counts = build_straddles(quotes, cfg.rf_daily)
        self.notes |= {f"straddles.{k}": v for k, v in counts.items()}
        self.artifacts["straddles"] = write_dated_csv(
            frame, self._out(Artifact.STRADDLES), ("date", "next_date", "expiry")
        )

    def sort(self) -> None:
        """Sort straddles on the VRP signal and write the portfolio report."""
        cfg = self.config
        straddles = load_straddles_csv(
            cfg.input_path("straddles", Artifact.STRADDLES)
        )
        forecasts = ForecastSet.from_csv(
            cfg.input_path("forecasts", Artifact.FORECASTS)
        )
        report = build_sort_report(
            straddles, forecasts, cfg.sort_model, cfg.vrp_form, cfg.n_bins
        )
        self.notes["sort.skipped_dates"] = len(report.skipped)
        self.artifacts["sort_report"] = report.to_csv(self._out(Artifact.SORT_REPORT))

    def report(self) -> None:
        """Write the panel summary, and the options summary when straddles exist."""
        cfg = self.config
        panel = load_panel_csv(cfg.input_path("panel", Artifact.PANEL))
        self.artifacts["panel_summary"] = write_frame(
            panel_summary(panel), self._out(Artifact.PANEL_SUMMARY)
        )
        straddles_path = cfg.input_path("straddles", Artifact.STRADDLES)
        forecasts_path = cfg.input_path("forecasts", Artifact.FORECASTS)
        if not (straddles_path.exists() and forecasts_path.exists()):
            logger.warning("No straddles or forecasts, skipping the options summary.")
            return
        summary = options_summary(
            load_straddles_csv(straddles_path),
            ForecastSet.from_csv(forecasts_path),
            cfg.sort_model,
            cfg.vrp_form,
        )
        self.artifacts["options_summary"] = write_frame(
            summary, self._out(Artifact.OPTIONS_SUMMARY)
        )
