"""Common definitions for this module."""

from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

np.set_printoptions(precision=6, suppress=True)


# --- Directories ---

ROOT_DIR: Path = Path(__file__).resolve().parents[2]
# Use the file location to determine the project root reliably.
DATA_DIR: Path = ROOT_DIR / "data"
TESTING_DIR: Path = ROOT_DIR / "tests"
OUTPUT_DIR: Path = DATA_DIR / "runs"
LOG_DIR: Path = DATA_DIR / "logs"


# Default encoding
ENCODING: str = "utf-8"

DATE_FORMAT = "%Y-%m-%d_%H-%M-%S"
CSV_DATE_FORMAT = "%Y-%m-%d"
CSV_TIME_FORMAT = "%H:%M:%S"


@dataclass
class LogLevel:
    """Log level."""

    trace: str = "TRACE"
    debug: str = "DEBUG"
    info: str = "INFO"
    success: str = "SUCCESS"
    warning: str = "WARNING"
    error: str = "ERROR"
    critical: str = "CRITICAL"

    def __iter__(self):
        """Iterate over log levels."""
        return iter(asdict(self).values())


DEFAULT_LOG_LEVEL = LogLevel.info
DEFAULT_LOG_FILENAME = "log_file"


# --- Trading session (seconds since midnight, exchange local) ---

SESSION_OPEN_SEC = 9 * 3600 + 30 * 60
SESSION_CLOSE_SEC = 16 * 3600
CUTOFF_SEC = 15 * 3600 + 55 * 60
DEFAULT_DELTA_MINUTES = 5
CUTOFF_MARKER = "15:55"
CLOSE_MARKER = "16:00"

# TAQ condition codes that never enter the cleaned print stream
EXCLUDED_CONDITION_CODES = frozenset({"B", "G", "J", "K", "L", "O", "T", "W", "Z"})
# |log return| of a print and of its immediate reversal, i.e. a 25% move
PRINT_REVERSAL_LOG_THRESHOLD = float(np.log(1.25))


# --- Forecasting ---

VARIANCE_FLOOR = 1e-8
DEFAULT_WINDOW = 250
MIN_FIT_ROWS = 60
ROLLING_SD_WINDOW = 22
HORIZON_DAYS: dict[str, int] = {"d": 1, "w": 5, "m": 22}
HAR_LOOKBACK = HORIZON_DAYS["m"] - 1

PENALIZED_RETRAIN_EVERY = 20

CD_TOL = 1e-7
CD_MAX_ITER = 10_000

LAMBDA_GRID_SIZE = 20
LAMBDA_MIN_RATIO = 1e-4
CV_FOLDS = 5
ENET_L2_RATIO = 0.5

N_FACTORS = 3


# --- Options ---

TRADING_DAYS_PER_YEAR = 250
MIN_DAYS_TO_EXPIRY = 10
ATM_DELTA = 0.5
N_BINS = 5


@dataclass(frozen=True)
class OptionFilterLimit:
    """Thresholds of the end-of-day option quote filters."""

    MIN_MIDPOINT: float = 0.1
    MAX_SPREAD_TO_MID: float = 0.5
    REASONABLE_SPREAD_CAP: float = 10.0
    REVERSAL_UP: float = 20.0
    REVERSAL_DOWN: float = -0.95


class Aggregation(str, Enum):
    """Error aggregation schemes."""

    AVERAGE_FIRM = "average_firm"
    AVERAGE_CROSS_SECTION = "average_cross_section"
    POOLED = "pooled"


class LossKind(str, Enum):
    """Per-cell forecast loss kinds."""

    MSE = "MSE"
    RMSE_AGG = "RMSE_agg"
    MAE = "MAE"
    QLIKE = "QLIKE"


class VRPForm(str, Enum):
    """Functional form of the volatility risk premium signal."""

    DIFFERENCE = "difference"
    RATIO = "ratio"
    LOG_RATIO = "log_ratio"


@dataclass
class ModelName:
    """Forecaster names accepted by the backtest."""

    rolling_sd: str = "rolling_sd"
    har: str = "har"
    lasso: str = "lasso"
    ridge: str = "ridge"
    enet: str = "enet"
    pca: str = "pca"
    pca_har: str = "pca_har"
    avg: str = "avg"
    elasso: str = "elasso"
    pelasso: str = "pelasso"

    def __iter__(self):
        """Iterate over model names."""
        return iter(asdict(self).values())


COMBINATION_MODELS = frozenset({ModelName.avg, ModelName.elasso, ModelName.pelasso})
PENALIZED_MODELS = frozenset({ModelName.lasso, ModelName.ridge, ModelName.enet})


@dataclass(frozen=True)
class PanelColumn:
    """Daily panel CSV columns."""

    FIRM: str = "firm_id"
    DATE: str = "date"
    RET_FULL_DAY: str = "ret_full_day"
    RV_DAY: str = "rv_day"
    RV_355: str = "rv_355"
    RET_355: str = "ret_355"


@dataclass(frozen=True)
class PrintColumn:
    """Intraday prints CSV columns."""

    FIRM: str = "firm_id"
    DATE: str = "date"
    TIME: str = "time"
    PRICE: str = "price"
    SIZE: str = "size"
    COND: str = "cond"
    CORR: str = "corr"


@dataclass(frozen=True)
class QuoteColumn:
    """Option quotes CSV columns."""

    FIRM: str = "firm_id"
    DATE: str = "date"
    EXPIRY: str = "expiry"
    STRIKE: str = "strike"
    CP_FLAG: str = "cp_flag"
    BID: str = "bid"
    ASK: str = "ask"
    DELTA: str = "delta"
    IV: str = "iv"
    STOCK_BID: str = "stock_bid"
    STOCK_ASK: str = "stock_ask"
    STOCK_CLOSE: str = "stock_close"


@dataclass(frozen=True)
class ForecastColumn:
    """Forecast CSV columns."""

    MODEL: str = "model"
    FIRM: str = "firm_id"
    TARGET_DATE: str = "target_date"
    FORECAST_VAR: str = "forecast_var"
    MADE_AT_DATE: str = "made_at_date"


PANEL_COLUMNS: tuple[str, ...] = tuple(asdict(PanelColumn()).values())
PRINT_COLUMNS: tuple[str, ...] = tuple(
    c for c in asdict(PrintColumn()).values() if c != PrintColumn.CORR
)
QUOTE_COLUMNS: tuple[str, ...] = tuple(asdict(QuoteColumn()).values())
FORECAST_COLUMNS: tuple[str, ...] = tuple(asdict(ForecastColumn()).values())
TRUTH_COLUMNS: tuple[str, ...] = (PanelColumn.FIRM, PanelColumn.DATE, "true_ivar")
RANGE_COLUMNS: tuple[str, ...] = (PanelColumn.FIRM, PanelColumn.DATE, "high", "low")
ERROR_REPORT_COLUMNS: tuple[str, ...] = (
    "model",
    "aggregation",
    "rmse",
    "mae",
    "qlike",
    "mz_r2",
    "mz_alpha",
    "mz_beta",
)
