"""CSV readers and writers for panels, prints, truth and option quotes."""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from vol_forecaster.data.panel import DailyPanel
from vol_forecaster.definitions import (
    CSV_DATE_FORMAT,
    PANEL_COLUMNS,
    PRINT_COLUMNS,
    QUOTE_COLUMNS,
    RANGE_COLUMNS,
    TRUTH_COLUMNS,
    PanelColumn,
    PrintColumn,
    QuoteColumn,
)
from vol_forecaster.errors import FormatError
from vol_forecaster.utils import write_frame


def _fail(path: Path, msg: str) -> None:
    full = f"{path}: {msg}"
    logger.error(full)
    raise FormatError(full)


def _first_bad_line(mask: pd.Series) -> int:
    """File line of the first flagged data row, counting the header as line 1."""
    return int(np.flatnonzero(mask.to_numpy())[0]) + 2


def _parse_time(text: pd.Series) -> pd.Series:
    parts = text.str.extract(r"^(\d{2}):(\d{2}):(\d{2})$").astype(float)
    seconds = parts[0] * 3600 + parts[1] * 60 + parts[2]
    valid = (parts[0] < 24) & (parts[1] < 60) & (parts[2] < 60)
    return seconds.where(valid)


def read_validated_csv(
    path: Path,
    columns: Sequence[str],
    key: Sequence[str],
    date_columns: Sequence[str] = (),
    numeric_columns: Sequence[str] = (),
    time_column: str | None = None,
    optional_columns: Sequence[str] = (),
) -> pd.DataFrame:
    """Read a CSV, validating header, fields, key uniqueness and row order.

    :param path: CSV file.
    :param columns: Required header, in order.
    :param key: Columns forming the unique, ascending row key.
    :param date_columns: Columns holding ``YYYY-MM-DD`` dates.
    :param numeric_columns: Columns that must parse as finite numbers.
    :param time_column: Column holding ``HH:MM:SS`` times, parsed to seconds.
    :param optional_columns: Columns allowed after the required header.
    :return: The parsed frame.
    :raises FormatError: On any violation; the message names the file line.
    """
    if not path.exists():
        _fail(path, "file not found")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    header = list(raw.columns)
    allowed_tail = [c for c in header[len(columns) :] if c in optional_columns]
    extra = len(header) - len(columns)
    if header[: len(columns)] != list(columns) or len(allowed_tail) != extra:
        _fail(path, f"header {header} does not match {list(columns)}")

    frame = raw.copy()
    for col in date_columns:
        frame[col] = pd.to_datetime(raw[col], format=CSV_DATE_FORMAT, errors="coerce")
        if frame[col].isna().any():
            _fail(path, f"line {_first_bad_line(frame[col].isna())}: malformed {col}")
    for col in numeric_columns:
        frame[col] = pd.to_numeric(raw[col], errors="coerce")
        bad = ~np.isfinite(frame[col].astype(float))
        if bad.any():
            _fail(path, f"line {_first_bad_line(bad)}: malformed {col}")
    if time_column is not None:
        frame[time_column] = _parse_time(raw[time_column])
        if frame[time_column].isna().any():
            line = _first_bad_line(frame[time_column].isna())
            _fail(path, f"line {line}: malformed {time_column}")
        frame[time_column] = frame[time_column].astype(np.int64)

    duplicated = frame.duplicated(list(key))
    if duplicated.any():
        _fail(path, f"line {_first_bad_line(duplicated)}: duplicate key {list(key)}")
    order = frame.sort_values(list(key), kind="stable").index.to_numpy()
    unsorted = pd.Series(order != np.arange(len(frame)))
    if unsorted.any():
        _fail(path, f"line {_first_bad_line(unsorted)}: rows not sorted by {list(key)}")
    return frame


def load_panel_csv(path: Path) -> DailyPanel:
    """Load a daily panel CSV.

    :param path: CSV with the daily panel header.
    :return: The panel.
    :raises FormatError: On schema, key, order or value violations.
    """
    frame = read_validated_csv(
        path,
        PANEL_COLUMNS,
        key=(PanelColumn.FIRM, PanelColumn.DATE),
        date_columns=(PanelColumn.DATE,),
        numeric_columns=PANEL_COLUMNS[2:],
    )
    negative = (frame[PanelColumn.RV_DAY] < 0) | (frame[PanelColumn.RV_355] < 0)
    if negative.any():
        _fail(path, f"line {_first_bad_line(negative)}: negative realized variance")
    logger.info(f"Loaded panel. path={path} rows={len(frame)}")
    return DailyPanel(frame)


def load_prints_csv(path: Path) -> pd.DataFrame:
    """Load an intraday prints CSV as a frame sorted by firm, date and time.

    :param path: CSV with the prints header and an optional ``corr`` column.
    :return: Prints with ``time`` in seconds since midnight.
    :raises FormatError: On schema, key, order or value violations.
    """
    frame = read_validated_csv(
        path,
        PRINT_COLUMNS,
        key=(PrintColumn.FIRM, PrintColumn.DATE, PrintColumn.TIME),
        date_columns=(PrintColumn.DATE,),
        numeric_columns=(PrintColumn.PRICE, PrintColumn.SIZE),
        time_column=PrintColumn.TIME,
        optional_columns=(PrintColumn.CORR,),
    )
    cond = frame[PrintColumn.COND]
    frame[PrintColumn.COND] = cond.mask(cond == "")
    if PrintColumn.CORR in frame.columns:
        corr = pd.to_numeric(frame[PrintColumn.CORR], errors="coerce")
        frame[PrintColumn.CORR] = corr.fillna(0)
    logger.info(f"Loaded prints. path={path} rows={len(frame)}")
    return frame


def load_truth_csv(path: Path) -> pd.DataFrame:
    """Load the simulator's true integrated variance file.

    :param path: CSV with ``firm_id,date,true_ivar``.
    :return: The truth frame.
    """
    return read_validated_csv(
        path,
        TRUTH_COLUMNS,
        key=(PanelColumn.FIRM, PanelColumn.DATE),
        date_columns=(PanelColumn.DATE,),
        numeric_columns=(TRUTH_COLUMNS[2],),
    )


def load_ranges_csv(path: Path) -> pd.DataFrame:
    """Load a daily high/low file.

    :param path: CSV with ``firm_id,date,high,low``.
    :return: The ranges frame.
    """
    return read_validated_csv(
        path,
        RANGE_COLUMNS,
        key=(PanelColumn.FIRM, PanelColumn.DATE),
        date_columns=(PanelColumn.DATE,),
        numeric_columns=RANGE_COLUMNS[2:],
    )


def load_quotes_csv(path: Path) -> pd.DataFrame:
    """Load an option quotes CSV.

    :param path: CSV with the option quotes header.
    :return: Quotes with parsed dates and numeric fields.
    """
    frame = read_validated_csv(
        path,
        QUOTE_COLUMNS,
        key=(
            QuoteColumn.FIRM,
            QuoteColumn.DATE,
            QuoteColumn.EXPIRY,
            QuoteColumn.STRIKE,
            QuoteColumn.CP_FLAG,
        ),
        date_columns=(QuoteColumn.DATE, QuoteColumn.EXPIRY),
        numeric_columns=QUOTE_COLUMNS[3:4] + QUOTE_COLUMNS[5:],
    )
    bad_flag = ~frame[QuoteColumn.CP_FLAG].isin(["C", "P"])
    if bad_flag.any():
        _fail(path, f"line {_first_bad_line(bad_flag)}: cp_flag must be C or P")
    logger.info(f"Loaded quotes. path={path} rows={len(frame)}")
    return frame


def _format_dates(frame: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    out = frame.copy()
    for col in columns:
        out[col] = pd.to_datetime(out[col]).dt.strftime(CSV_DATE_FORMAT)
    return out


def write_panel_csv(panel: DailyPanel, path: Path) -> Path:
    """Write a panel in the daily panel CSV schema.

    :param panel: The panel.
    :param path: Destination file.
    :return: The destination path.
    """
    frame = _format_dates(panel.frame, [PanelColumn.DATE])
    return write_frame(frame.loc[:, list(PANEL_COLUMNS)], path)


def write_prints_csv(prints: pd.DataFrame, path: Path) -> Path:
    """Write prints in the prints CSV schema.

    :param prints: Prints with ``time`` in seconds since midnight.
    :param path: Destination file.
    :return: The destination path.
    """
    frame = _format_dates(prints, [PrintColumn.DATE])
    seconds = frame[PrintColumn.TIME].astype(np.int64)
    frame[PrintColumn.TIME] = (
        (seconds // 3600).map("{:02d}".format)
        + ":"
        + (seconds % 3600 // 60).map("{:02d}".format)
        + ":"
        + (seconds % 60).map("{:02d}".format)
    )
    frame[PrintColumn.COND] = frame[PrintColumn.COND].fillna("")
    columns = list(PRINT_COLUMNS)
    if PrintColumn.CORR in frame.columns:
        columns.append(PrintColumn.CORR)
    return write_frame(frame.loc[:, columns], path)


def write_dated_csv(
    frame: pd.DataFrame, path: Path, date_columns: Sequence[str]
) -> Path:
    """Write any frame with ``YYYY-MM-DD`` date columns.

    :param frame: Frame to write.
    :param path: Destination file.
    :param date_columns: Columns to format as dates.
    :return: The destination path.
    """
    return write_frame(_format_dates(frame, date_columns), path)
