"""Configure the logger and shared file helpers."""

import configparser
import sys
from collections.abc import Mapping
from datetime import datetime
from pathlib import Path

import pandas as pd
from loguru import logger

from vol_forecaster.definitions import (
    DATE_FORMAT,
    DEFAULT_LOG_FILENAME,
    DEFAULT_LOG_LEVEL,
    ENCODING,
    LOG_DIR,
)
from vol_forecaster.errors import ConfigError

CONFIG_SECTION = "run"


def create_timestamped_filepath(suffix: str, output_dir: Path, prefix: str) -> Path:
    """Generate a timestamped filename.

    :param suffix: Suffix to append to the timestamped filename.
    :param output_dir: Output directory.
    :param prefix: Prefix to append to the timestamped filename.
    :return: Path to the timestamped filename.
    """
    timestamp = datetime.now().strftime(DATE_FORMAT)
    filepath = output_dir / f"{prefix}_{timestamp}.{suffix}"
    filepath.parent.mkdir(parents=True, exist_ok=True)
    filepath.touch(exist_ok=True)
    return filepath


def setup_logger(
    filename: str = DEFAULT_LOG_FILENAME,
    stderr_level: str = DEFAULT_LOG_LEVEL,
    log_level: str = DEFAULT_LOG_LEVEL,
    log_dir: Path | None = None,
) -> Path:
    """Configure the logger.

    :param filename: Name of the file to create.
    :param stderr_level: Logging level to use.
    :param log_level: Logging level to use.
    :param log_dir: Logging directory to use.
    :return: Path to the created logfile.
    """
    logger.remove()

    if log_dir is None:
        log_filepath = LOG_DIR
    else:
        log_filepath = log_dir
    filepath_with_time = create_timestamped_filepath(
        output_dir=log_filepath, prefix=filename, suffix="log"
    )
    logger.add(sys.stderr, level=stderr_level)
    logger.add(filepath_with_time, level=log_level, encoding=ENCODING, enqueue=True)
    logger.info(f"Logging to '{filepath_with_time}'.")
    return filepath_with_time


def read_key_value_config(path: Path) -> dict[str, str]:
    """Read a plain-text ``key = value`` config file.

    Blank lines and lines starting with ``#`` are ignored.

    :param path: Config file path.
    :return: Mapping of keys to raw string values.
    :raises ConfigError: If the file is missing or not key-value text.
    """
    if not path.exists():
        msg = f"Config file not found: {path}"
        logger.error(msg)
        raise ConfigError(msg)

    parser = configparser.ConfigParser(interpolation=None)
    text = path.read_text(encoding=ENCODING)
    try:
        parser.read_string(f"[{CONFIG_SECTION}]\n{text}")
    except configparser.Error as err:
        msg = f"Malformed config file {path}: {err}"
        logger.error(msg)
        raise ConfigError(msg) from err
    return dict(parser[CONFIG_SECTION])


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    """Write a frame as CSV with full float precision.

    :param frame: Frame to write; its index is not written.
    :param path: Destination file.
    :return: The destination path.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.debug(f"Wrote CSV. path={path} rows={len(frame)}")
    return path


def write_manifest(path: Path, entries: Mapping[str, object]) -> Path:
    """Write a run manifest of ``key=value`` lines in insertion order.

    :param path: Destination file.
    :param entries: Manifest entries.
    :return: The destination path.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={value}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding=ENCODING)
    return path
