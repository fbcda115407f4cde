"""Command-line front end of the forecasting pipeline."""

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from loguru import logger

from vol_forecaster.app import Command, PipelineRunner, RunConfig
from vol_forecaster.definitions import DEFAULT_LOG_LEVEL, LogLevel, ModelName, VRPForm
from vol_forecaster.errors import ConfigError, UsageError
from vol_forecaster.utils import read_key_value_config, setup_logger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# command-line flag -> run config field
FLAG_FIELDS: dict[str, str] = {
    "out_dir": "out_dir",
    "seed": "seed",
    "firms": "n_firms",
    "days": "n_days",
    "window": "window_w",
    "models": "models",
    "n_factors": "n_factors",
    "cv_folds": "cv_folds",
    "n_jobs": "n_jobs",
    "aggregation": "aggregation",
    "vrp_form": "vrp_form",
    "n_bins": "n_bins",
    "rf_daily": "rf_daily",
    "sort_model": "sort_model",
    "panel": "panel",
    "prints": "prints",
    "ranges": "ranges",
    "quotes": "quotes",
    "truth": "truth",
    "forecasts": "forecasts",
    "straddles": "straddles",
}


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--config", type=Path, help="Plain-text key = value config file."
    )
    parent.add_argument("--out-dir", type=str, help="Directory for all stage outputs.")
    parent.add_argument(
        "--log-level",
        "-l",
        default=DEFAULT_LOG_LEVEL,
        choices=list(LogLevel()),
        help="Set the log level.",
        type=str,
    )
    parent.add_argument(
        "--stderr-level",
        "-s",
        default=DEFAULT_LOG_LEVEL,
        choices=list(LogLevel()),
        help="Set the std err level.",
        type=str,
    )
    return parent


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subparser per pipeline stage.

    :return: The parser.
    """
    parent = _common_options()
    parser = argparse.ArgumentParser(
        prog="vol-forecaster",
        description=(
            "Forecast realized variance, backtest the forecasts and sort straddles."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser(
        Command.simulate, parents=[parent], help="Simulate a synthetic panel."
    )
    simulate.add_argument("--seed", type=str, help="Random seed.")
    simulate.add_argument("--firms", type=str, help="Number of firms.")
    simulate.add_argument("--days", type=str, help="Number of trading days.")

    compute_rv = sub.add_parser(
        Command.compute_rv, parents=[parent], help="Build the daily panel from prints."
    )
    compute_rv.add_argument("--prints", type=str, help="Prints CSV.")
    compute_rv.add_argument("--ranges", type=str, help="Optional daily high/low CSV.")

    backtest = sub.add_parser(
        Command.backtest, parents=[parent], help="Run the walk-forward backtest."
    )
    backtest.add_argument("--panel", type=str, help="Daily panel CSV.")
    backtest.add_argument(
        "--models",
        type=str,
        help=f"Comma-separated models out of {','.join(ModelName())}.",
    )
    backtest.add_argument(
        "--window", type=str, help="Estimation window in trading days."
    )
    backtest.add_argument("--n-factors", type=str, help="Number of PCA factors.")
    backtest.add_argument("--cv-folds", type=str, help="Cross-validation folds.")
    backtest.add_argument(
        "--n-jobs", type=str, help="Worker threads for the member models."
    )

    evaluate = sub.add_parser(
        Command.evaluate, parents=[parent], help="Score the forecasts."
    )
    evaluate.add_argument("--panel", type=str, help="Daily panel CSV.")
    evaluate.add_argument("--forecasts", type=str, help="Forecast CSV.")
    evaluate.add_argument("--truth", type=str, help="True integrated variance CSV.")
    evaluate.add_argument(
        "--aggregation", type=str, help="Comma-separated aggregation schemes."
    )

    straddles = sub.add_parser(
        Command.straddles, parents=[parent], help="Form daily straddles."
    )
    straddles.add_argument("--quotes", type=str, help="Option quotes CSV.")
    straddles.add_argument("--rf-daily", type=str, help="Flat daily risk-free rate.")

    sorting_stages = (
        (Command.sort, "Sort straddles on the VRP signal."),
        (Command.report, "Write summary tables."),
    )
    for name, text in sorting_stages:
        stage = sub.add_parser(name, parents=[parent], help=text)
        stage.add_argument("--straddles", type=str, help="Straddles CSV.")
        stage.add_argument("--forecasts", type=str, help="Forecast CSV.")
        stage.add_argument(
            "--sort-model", type=str, help="Model whose forecast feeds the signal."
        )
        stage.add_argument(
            "--vrp-form",
            type=str,
            choices=[f.value for f in VRPForm],
            help="Signal form.",
        )
        if name == Command.sort:
            stage.add_argument("--n-bins", type=str, help="Number of portfolios.")
        else:
            stage.add_argument("--panel", type=str, help="Daily panel CSV.")
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge the optional config file with the command-line flags.

    :param args: Parsed arguments.
    :return: The validated config.
    :raises ConfigError: If the config file or a value is invalid.
    :raises UsageError: If the command or a model is unknown.
    """
    raw = read_key_value_config(args.config) if args.config is not None else {}
    for flag, name in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            raw[name] = value
    return RunConfig.from_sources(args.command, raw)


def execute_command(argv: Sequence[str]) -> int:
    """Parse ``argv``, run the stage and map failures to an exit status.

    :param argv: Arguments without the program name.
    :return: 0 on success, 2 on usage or config errors, 1 on stage failures.
    """
    try:
        args = build_parser().parse_args(list(argv))
    except SystemExit as err:
        return EXIT_OK if err.code == 0 else EXIT_USAGE

    try:
        config = load_run_config(args)
    except (UsageError, ConfigError) as err:
        logger.error(f"Invalid usage. command={args.command} reason={err}")
        return EXIT_USAGE

    setup_logger(
        filename=f"vol_forecaster_{config.command}",
        stderr_level=args.stderr_level,
        log_level=args.log_level,
        log_dir=config.out_dir / "logs",
    )
    try:
        PipelineRunner(config).run()
    except (ValueError, RuntimeError, OSError) as err:
        logger.error(
            f"Command failed. command={config.command} reason={type(err).__name__}: "
            f"{err}"
        )
        return EXIT_FAILURE
    return EXIT_OK


def run() -> None:  # pragma: no cover
    """Console script entry point."""
    sys.exit(execute_command(sys.argv[1:]))
