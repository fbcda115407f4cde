"""Time-ordered cross-validation of regularization strength."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from sklearn.model_selection import TimeSeriesSplit

from vol_forecaster.definitions import (
    CV_FOLDS,
    LAMBDA_GRID_SIZE,
    LAMBDA_MIN_RATIO,
    LossKind,
)
from vol_forecaster.errors import (
    MODEL_FAILURES,
    ConfigError,
    InsufficientDataError,
    TuningError,
)
from vol_forecaster.evaluation.losses import forecast_loss
from vol_forecaster.math_utils import floor_variance

Predictor = Callable[[NDArray], NDArray]
# fits every candidate on one block; a failed candidate comes back as its exception
PathFit = Callable[[NDArray, NDArray, Sequence[float]], list[Predictor | Exception]]

VALIDATION_LOSSES = {"mse": LossKind.MSE, "qlike": LossKind.QLIKE}


@dataclass(frozen=True)
class CVPolicy:
    """Cross-validation settings shared by the penalized models."""

    folds: int = CV_FOLDS
    loss: str = "mse"
    grid_size: int = LAMBDA_GRID_SIZE
    min_ratio: float = LAMBDA_MIN_RATIO

    def __post_init__(self) -> None:
        """Validate the policy.

        :raises ConfigError: If a field is out of range.
        """
        if self.folds < 2:
            msg = f"CV needs at least 2 folds, got {self.folds}."
            logger.error(msg)
            raise ConfigError(msg)
        if self.loss not in VALIDATION_LOSSES:
            msg = (
                f"Unknown validation loss '{self.loss}', expected one of "
                f"{sorted(VALIDATION_LOSSES)}."
            )
            logger.error(msg)
            raise ConfigError(msg)
        if self.grid_size < 1 or not 0 < self.min_ratio < 1:
            msg = f"Bad lambda grid: size={self.grid_size} min_ratio={self.min_ratio}."
            logger.error(msg)
            raise ConfigError(msg)


def pointwise(fit: Callable[[NDArray, NDArray, float], Predictor]) -> PathFit:
    """Turn a single-candidate fit into a ``PathFit``.

    :param fit: Fits one candidate and returns its predictor.
    :return: A path fit calling ``fit`` once per candidate.
    """

    def path_fit(
        X: NDArray, y: NDArray, grid: Sequence[float]
    ) -> list[Predictor | Exception]:
        out: list[Predictor | Exception] = []
        for candidate in grid:
            try:
                out.append(fit(X, y, candidate))
            except MODEL_FAILURES as err:
                out.append(err)
        return out

    return path_fit


def tune_hyperparameters(
    X: NDArray,
    y: NDArray,
    grid: Sequence[float],
    path_fit: PathFit,
    policy: CVPolicy | None = None,
) -> float:
    """Pick the candidate with the lowest mean validation loss.

    Validation blocks are contiguous and always later than the rows the
    candidate was fit on. A candidate that fails on any fold is out. Ties go
    to the larger candidate.

    :param X: Training predictors in time order.
    :param y: Training responses.
    :param grid: Candidate values.
    :param path_fit: Fits all candidates on a block.
    :param policy: Fold count and validation loss.
    :return: The selected candidate.
    :raises InsufficientDataError: If there are too few rows for the folds.
    :raises TuningError: If every candidate fails.
    """
    policy = policy or CVPolicy()
    grid = list(grid)
    if len(grid) == 1:
        return grid[0]

    n_rows = len(y)
    if n_rows < policy.folds + 1:
        msg = f"{n_rows} rows cannot hold {policy.folds} validation blocks."
        logger.error(msg)
        raise InsufficientDataError(msg)

    kind = VALIDATION_LOSSES[policy.loss]
    scores = np.zeros(len(grid))
    for train_idx, valid_idx in TimeSeriesSplit(n_splits=policy.folds).split(X):
        predictors = path_fit(X[train_idx], y[train_idx], grid)
        for c, predictor in enumerate(predictors):
            if isinstance(predictor, Exception) or not np.isfinite(scores[c]):
                scores[c] = np.inf
                continue
            yhat = np.asarray(predictor(X[valid_idx]), dtype=float)
            if kind == LossKind.QLIKE:
                yhat = floor_variance(yhat)
            scores[c] += float(np.mean(forecast_loss(y[valid_idx], yhat, kind)))

    if not np.isfinite(scores).any():
        msg = f"All {len(grid)} candidates failed during tuning."
        logger.error(msg)
        raise TuningError(msg)

    best = scores.min()
    selected = max(g for g, s in zip(grid, scores, strict=True) if s == best)
    logger.debug(
        f"Tuned hyperparameter. selected={selected:.4e} score={best / policy.folds:.4e}"
    )
    return selected
