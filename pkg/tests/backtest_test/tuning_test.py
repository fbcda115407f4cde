"""Test the time-ordered cross-validation."""

from collections.abc import Sequence

import numpy as np
import pytest

from vol_forecaster.backtest.tuning import CVPolicy, pointwise, tune_hyperparameters
from vol_forecaster.errors import (
    ConfigError,
    InsufficientDataError,
    SingularDesignError,
    TuningError,
)

ROWS = np.arange(60, dtype=float)[:, None]


def _constant_path(X: np.ndarray, y: np.ndarray, grid: Sequence[float]) -> list:
    """Each candidate predicts its own value."""
    return [lambda Xv, c=c: np.full(len(Xv), c) for c in grid]


def test_selects_lowest_validation_loss() -> None:
    """Test that the candidate matching the response wins."""
    selected = tune_hyperparameters(
        ROWS, np.full(60, 2.0), [1.0, 2.0, 3.5], _constant_path
    )
    assert selected == 2.0


def test_ties_go_to_the_larger_candidate() -> None:
    """Test two candidates with equal loss."""
    assert tune_hyperparameters(
        ROWS, np.full(60, 2.0), [1.0, 3.0], _constant_path
    ) == 3.0


def test_qlike_validation() -> None:
    """Test the QLIKE validation loss."""
    policy = CVPolicy(loss="qlike")
    assert tune_hyperparameters(
        ROWS, np.full(60, 2.0), [0.5, 2.0, 8.0], _constant_path, policy
    ) == 2.0


def test_validation_blocks_follow_training_rows() -> None:
    """Test that every validation row is later than every training row."""
    # Arrange
    seen: list[tuple[float, float]] = []

    def path_fit(X: np.ndarray, y: np.ndarray, grid: Sequence[float]) -> list:
        def predictor(Xv: np.ndarray) -> np.ndarray:
            seen.append((float(X.max()), float(Xv.min())))
            return np.zeros(len(Xv))

        return [predictor for _ in grid]

    # Act
    tune_hyperparameters(ROWS, np.zeros(60), [1.0, 2.0], path_fit, CVPolicy(folds=4))

    # Assert
    assert len(seen) == 8
    assert all(last_train < first_valid for last_train, first_valid in seen)


def test_failed_candidate_is_excluded() -> None:
    """Test that a candidate failing on one block cannot win."""

    def fit(X: np.ndarray, y: np.ndarray, candidate: float):
        if candidate == 2.0 and len(y) > 30:
            raise SingularDesignError("collinear")
        return lambda Xv: np.full(len(Xv), candidate)

    assert tune_hyperparameters(
        ROWS, np.full(60, 2.0), [1.0, 2.0, 2.5], pointwise(fit)
    ) == 2.5


def test_all_candidates_failing() -> None:
    """Test that tuning fails when no candidate fits."""

    def fit(X: np.ndarray, y: np.ndarray, candidate: float):
        raise SingularDesignError("collinear")

    with pytest.raises(TuningError):
        tune_hyperparameters(ROWS, np.zeros(60), [1.0, 2.0], pointwise(fit))


def test_single_candidate_skips_validation() -> None:
    """Test a grid of one value."""
    assert tune_hyperparameters(ROWS[:2], np.zeros(2), [0.7], _constant_path) == 0.7


def test_too_few_rows_for_the_folds() -> None:
    """Test a sample smaller than the number of blocks."""
    with pytest.raises(InsufficientDataError):
        tune_hyperparameters(ROWS[:5], np.zeros(5), [1.0, 2.0], _constant_path)


@pytest.mark.parametrize(
    "kwargs", [{"folds": 1}, {"loss": "mae"}, {"grid_size": 0}, {"min_ratio": 1.0}]
)
def test_cv_policy_rejects_bad_values(kwargs: dict) -> None:
    """Test out-of-range cross-validation settings."""
    with pytest.raises(ConfigError):
        CVPolicy(**kwargs)
