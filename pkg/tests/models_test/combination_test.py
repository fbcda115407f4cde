"""Test the forecast combinations."""

import math

import numpy as np
import pytest

from vol_forecaster.errors import ConfigError, InsufficientDataError
from vol_forecaster.models.combination import (
    CombinationWeights,
    average_forecasts,
    egalitarian_combine,
)


def _members(n_rows: int = 250, n_members: int = 3, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return 4e-4 * np.exp(0.3 * rng.standard_normal((n_rows, n_members)))


@pytest.mark.parametrize(
    ("forecasts", "expected"),
    [([1.0, 3.0], 2.0), ([1.0, None, 3.0], 2.0), ([2.0, math.nan], 2.0)],
)
def test_average_forecasts(forecasts: list, expected: float) -> None:
    """Test the mean over the available members."""
    assert average_forecasts(forecasts) == expected


def test_average_needs_a_member() -> None:
    """Test a set where every member failed."""
    with pytest.raises(InsufficientDataError):
        average_forecasts([None, math.nan])


def test_unpenalized_weights_solve_least_squares() -> None:
    """Test that a zero penalty recovers the exact mixing weights."""
    # Arrange
    history = _members()
    realized = history @ np.array([0.7, 0.3, 0.0])

    # Act
    weights = egalitarian_combine(history, realized, lam=0.0)

    # Assert
    np.testing.assert_allclose(weights.weights, [0.7, 0.3, 0.0], atol=1e-4)
    assert not weights.degenerate
    np.testing.assert_allclose(weights.combine(history[:5]), realized[:5], rtol=1e-3)


def test_large_penalty_gives_equal_weights() -> None:
    """Test that a penalty killing every deviation leaves 1/K weights."""
    history = _members()
    realized = history @ np.array([0.7, 0.3, 0.0])
    weights = egalitarian_combine(history, realized, lam=1e6)
    np.testing.assert_allclose(weights.weights, np.full(3, 1.0 / 3.0))
    assert not weights.degenerate


def test_identical_members_are_degenerate() -> None:
    """Test members that always agree."""
    column = _members(n_members=1)
    weights = egalitarian_combine(np.repeat(column, 3, axis=1), column.ravel(), lam=0.1)
    assert weights.degenerate
    np.testing.assert_allclose(weights.weights, np.full(3, 1.0 / 3.0))


def test_partial_selection_drops_members() -> None:
    """Test that members outside the selected set get zero weight."""
    # Arrange
    history = _members(n_members=4)
    realized = history @ np.array([0.6, 0.4, 0.0, 0.0])
    lam = 0.05 * float(
        np.max(np.abs(2.0 * history.T @ realized)) / np.sqrt(np.mean(history**2))
    )

    # Act
    weights = egalitarian_combine(history, realized, lam=lam, partial=True)

    # Assert
    dropped = [j for j in range(4) if j not in weights.survivors]
    assert weights.survivors
    assert all(weights.weights[j] == 0.0 for j in dropped)


def test_partial_selection_keeping_nothing_is_degenerate() -> None:
    """Test a penalty so large that selection keeps no member."""
    history = _members()
    weights = egalitarian_combine(history, history.mean(axis=1), lam=1e6, partial=True)
    assert weights.degenerate
    assert weights.survivors == [0, 1, 2]


def test_combination_rejects_bad_inputs() -> None:
    """Test mismatched shapes and a negative penalty."""
    history = _members()
    with pytest.raises(ConfigError):
        egalitarian_combine(history, history[:-1, 0], lam=0.1)
    with pytest.raises(ConfigError):
        egalitarian_combine(history, history[:, 0], lam=-0.1)


def test_combine_matrix_and_vector() -> None:
    """Test the weighted sum for one row and for a matrix."""
    weights = CombinationWeights(weights=np.array([0.25, 0.75]))
    assert weights.combine(np.array([4.0, 8.0])) == pytest.approx(7.0)
    np.testing.assert_allclose(
        weights.combine(np.array([[4.0, 8.0], [0.0, 4.0]])), [7.0, 3.0]
    )
