"""Test the Math utils module."""

import numpy as np
import pytest

from vol_forecaster.definitions import VARIANCE_FLOOR
from vol_forecaster.math_utils import (
    floor_variance,
    soft_threshold,
    symmetrize_matrix,
    trailing_mean,
)


@pytest.mark.parametrize(
    "matrix, expected",
    [
        # asymmetrical square matrix -> symmetrized
        (
            np.array([[1.0, 2.0], [3.0, 4.0]]),
            np.array([[1.0, 2.5], [2.5, 4.0]]),
        ),
        # already symmetric remains unchanged
        (
            np.array([[1.0, 2.0], [2.0, 1.0]]),
            np.array([[1.0, 2.0], [2.0, 1.0]]),
        ),
    ],
)
def test_symmetrize_matrix_valid(matrix: np.ndarray, expected: np.ndarray) -> None:
    """Test ``symmetrize_matrix`` with valid square matrices.

    :param matrix: Input square matrix.
    :param expected: Expected symmetrized matrix.
    :return: None
    """
    np.testing.assert_allclose(symmetrize_matrix(matrix), expected)


def test_symmetrize_matrix_non_square_raises() -> None:
    """Test that ``symmetrize_matrix`` raises ``ValueError`` for non-square matrices.

    :return: None
    """
    with pytest.raises(ValueError):
        symmetrize_matrix(np.array([[1, 2, 3], [4, 5, 6]]))


@pytest.mark.parametrize(
    "rho, alpha, expected",
    [
        # shrunk toward zero from either side
        (3.0, 1.0, 2.0),
        (-3.0, 1.0, -2.0),
        # inside the threshold
        (0.5, 1.0, 0.0),
        (-1.0, 1.0, 0.0),
        # no shrinkage
        (0.25, 0.0, 0.25),
    ],
)
def test_soft_threshold(rho: float, alpha: float, expected: float) -> None:
    """Test the soft-threshold operator.

    :param rho: Value to shrink.
    :param alpha: Threshold.
    :param expected: Expected shrunk value.
    :return: None
    """
    assert soft_threshold(rho, alpha) == expected


def test_trailing_mean() -> None:
    """Test a 1-D and a 2-D trailing mean.

    :return: None
    """
    # Arrange
    values = np.array([1.0, 2.0, 3.0, 4.0])

    # Act
    single = trailing_mean(values, 2)
    stacked = trailing_mean(np.column_stack([values, 10 * values]), 3)

    # Assert
    np.testing.assert_allclose(single, [np.nan, 1.5, 2.5, 3.5])
    np.testing.assert_allclose(stacked[2:], [[2.0, 20.0], [3.0, 30.0]])
    assert np.isnan(stacked[:2]).all()


def test_trailing_mean_short_and_invalid() -> None:
    """Test a series shorter than the window and a zero window.

    :return: None
    """
    assert np.isnan(trailing_mean(np.ones(3), 5)).all()
    with pytest.raises(ValueError):
        trailing_mean(np.ones(3), 0)


def test_floor_variance() -> None:
    """Test clamping scalars and arrays at the variance floor.

    :return: None
    """
    assert floor_variance(-1.0) == VARIANCE_FLOOR
    assert floor_variance(2e-4) == 2e-4
    np.testing.assert_array_equal(
        floor_variance(np.array([0.0, 1e-3])), [VARIANCE_FLOOR, 1e-3]
    )
