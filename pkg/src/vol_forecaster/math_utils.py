"""Math utilities shared by the forecasters."""

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from vol_forecaster.definitions import VARIANCE_FLOOR


def symmetrize_matrix(matrix: NDArray) -> NDArray:
    """Symmetrize a matrix.

    :param matrix: A square matrix represented as a numpy array.
    :return: A symmetrized matrix.
    :raises ValueError: If the input matrix is not square.
    """
    if np.shape(matrix)[0] != np.shape(matrix)[1]:
        dim = matrix.shape
        msg = f"Input matrix must be square. Matrix has dimensions: {dim[0]}x{dim[1]}."
        logger.error(msg)
        raise ValueError(msg)

    return (matrix + matrix.T) / 2


def soft_threshold(rho: float, alpha: float) -> float:
    """Shrink ``rho`` toward zero by ``alpha``.

    :param rho: Value to shrink.
    :param alpha: Non-negative threshold.
    :return: ``sign(rho) * max(|rho| - alpha, 0)``.
    """
    if rho < -alpha:
        return rho + alpha
    if rho > alpha:
        return rho - alpha
    return 0.0


def trailing_mean(values: NDArray, window: int) -> NDArray:
    """Trailing arithmetic mean along the first axis.

    Rows without a full window are NaN.

    :param values: 1-D or 2-D array ordered in time along axis 0.
    :param window: Window length.
    :return: Array of the same shape.
    :raises ValueError: If the window is not positive.
    """
    if window < 1:
        msg = f"Window must be positive, got {window}."
        logger.error(msg)
        raise ValueError(msg)

    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, np.nan)
    if values.shape[0] < window:
        return out
    windows = np.lib.stride_tricks.sliding_window_view(values, window, axis=0)
    out[window - 1 :] = windows.mean(axis=-1)
    return out


def floor_variance(value: float | NDArray) -> float | NDArray:
    """Clamp variance forecasts at the variance floor.

    :param value: Scalar or array of variances.
    :return: Clamped value of the same kind.
    """
    if np.ndim(value) == 0:
        return max(float(value), VARIANCE_FLOOR)
    return np.maximum(value, VARIANCE_FLOOR)
