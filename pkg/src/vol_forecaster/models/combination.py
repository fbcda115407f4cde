"""Equal-weight and egalitarian LASSO forecast combinations."""

from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from vol_forecaster.errors import ConfigError, InsufficientDataError
from vol_forecaster.models.regression import PenaltySpec, fit_penalized


def average_forecasts(forecasts: Iterable[float | None]) -> float:
    """Arithmetic mean of the available member forecasts.

    :param forecasts: Member forecasts; None or NaN marks a failed member.
    :return: The mean.
    :raises InsufficientDataError: If no member is available.
    """
    values = np.array([np.nan if f is None else f for f in forecasts], dtype=float)
    available = values[np.isfinite(values)]
    if available.size == 0:
        msg = "No member forecast available to average."
        logger.error(msg)
        raise InsufficientDataError(msg)
    return float(np.mean(available))


@dataclass(frozen=True)
class CombinationWeights:
    """Member weights of a combination fit."""

    weights: NDArray
    degenerate: bool = False
    survivors: list[int] = field(default_factory=list)
    lam: float = 0.0

    def combine(self, member_forecasts: NDArray) -> NDArray:
        """Weighted sum of member forecasts.

        :param member_forecasts: ``K`` forecasts or a ``T x K`` matrix.
        :return: Combined forecasts.
        """
        return np.asarray(member_forecasts, dtype=float) @ self.weights


def _deviation_weights(history: NDArray, realized: NDArray, lam: float) -> NDArray:
    n_members = history.shape[1]
    target = realized - history.mean(axis=1)
    fit = fit_penalized(
        history, target, PenaltySpec(lambda_l1=lam), fit_intercept=False
    )
    return 1.0 / n_members + fit.dense


def egalitarian_combine(
    member_forecast_history: NDArray,
    realized: NDArray,
    lam: float,
    partial: bool = False,
) -> CombinationWeights:
    """Fit combination weights shrunk toward equal weighting.

    The LASSO, without intercept, regresses the realized values minus the
    equal-weight forecast on the member forecasts; the weights are ``1/K``
    plus those coefficients. The partial variant first keeps only the members
    an ordinary LASSO with the same penalty selects.

    :param member_forecast_history: ``T x K`` past member forecasts.
    :param realized: Length ``T`` realized values.
    :param lam: Non-negative l1 penalty.
    :param partial: Select members before shrinking toward equality.
    :return: The weights; equal weights flagged ``degenerate`` when every
        member is identical or the selection step keeps none.
    :raises ConfigError: If the shapes disagree or ``lam`` is negative.
    """
    history = np.atleast_2d(np.asarray(member_forecast_history, dtype=float))
    realized = np.asarray(realized, dtype=float).ravel()
    n_rows, n_members = history.shape
    if n_rows != realized.size or lam < 0:
        msg = (
            f"Bad combination inputs. rows={n_rows} realized={realized.size} lam={lam}"
        )
        logger.error(msg)
        raise ConfigError(msg)

    equal = CombinationWeights(
        weights=np.full(n_members, 1.0 / n_members),
        degenerate=True,
        survivors=list(range(n_members)),
        lam=lam,
    )
    if np.allclose(history, history[:, :1]):
        logger.warning(
            f"Members are identical, using equal weights. members={n_members}"
        )
        return equal

    survivors = list(range(n_members))
    if partial:
        selection = fit_penalized(
            history, realized, PenaltySpec(lambda_l1=lam), fit_intercept=False
        )
        survivors = [j for j in range(n_members) if selection.dense[j] != 0]
        if not survivors:
            logger.warning(
                f"Selection kept no member, using equal weights. lam={lam:.3e}"
            )
            return equal

    weights = np.zeros(n_members)
    weights[survivors] = _deviation_weights(history[:, survivors], realized, lam)
    return CombinationWeights(
        weights=weights, degenerate=False, survivors=survivors, lam=lam
    )
