"""
Comparison estimators on the transformed normal-means scale: X_i ~ N(xi_i, v_i).
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..errors import DomainError

__all__ = ['NormalMeansData', 'naive', 'group_mean', 'james_stein', 'james_stein_factor',
           'parametric_eb_mm', 'parametric_eb_mm_prior', 'BASELINES']

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NormalMeansData:
    """Observations X_i with known variances v_i = 1/(4 n_i)."""

    values: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        variances = np.broadcast_to(np.asarray(self.variances, dtype=float), values.shape).copy()
        if np.any(variances <= 0):
            raise DomainError("variances must be positive")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'variances', variances)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_arrays(cls, values: Sequence[float], variances: Sequence[float]) -> "NormalMeansData":
        values = np.atleast_1d(np.asarray(values, dtype=float))
        variances = np.atleast_1d(np.asarray(variances, dtype=float))
        if variances.size != 1 and variances.shape != values.shape:
            raise DomainError(f"{len(values)} values but {len(variances)} variances")
        return cls(values, variances)


def naive(data: NormalMeansData) -> np.ndarray:
    """xi_hat_i = X_i."""
    return data.values.copy()


def group_mean(data: NormalMeansData) -> np.ndarray:
    """Every xi_i estimated by the unweighted mean of X."""
    if len(data) == 0:
        raise DomainError("group_mean needs at least one observation")
    return np.full(len(data), data.values.mean())


def james_stein_factor(data: NormalMeansData) -> float:
    """Positive-part shrinkage factor max(0, 1 - (n - 3) v_bar / S)."""
    n = len(data)
    if n < 4:
        raise DomainError(f"james_stein needs at least 4 observations, got {n}")
    spread = float(((data.values - data.values.mean()) ** 2).sum())
    if spread == 0.0:
        return 0.0
    return max(0.0, 1.0 - (n - 3) * float(data.variances.mean()) / spread)


def james_stein(data: NormalMeansData) -> np.ndarray:
    """Positive-part James-Stein estimator shrinking toward the grand mean."""
    factor = james_stein_factor(data)
    center = data.values.mean()
    logger.debug(f"James-Stein factor {factor:.4f}")
    return center + factor * (data.values - center)


def parametric_eb_mm_prior(data: NormalMeansData) -> Tuple[float, float]:
    """
    Method-of-moments fit of xi_i ~ N(mu, tau^2).

    Returns:
        (mu_hat, tau2_hat) with mu_hat = mean X and tau2_hat = max(0, s^2 - v_bar).
    """
    if len(data) < 2:
        raise DomainError(f"parametric_eb_mm needs at least 2 observations, got {len(data)}")
    mu = float(data.values.mean())
    tau2 = max(0.0, float(data.values.var(ddof=1)) - float(data.variances.mean()))
    return mu, tau2


def parametric_eb_mm(data: NormalMeansData) -> np.ndarray:
    """Posterior means (tau2 X_i + v_i mu) / (tau2 + v_i) under the moment-fitted prior."""
    mu, tau2 = parametric_eb_mm_prior(data)
    return (tau2 * data.values + data.variances * mu) / (tau2 + data.variances)


BASELINES = {
    'naive': naive,
    'group_mean': group_mean,
    'james_stein': james_stein,
    'parametric_eb_mm': parametric_eb_mm,
}
