"""
pcortest partial correlation - sample partial correlation and the t baseline

    r = sum(e_y * e_z) / sqrt(sum(e_y^2) * sum(e_z^2))

The residuals are used as given. Centering, when wanted, is done by
whoever produced them.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from inference.errors import DegenerateDataError, DomainError
from inference.smoothing.spline_smoother import ResidualPair
from inference.types import Alternative, Estimator


@dataclass(frozen=True)
class PartialCorrResult:
    r_hat: float
    n: int
    method: Estimator = Estimator.SPLINE


@dataclass(frozen=True)
class TStatistic:
    """sqrt(df) * r / sqrt(1 - r^2) with df = n - 2 - d"""
    value: float
    df: int

    def p_value(self, alternative: Alternative = Alternative.TWO_SIDED) -> float:
        """p-value from the t reference distribution (normal linear model)"""
        alternative = Alternative.parse(alternative)
        if alternative is Alternative.GREATER:
            return float(stats.t.sf(self.value, self.df))
        if alternative is Alternative.LESS:
            return float(stats.t.cdf(self.value, self.df))
        return float(min(1.0, 2.0 * stats.t.sf(abs(self.value), self.df)))


def sums_of_squares(eps_y: np.ndarray, eps_z: np.ndarray):
    ss_y = float(np.dot(eps_y, eps_y))
    ss_z = float(np.dot(eps_z, eps_z))
    if ss_y == 0.0:
        raise DegenerateDataError("residuals of y are identically zero")
    if ss_z == 0.0:
        raise DegenerateDataError("residuals of z are identically zero")
    return ss_y, ss_z


def partial_correlation(res: ResidualPair) -> PartialCorrResult:
    """Sample partial correlation of a residual pair"""
    if res.n < 3:
        raise DomainError(f"partial correlation needs n >= 3, got {res.n}")
    ss_y, ss_z = sums_of_squares(res.eps_y_hat, res.eps_z_hat)
    r = float(np.dot(res.eps_y_hat, res.eps_z_hat)) / math.sqrt(ss_y * ss_z)
    return PartialCorrResult(r_hat=min(1.0, max(-1.0, r)), n=res.n, method=res.method)


def t_statistic(r_hat: float, n: int, d: int = 1) -> TStatistic:
    """t statistic of a partial correlation after conditioning on d regressors"""
    df = n - 2 - d
    if d < 0:
        raise DomainError(f"d must be non-negative, got {d}")
    if df < 1:
        raise DomainError(f"need n - 2 - d >= 1, got n={n}, d={d}")
    if not abs(r_hat) < 1.0:
        raise DomainError(f"|r| must be below 1 for a finite t statistic, got {r_hat}")
    return TStatistic(value=math.sqrt(df) * r_hat / math.sqrt(1.0 - r_hat ** 2), df=df)
