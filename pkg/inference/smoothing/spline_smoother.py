"""
pcortest spline smoother - integrated Wiener posterior means at the data

With H^2 the unit-scale integrated Wiener covariance of the design, the
fitted values are

    g_hat = H^2 (H^2 + lambda^2 I)^{-1} (y - mean(y)) + mean(y)

which is the cubic smoothing spline evaluated at the design points. The
linear system is solved through a Cholesky factorisation, never by
inversion. Ordinary least squares is provided as the linear baseline.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from inference.errors import DegenerateDataError, DomainError, InterpolationInfeasibleError
from inference.types import Dataset, Estimator, as_vector
from inference.wiener.wiener_sim import DesignPoints, diagonal_jitter, unit_kernel_matrix

logger = logging.getLogger(__name__)

Abscissae = Union[DesignPoints, np.ndarray]


@dataclass(frozen=True)
class SmootherConfig:
    """Estimated curve scale and noise level for one response"""
    sigma0_hat: float = 1.0
    sigma_eps_hat: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma0_hat) and self.sigma0_hat > 0):
            raise DomainError(f"sigma0_hat must be positive, got {self.sigma0_hat}")
        if not (math.isfinite(self.sigma_eps_hat) and self.sigma_eps_hat >= 0):
            raise DomainError(f"sigma_eps_hat must be non-negative, got {self.sigma_eps_hat}")

    @property
    def lambda_hat(self) -> float:
        return self.sigma_eps_hat / self.sigma0_hat

    @classmethod
    def from_lambda(cls, lam: float) -> 'SmootherConfig':
        """Config with sigma0_hat = 1, so lambda_hat == lam"""
        return cls(sigma0_hat=1.0, sigma_eps_hat=lam)


@dataclass(frozen=True, eq=False)
class ResidualPair:
    """Estimated errors and (centered) fitted curves for y and z

    eps_y_hat + fitted_g equals the centered y, likewise for z.
    """
    eps_y_hat: np.ndarray
    eps_z_hat: np.ndarray
    fitted_g: np.ndarray
    fitted_h: np.ndarray
    method: Estimator = Estimator.SPLINE

    def __post_init__(self):
        eps_y = as_vector(self.eps_y_hat, "eps_y_hat")
        eps_z = as_vector(self.eps_z_hat, "eps_z_hat")
        if len(eps_y) != len(eps_z):
            raise DomainError(f"residual vectors differ in length: {len(eps_y)} vs {len(eps_z)}")
        object.__setattr__(self, "eps_y_hat", eps_y)
        object.__setattr__(self, "eps_z_hat", eps_z)

    @property
    def n(self) -> int:
        return len(self.eps_y_hat)

    @classmethod
    def from_errors(cls, eps_y, eps_z, method: Estimator = Estimator.ORACLE) -> 'ResidualPair':
        """Pair built directly from error vectors, with zero fitted curves"""
        eps_y = as_vector(eps_y, "eps_y")
        eps_z = as_vector(eps_z, "eps_z")
        return cls(eps_y, eps_z, np.zeros_like(eps_y), np.zeros_like(eps_z), method)

    def centered(self) -> 'ResidualPair':
        """Same pair with mean-zero errors; the means move into the fits"""
        mean_y = self.eps_y_hat.mean()
        mean_z = self.eps_z_hat.mean()
        return ResidualPair(
            self.eps_y_hat - mean_y,
            self.eps_z_hat - mean_z,
            self.fitted_g + mean_y,
            self.fitted_h + mean_z,
            self.method,
        )


def _abscissae(x: Abscissae, span: float = 1.0) -> Tuple[np.ndarray, float]:
    if isinstance(x, DesignPoints):
        return x.x, x.span
    if not (math.isfinite(span) and span > 0):
        raise DomainError(f"span must be positive, got {span}")
    return as_vector(x, "x"), span


class SplineOperator:
    """Factorised smoother for one design and one lambda

    Built once, then only read, so it can be shared across replications
    and threads.
    """

    def __init__(self, x: Abscissae, lambda_hat: float, span: float = 1.0):
        if not (math.isfinite(lambda_hat) and lambda_hat >= 0):
            raise DomainError(f"lambda_hat must be non-negative, got {lambda_hat}")
        values, span = _abscissae(x, span)
        self.lambda_hat = lambda_hat
        self.kernel = span ** 3 * unit_kernel_matrix(values)
        self.identity = False
        self.jitter = 0.0

        n = len(values)
        if lambda_hat == 0.0:
            # Full-rank kernel: interpolation reproduces y exactly
            try:
                linalg.cholesky(self.kernel, lower=True, check_finite=False)
                self.identity = True
                self.factor = None
                return
            except linalg.LinAlgError:
                self.jitter = diagonal_jitter(self.kernel)
                logger.debug("kernel rank-deficient, interpolating with jitter %.3e", self.jitter)
            system = self.kernel + self.jitter * np.eye(n)
        else:
            system = self.kernel + lambda_hat ** 2 * np.eye(n)

        try:
            self.factor = linalg.cho_factor(system, lower=True, check_finite=False)
        except linalg.LinAlgError as e:
            raise InterpolationInfeasibleError(f"interpolation infeasible: {e}")

    @property
    def n(self) -> int:
        return self.kernel.shape[0]

    def smooth_centered(self, centered: np.ndarray) -> np.ndarray:
        """Apply H^2 (H^2 + lambda^2 I)^{-1} to an already centered vector"""
        if len(centered) != self.n:
            raise DomainError(f"expected {self.n} values, got {len(centered)}")
        if self.identity:
            return centered.copy()
        return self.kernel @ linalg.cho_solve(self.factor, centered, check_finite=False)

    def fit(self, y: np.ndarray) -> np.ndarray:
        y = as_vector(y, "y")
        if self.identity:
            return y.copy()
        mean = y.mean()
        return self.smooth_centered(y - mean) + mean

    def matrix(self) -> np.ndarray:
        """Explicit smoothing matrix S; only meant for small n"""
        return np.column_stack([self.smooth_centered(col) for col in np.eye(self.n)])


class OperatorCache:
    """Smoothing operators keyed on (design, lambda)"""

    def __init__(self):
        self._operators: Dict[Tuple, SplineOperator] = {}

    def get(self, x: Abscissae, lambda_hat: float, span: float = 1.0) -> SplineOperator:
        values, span = _abscissae(x, span)
        key = (values.tobytes(), span, lambda_hat)
        operator = self._operators.get(key)
        if operator is None:
            operator = SplineOperator(values, lambda_hat, span)
            self._operators[key] = operator
        return operator


def fit_spline(x: Abscissae, y, cfg: SmootherConfig) -> np.ndarray:
    """Fitted values of the cubic spline smoother at the design points"""
    y = as_vector(y, "y")
    values, _ = _abscissae(x)
    if len(values) != len(y):
        raise DomainError(f"x and y differ in length: {len(values)} vs {len(y)}")
    return SplineOperator(x, cfg.lambda_hat).fit(y)


def apply_residuals(operator_y: SplineOperator, operator_z: SplineOperator,
                    y: np.ndarray, z: np.ndarray) -> ResidualPair:
    """Centered spline residuals from prebuilt operators"""
    yc = y - y.mean()
    zc = z - z.mean()
    fitted_g = operator_y.smooth_centered(yc)
    fitted_h = operator_z.smooth_centered(zc)
    raw = ResidualPair(yc - fitted_g, zc - fitted_h, fitted_g, fitted_h, Estimator.SPLINE)
    return raw.centered()


def residuals(data: Dataset, cfg_y: SmootherConfig, cfg_z: SmootherConfig,
              cache: Optional[OperatorCache] = None) -> ResidualPair:
    """Spline residuals for y and z

    The raw residuals y - g_hat are shifted to mean zero, the shift
    going into the fitted curve, so adding a constant to y changes
    nothing.
    """
    if cache is None:
        cache = OperatorCache()
    operator_y = cache.get(data.x, cfg_y.lambda_hat, data.span)
    operator_z = cache.get(data.x, cfg_z.lambda_hat, data.span)
    return apply_residuals(operator_y, operator_z, data.y, data.z)


def ols_fit(x: Abscissae, y) -> np.ndarray:
    """Least-squares line a + b x evaluated at the design points"""
    values, _ = _abscissae(x)
    y = as_vector(y, "y")
    if len(values) != len(y):
        raise DomainError(f"x and y differ in length: {len(values)} vs {len(y)}")
    if len(values) < 3:
        raise DomainError(f"ordinary least squares needs n >= 3, got {len(values)}")
    if np.ptp(values) == 0.0:
        raise DegenerateDataError("x is constant; the regression line is not identifiable")
    design = np.column_stack([np.ones_like(values), values])
    coef, _, _, _ = linalg.lstsq(design, y, check_finite=False)
    return design @ coef


def linear_residuals(data: Dataset) -> ResidualPair:
    """OLS residuals for y and z (the linear baseline)"""
    fitted_g = ols_fit(data.x, data.y)
    fitted_h = ols_fit(data.x, data.z)
    return ResidualPair(
        data.y - fitted_g,
        data.z - fitted_h,
        fitted_g - data.y.mean(),
        fitted_h - data.z.mean(),
        Estimator.LINEAR,
    )


def oracle_residuals(data: Dataset) -> ResidualPair:
    """True errors of a simulated dataset"""
    if data.truth is None:
        raise DomainError("true errors are only available for simulated data")
    return ResidualPair(
        data.truth.eps_y,
        data.truth.eps_z,
        data.truth.g_vals - data.y.mean(),
        data.truth.h_vals - data.z.mean(),
        Estimator.ORACLE,
    )
