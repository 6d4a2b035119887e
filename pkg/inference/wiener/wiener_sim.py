"""
pcortest Wiener simulation - integrated Wiener curves and simulated datasets

The regression curves are g(x) = sigma0 * int_0^x W_t dt, a once
differentiable Gaussian process with covariance sigma0^2 * K(s, t),

    K(s, t) = min(s, t)^2 * max(s, t) / 2 - min(s, t)^3 / 6

Errors are bivariate normal with correlation rho and a common standard
deviation sigma_eps. All sampling goes through standard-normal draws
multiplied by the scales, so rescaling (sigma0, sigma_eps) by a common
factor rescales every output without changing the underlying draws.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from inference.errors import DomainError, NumericalFailureError
from inference.rng import SeedLike, as_generator
from inference.types import Dataset, TrueComponents, as_vector

logger = logging.getLogger(__name__)

# Relative diagonal jitter: 1e-10 * trace(H^2) / n
JITTER_SCALE = 1e-10


@dataclass(frozen=True, eq=False)
class DesignPoints:
    """Ordered abscissae in (0, 1]; the physical design is span * x"""
    x: np.ndarray
    span: float = 1.0

    def __post_init__(self):
        x = as_vector(self.x, "design points")
        if len(x) < 3:
            raise DomainError(f"need at least 3 design points, got {len(x)}")
        if x[0] <= 0.0 or x[-1] > 1.0:
            raise DomainError("design points must lie in (0, 1]")
        if np.any(np.diff(x) <= 0.0):
            raise DomainError("design points must be strictly increasing")
        if not (math.isfinite(self.span) and self.span > 0):
            raise DomainError(f"span must be positive, got {self.span}")
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def equispaced(cls, n: int, span: float = 1.0) -> 'DesignPoints':
        """x_i = i / n, i = 1..n"""
        return cls(np.arange(1, n + 1, dtype=np.float64) / n, span)

    @classmethod
    def uniform(cls, n: int, rng: np.random.Generator, span: float = 1.0) -> 'DesignPoints':
        """Sorted i.i.d. Uniform(0, 1] abscissae"""
        return cls(np.sort(1.0 - rng.random(n)), span)


@dataclass(frozen=True)
class GeneratingModel:
    """Curve scale, error standard deviation and error correlation"""
    sigma0: float
    sigma_eps: float
    rho: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma0) and self.sigma0 > 0):
            raise DomainError(f"sigma0 must be positive, got {self.sigma0}")
        if not (math.isfinite(self.sigma_eps) and self.sigma_eps >= 0):
            raise DomainError(f"sigma_eps must be non-negative, got {self.sigma_eps}")
        if not (math.isfinite(self.rho) and abs(self.rho) <= 1.0):
            raise DomainError(f"rho must lie in [-1, 1], got {self.rho}")

    @property
    def lam(self) -> float:
        """Noise-to-signal ratio sigma_eps / sigma0"""
        return self.sigma_eps / self.sigma0

    @classmethod
    def from_lambda(cls, lam: float, rho: float = 0.0, sigma0: float = 1.0) -> 'GeneratingModel':
        return cls(sigma0=sigma0, sigma_eps=lam * sigma0, rho=rho)


@dataclass(frozen=True, eq=False)
class SampledCurvePair:
    """Realisations g(x_i), h(x_i) of two independent curves"""
    g_vals: np.ndarray
    h_vals: np.ndarray


def iwp_kernel(s: float, t: float, sigma0: float = 1.0) -> float:
    """Covariance of g(s) and g(t) for the integrated Wiener process"""
    if not (0.0 <= s <= 1.0) or not (0.0 <= t <= 1.0):
        raise DomainError(f"kernel arguments must lie in [0, 1], got ({s}, {t})")
    if not sigma0 > 0:
        raise DomainError(f"sigma0 must be positive, got {sigma0}")
    lo, hi = min(s, t), max(s, t)
    return sigma0 ** 2 * (lo * lo * hi / 2.0 - lo ** 3 / 6.0)


def unit_kernel_matrix(x: np.ndarray) -> np.ndarray:
    """K(x_i, x_j) with sigma0 = 1 for abscissae in [0, 1]"""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("kernel arguments must lie in [0, 1]")
    lo = np.minimum.outer(x, x)
    hi = np.maximum.outer(x, x)
    return lo * lo * hi / 2.0 - lo ** 3 / 6.0


def build_covariance(x: DesignPoints, sigma0: float = 1.0) -> np.ndarray:
    """H^2 for the design: sigma0^2 * span^3 * K(x_i, x_j)"""
    if not sigma0 > 0:
        raise DomainError(f"sigma0 must be positive, got {sigma0}")
    return (sigma0 ** 2 * x.span ** 3) * unit_kernel_matrix(x.x)


def diagonal_jitter(cov: np.ndarray) -> float:
    n = cov.shape[0]
    return JITTER_SCALE * float(np.trace(cov)) / n


def jittered_cholesky(cov: np.ndarray) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor of cov + jitter * I, with the jitter used"""
    jitter = diagonal_jitter(cov)
    try:
        factor = linalg.cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise NumericalFailureError(f"covariance not factorizable after jitter {jitter:.3e}: {e}")
    logger.debug("Cholesky of %dx%d covariance with jitter %.3e", cov.shape[0], cov.shape[0], jitter)
    return factor, jitter


class CurveSampler:
    """Cached square root of the unit-scale covariance for one design

    The factor is computed once and only read afterwards, so one sampler
    can serve many replications and threads.
    """

    def __init__(self, x: DesignPoints):
        self.design = x
        self.factor, self.jitter = jittered_cholesky(build_covariance(x, 1.0))

    def draw(self, rng: np.random.Generator, sigma0: float) -> SampledCurvePair:
        n = self.design.n
        std_g = rng.standard_normal(n)
        std_h = rng.standard_normal(n)
        return SampledCurvePair(
            g_vals=sigma0 * (self.factor @ std_g),
            h_vals=sigma0 * (self.factor @ std_h),
        )


def draw_errors(rng: np.random.Generator, n: int, model: GeneratingModel) -> Tuple[np.ndarray, np.ndarray]:
    """Bivariate normal error pairs with correlation rho and equal scales"""
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    eps_y = model.sigma_eps * u
    eps_z = model.sigma_eps * (model.rho * u + math.sqrt(1.0 - model.rho ** 2) * v)
    return eps_y, eps_z


def sample_curve_pair(x: DesignPoints, sigma0: float, rng_seed: SeedLike) -> SampledCurvePair:
    """Independent draws of g and h at the design points"""
    if not sigma0 > 0:
        raise DomainError(f"sigma0 must be positive, got {sigma0}")
    return CurveSampler(x).draw(as_generator(rng_seed), sigma0)


def gen_dataset(x: DesignPoints, model: GeneratingModel, rng_seed: SeedLike,
                sampler: Optional[CurveSampler] = None) -> Dataset:
    """Simulated dataset y = g(x) + eps_Y, z = h(x) + eps_Z with its truth"""
    rng = as_generator(rng_seed)
    if sampler is None:
        sampler = CurveSampler(x)
    elif sampler.design is not x:
        raise DomainError("sampler was built for a different design")

    curves = sampler.draw(rng, model.sigma0)
    eps_y, eps_z = draw_errors(rng, x.n, model)
    truth = TrueComponents(g_vals=curves.g_vals, h_vals=curves.h_vals, eps_y=eps_y, eps_z=eps_z)
    return Dataset(
        x=x.x,
        y=curves.g_vals + eps_y,
        z=curves.h_vals + eps_z,
        truth=truth,
        span=x.span,
    )
