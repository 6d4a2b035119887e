"""
pcortest shared types - datasets and the enums used across modules
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from inference.errors import DomainError


class Estimator(Enum):
    """How the marginal regressions g and h are removed"""
    SPLINE = "spline"
    LINEAR = "linear"
    ORACLE = "oracle-true-curves"

    @classmethod
    def parse(cls, value) -> 'Estimator':
        if isinstance(value, cls):
            return value
        aliases = {"oracle": cls.ORACLE}
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(e.value for e in cls)
            raise DomainError(f"Unknown estimator '{value}' (expected one of: {names})")


class Alternative(Enum):
    """Sidedness of a permutation test"""
    TWO_SIDED = "two-sided"
    GREATER = "greater"
    LESS = "less"

    @classmethod
    def parse(cls, value) -> 'Alternative':
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(a.value for a in cls)
            raise DomainError(f"Unknown alternative '{value}' (expected one of: {names})")


def as_vector(values, name: str) -> np.ndarray:
    """Return values as a finite 1-D float64 array"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class TrueComponents:
    """Curves and errors behind a simulated dataset"""
    g_vals: np.ndarray
    h_vals: np.ndarray
    eps_y: np.ndarray
    eps_z: np.ndarray


@dataclass(frozen=True, eq=False)
class Dataset:
    """n triples (x_i, y_i, z_i); truth is only known for simulated data"""
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    truth: Optional[TrueComponents] = None
    span: float = 1.0

    def __post_init__(self):
        x = as_vector(self.x, "x")
        y = as_vector(self.y, "y")
        z = as_vector(self.z, "z")
        if not (len(x) == len(y) == len(z)):
            raise DomainError(f"x, y and z must have equal length, got {len(x)}, {len(y)}, {len(z)}")
        if len(x) < 3:
            raise DomainError(f"a dataset needs at least 3 observations, got {len(x)}")
        if not self.span > 0:
            raise DomainError(f"span must be positive, got {self.span}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.x)
