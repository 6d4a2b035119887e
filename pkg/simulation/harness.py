"""
pcortest simulation harness - Monte Carlo experiments on the CI test

A Scenario fixes one simulation cell. Replication r of a scenario draws
its data from the stream (master_seed, scenario_id, r), where scenario_id
identifies the design only (n, design kind, span). Cells that differ in
rho, lambda or estimator therefore reuse the same standard-normal draws,
and every result is independent of the worker count.

Simulated designs live on (0, DEFAULT_SPAN] unless a scenario sets its own
span. The spline test holds its level there for lambda in [0.3, 0.7] and
n in [20, 100]; on longer domains the centered fits leave part of the curve
in the residuals.
"""
import logging
import math
import struct
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from inference.correlation.partial_corr import partial_correlation
from inference.errors import (
    DegenerateDataError,
    DomainError,
    NumericalFailureError,
    ScenarioFailureError,
)
from inference.permutation.perm_test import MIN_PERMUTATIONS, perm_test_mc
from inference.rng import DATA_STREAM, derive_seed, philox_stream
from inference.smoothing.spline_smoother import (
    ResidualPair,
    SplineOperator,
    apply_residuals,
    linear_residuals,
    oracle_residuals,
)
from inference.types import Alternative, Dataset, Estimator
from inference.wiener.wiener_sim import CurveSampler, DesignPoints, GeneratingModel, gen_dataset

logger = logging.getLogger(__name__)

DEFAULT_REPLICATIONS = 2000
DEFAULT_SIM_PERMUTATIONS = 199
DEFAULT_RHO_GRID = (0.0, 0.1, 0.2, 0.3, 0.5, 0.7)
FAILURE_THRESHOLD = 0.001
REPLICATION_BLOCK = 64
DEFAULT_SPAN = 0.5

_SCENARIO_TAG = 0x5C3A
_GALLERY_TAG = 0x6A11


class DesignKind(Enum):
    EQUISPACED = "equispaced"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, value) -> 'DesignKind':
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise DomainError(f"Unknown design '{value}' (expected equispaced or uniform)")


def _float_bits(value: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(value)))[0]


@dataclass(frozen=True)
class Scenario:
    """One simulation cell; fit lambdas default to the generating lambda"""
    n: int
    model: GeneratingModel
    fit_lambda_y: Optional[float] = None
    fit_lambda_z: Optional[float] = None
    estimator: Estimator = Estimator.SPLINE
    alpha: float = 0.05
    replications: int = DEFAULT_REPLICATIONS
    b: int = DEFAULT_SIM_PERMUTATIONS
    master_seed: int = 0
    design: DesignKind = DesignKind.EQUISPACED
    span: float = DEFAULT_SPAN
    alternative: Alternative = Alternative.TWO_SIDED

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator.parse(self.estimator))
        object.__setattr__(self, "design", DesignKind.parse(self.design))
        object.__setattr__(self, "alternative", Alternative.parse(self.alternative))
        if self.fit_lambda_y is None:
            object.__setattr__(self, "fit_lambda_y", self.model.lam)
        if self.fit_lambda_z is None:
            object.__setattr__(self, "fit_lambda_z", self.model.lam)

        if self.n < 3:
            raise DomainError(f"n must be at least 3, got {self.n}")
        if self.replications < 1:
            raise DomainError(f"replications must be at least 1, got {self.replications}")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.b < MIN_PERMUTATIONS:
            raise DomainError(f"b must be at least {MIN_PERMUTATIONS}, got {self.b}")
        if self.master_seed < 0:
            raise DomainError(f"master_seed must be non-negative, got {self.master_seed}")
        if not (math.isfinite(self.span) and self.span > 0):
            raise DomainError(f"span must be positive, got {self.span}")
        for name in ("fit_lambda_y", "fit_lambda_z"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be non-negative, got {value}")

    @property
    def scenario_id(self) -> int:
        design_code = list(DesignKind).index(self.design)
        return derive_seed(_SCENARIO_TAG, self.n, design_code, _float_bits(self.span))

    def replication_seed(self, replication: int) -> int:
        return derive_seed(self.master_seed, self.scenario_id, replication)


@dataclass(frozen=True)
class ScenarioReport:
    scenario: Scenario
    rejection_rate: float
    mc_stderr: float
    mean_abs_r_gap: Optional[float]
    runtime_seconds: float
    rejections: int = 0
    completed: int = 0
    failures: int = 0
    jitter: float = 0.0


@dataclass(frozen=True)
class ConvergenceRow:
    scenario: Scenario
    median_abs_r_gap: float
    mean_abs_r_gap: float
    failures: int = 0

    @property
    def n(self) -> int:
        return self.scenario.n


@dataclass(frozen=True)
class _Outcome:
    failed: bool
    rejected: bool = False
    gap: Optional[float] = None
    reason: str = ""
    jitter: float = 0.0


class _ScenarioContext:
    """Per-scenario read-only state: design, curve sampler, smoothers"""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.design = None
        self.sampler = None
        self.operators = None
        self.jitter = 0.0
        if scenario.design is DesignKind.EQUISPACED:
            self.design = DesignPoints.equispaced(scenario.n, scenario.span)
            self.sampler = CurveSampler(self.design)
            self.jitter = self.sampler.jitter
            if scenario.estimator is Estimator.SPLINE:
                self.operators = self._build_operators(self.design)

    def _build_operators(self, design: DesignPoints):
        s = self.scenario
        operator_y = SplineOperator(design, s.fit_lambda_y)
        if s.fit_lambda_z == s.fit_lambda_y:
            return operator_y, operator_y
        return operator_y, SplineOperator(design, s.fit_lambda_z)

    def draw(self, replication: int):
        """Data, smoothing operators and covariance jitter of one replication"""
        s = self.scenario
        rng = philox_stream(s.replication_seed(replication), DATA_STREAM)
        if self.design is not None:
            return gen_dataset(self.design, s.model, rng, self.sampler), self.operators, self.jitter
        design = DesignPoints.uniform(s.n, rng, s.span)
        sampler = CurveSampler(design)
        data = gen_dataset(design, s.model, rng, sampler)
        operators = self._build_operators(design) if s.estimator is Estimator.SPLINE else None
        return data, operators, sampler.jitter

    def dataset(self, replication: int):
        """Data of one replication with the operators that smooth it"""
        data, operators, _ = self.draw(replication)
        return data, operators

    def estimated_residuals(self, data: Dataset, operators) -> ResidualPair:
        estimator = self.scenario.estimator
        if estimator is Estimator.SPLINE:
            return apply_residuals(operators[0], operators[1], data.y, data.z)
        if estimator is Estimator.LINEAR:
            return linear_residuals(data)
        return oracle_residuals(data)


def _abs_r_gap(estimated: ResidualPair, truth: ResidualPair) -> Optional[float]:
    if (np.array_equal(estimated.eps_y_hat, truth.eps_y_hat)
            and np.array_equal(estimated.eps_z_hat, truth.eps_z_hat)):
        return 0.0
    try:
        return abs(partial_correlation(estimated).r_hat - partial_correlation(truth).r_hat)
    except DegenerateDataError:
        return None


def _run_replication(context: _ScenarioContext, replication: int) -> _Outcome:
    s = context.scenario
    try:
        data, operators, jitter = context.draw(replication)
        res = context.estimated_residuals(data, operators)
        test = perm_test_mc(res, b=s.b, seed=s.replication_seed(replication),
                            alternative=s.alternative)
    except (NumericalFailureError, DegenerateDataError) as e:
        return _Outcome(failed=True, reason=f"{type(e).__name__}: {e}")
    return _Outcome(
        failed=False,
        rejected=test.p_value <= s.alpha,
        gap=_abs_r_gap(res, oracle_residuals(data)),
        jitter=jitter,
    )


def _run_block(context: _ScenarioContext, start: int, stop: int, task) -> list:
    return [task(context, r) for r in range(start, stop)]


def _map_replications(context: _ScenarioContext, replications: int, workers: int, task) -> list:
    blocks = [(start, min(start + REPLICATION_BLOCK, replications))
              for start in range(0, replications, REPLICATION_BLOCK)]
    if workers == 1 or len(blocks) == 1:
        parts = [_run_block(context, start, stop, task) for start, stop in blocks]
    else:
        parts = Parallel(n_jobs=workers, prefer="threads")(
            delayed(_run_block)(context, start, stop, task) for start, stop in blocks
        )
    return [outcome for part in parts for outcome in part]


def _check_workers(workers: int):
    if workers < 1:
        raise DomainError(f"workers must be at least 1, got {workers}")


def run_scenario(s: Scenario, workers: int = 1) -> ScenarioReport:
    """Rejection rate of the permutation test over the scenario's replications"""
    _check_workers(workers)
    started = time.perf_counter()
    logger.info("scenario n=%d lambda=%.4g rho=%.3g estimator=%s reps=%d",
                s.n, s.model.lam, s.model.rho, s.estimator.value, s.replications)

    context = _ScenarioContext(s)
    outcomes = _map_replications(context, s.replications, workers, _run_replication)

    done = [o for o in outcomes if not o.failed]
    failures = len(outcomes) - len(done)
    rejections = sum(1 for o in done if o.rejected)
    completed = len(done)
    rate = rejections / completed if completed else float("nan")
    stderr = math.sqrt(rate * (1.0 - rate) / completed) if completed else float("nan")
    gaps = [o.gap for o in done if o.gap is not None]
    # uniform designs factor a new covariance per replication; report the largest jitter
    jitter = max((o.jitter for o in done), default=context.jitter)

    report = ScenarioReport(
        scenario=s,
        rejection_rate=rate,
        mc_stderr=stderr,
        mean_abs_r_gap=float(np.mean(gaps)) if gaps else None,
        runtime_seconds=time.perf_counter() - started,
        rejections=rejections,
        completed=completed,
        failures=failures,
        jitter=jitter,
    )

    if failures:
        first = next(o.reason for o in outcomes if o.failed)
        logger.warning("%d of %d replications failed (first: %s)", failures, s.replications, first)
    if failures > FAILURE_THRESHOLD * s.replications:
        logger.error("scenario failed: %d of %d replications", failures, s.replications)
        raise ScenarioFailureError(
            f"{failures} of {s.replications} replications failed", report=report)

    logger.info("rejection rate %.4f (se %.4f) in %.1fs", rate, stderr, report.runtime_seconds)
    return report


def power_curve(base: Scenario, rho_grid: Sequence[float] = DEFAULT_RHO_GRID,
                workers: int = 1) -> List[ScenarioReport]:
    """Spline and true-curve reports for every rho in the grid"""
    for rho in rho_grid:
        if not abs(rho) <= 1.0:
            raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    reports = []
    for rho in rho_grid:
        model = replace(base.model, rho=float(rho))
        for estimator in (Estimator.SPLINE, Estimator.ORACLE):
            reports.append(run_scenario(replace(base, model=model, estimator=estimator), workers))
    return reports


def robustness_sweep(base: Scenario, fit_lambda_grid: Sequence[float],
                     workers: int = 1) -> List[ScenarioReport]:
    """Type I error rates when fitting with misspecified lambdas"""
    for lam in fit_lambda_grid:
        if not lam > 0:
            raise DomainError(f"fit lambdas must be positive, got {lam}")
    if not math.isclose(base.model.lam, 0.5):
        logger.warning("robustness sweep with generating lambda %.4g (reference setting is 0.5)",
                       base.model.lam)
    if base.model.rho != 0.0:
        logger.warning("robustness sweep with rho=%.3g reports power, not Type I error",
                       base.model.rho)
    return [
        run_scenario(replace(base, fit_lambda_y=float(lam), fit_lambda_z=float(lam),
                             estimator=Estimator.SPLINE), workers)
        for lam in fit_lambda_grid
    ]


def _convergence_replication(context: _ScenarioContext, replication: int) -> _Outcome:
    try:
        data, operators = context.dataset(replication)
        res = context.estimated_residuals(data, operators)
    except (NumericalFailureError, DegenerateDataError) as e:
        return _Outcome(failed=True, reason=f"{type(e).__name__}: {e}")
    gap = _abs_r_gap(res, oracle_residuals(data))
    if gap is None:
        return _Outcome(failed=True, reason="degenerate true errors")
    return _Outcome(failed=False, gap=gap)


def convergence_check(n_grid: Sequence[int], model: GeneratingModel, replications: int,
                      seed: int, fit_lambda: Optional[float] = None, workers: int = 1,
                      design=DesignKind.EQUISPACED, span: float = DEFAULT_SPAN) -> List[ConvergenceRow]:
    """Median |r_hat - r| between spline and true residuals along n_grid"""
    _check_workers(workers)
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError(f"n_grid must be strictly increasing, got {n_grid}")

    rows = []
    for n in n_grid:
        s = Scenario(n=n, model=model, fit_lambda_y=fit_lambda, fit_lambda_z=fit_lambda,
                     estimator=Estimator.SPLINE, replications=replications,
                     master_seed=seed, design=design, span=span)
        context = _ScenarioContext(s)
        outcomes = _map_replications(context, replications, workers, _convergence_replication)
        gaps = np.array([o.gap for o in outcomes if not o.failed])
        failures = len(outcomes) - len(gaps)
        if failures > FAILURE_THRESHOLD * replications:
            raise ScenarioFailureError(f"{failures} of {replications} replications failed at n={n}")
        row = ConvergenceRow(
            scenario=s,
            median_abs_r_gap=float(np.median(gaps)),
            mean_abs_r_gap=float(np.mean(gaps)),
            failures=failures,
        )
        logger.info("convergence n=%d median |r_hat - r| = %.3e", n, row.median_abs_r_gap)
        rows.append(row)
    return rows


def sample_dataset(s: Scenario, replication: int = 0) -> Dataset:
    """The dataset replication `replication` of a scenario works on"""
    data, _ = _ScenarioContext(replace(s, estimator=Estimator.ORACLE)).dataset(replication)
    return data


def curve_gallery(n: int, lambdas: Sequence[float] = (0.1, 0.3, 0.5, 0.7), seed: int = 0,
                  span: float = DEFAULT_SPAN) -> pd.DataFrame:
    """Centered curves with data at sigma0 = 1 for several lambdas"""
    design = DesignPoints.equispaced(n, span)
    sampler = CurveSampler(design)
    frames = []
    for i, lam in enumerate(lambdas):
        model = GeneratingModel.from_lambda(float(lam))
        rng = philox_stream(derive_seed(seed, _GALLERY_TAG, i), DATA_STREAM)
        data = gen_dataset(design, model, rng, sampler)
        g_shift = data.truth.g_vals.mean()
        h_shift = data.truth.h_vals.mean()
        frames.append(pd.DataFrame({
            "lambda": float(lam),
            "x": design.span * design.x,
            "g": data.truth.g_vals - g_shift,
            "y": data.y - g_shift,
            "h": data.truth.h_vals - h_shift,
            "z": data.z - h_shift,
        }))
    return pd.concat(frames, ignore_index=True)
