"""
pcortest presets - named experiment configurations

Each preset fixes the subcommand it belongs to, a base Scenario and the
grids that subcommand sweeps. Command-line flags override preset fields.
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple

from inference.errors import DomainError
from inference.types import Estimator
from inference.wiener.wiener_sim import GeneratingModel
from simulation.harness import DEFAULT_RHO_GRID, Scenario

# Straight lines explain almost all of an integrated Wiener curve on a
# short domain; the breakdown setting needs curves that dominate the noise.
BREAKDOWN_SPAN = 7.0

ROBUSTNESS_FIT_LAMBDAS = (0.005, 0.05, 0.1, 0.5 / 3, 0.25, 0.5, 0.75, 1.0, 1.5, 3.0, 5.0)


@dataclass(frozen=True)
class Preset:
    name: str
    command: str
    description: str
    base: Scenario
    n_values: Tuple[int, ...] = ()
    lambdas: Tuple[float, ...] = ()
    rho_grid: Tuple[float, ...] = DEFAULT_RHO_GRID
    fit_lambda_grid: Tuple[float, ...] = ()
    n_grid: Tuple[int, ...] = ()
    curve_lambdas: Tuple[float, ...] = (0.1, 0.3, 0.5, 0.7)
    estimators: Tuple[Estimator, ...] = ()


def _scenario(n=100, lam=0.5, **kwargs) -> Scenario:
    return Scenario(n=n, model=GeneratingModel.from_lambda(lam), **kwargs)


PRESETS: Dict[str, Preset] = {p.name: p for p in [
    Preset(
        name="paper-breakdown",
        command="simulate",
        description=f"linear and spline fits, n=100, lambda=0.5, rho=0, span {BREAKDOWN_SPAN:g}",
        base=_scenario(estimator=Estimator.LINEAR, span=BREAKDOWN_SPAN),
        estimators=(Estimator.LINEAR, Estimator.SPLINE),
    ),
    Preset(
        name="paper-type1",
        command="simulate",
        description="spline Type I error for n in {20, 100}, lambda in {0.1, 0.3, 0.5, 0.7}",
        base=_scenario(),
        n_values=(20, 100),
        lambdas=(0.1, 0.3, 0.5, 0.7),
    ),
    Preset(
        name="paper-undersmooth",
        command="simulate",
        description="n=100, lambda=0.5 fitted with lambda=0.5/3, 5000 replications",
        base=_scenario(fit_lambda_y=0.5 / 3, fit_lambda_z=0.5 / 3, replications=5000),
    ),
    Preset(
        name="paper-oracle-null",
        command="simulate",
        description="permutation test on the true errors, n=20, rho=0, 20000 replications",
        base=_scenario(n=20, estimator=Estimator.ORACLE, replications=20000),
    ),
    Preset(
        name="paper-fig2",
        command="power",
        description="spline and true-curve power over rho, n=100, lambda=0.5",
        base=_scenario(),
    ),
    Preset(
        name="paper-fig3",
        command="robustness",
        description="Type I error over misspecified fit lambdas, data lambda=0.5",
        base=_scenario(),
        fit_lambda_grid=ROBUSTNESS_FIT_LAMBDAS,
    ),
    Preset(
        name="paper-oversmooth",
        command="robustness",
        description="oversmoothing by up to a factor three, n=100, data lambda=0.5",
        base=_scenario(),
        fit_lambda_grid=(0.75, 1.0, 1.5),
    ),
    Preset(
        name="paper-theorem",
        command="convergence",
        description="median |r_hat - r| for n in (50, 200, 800), 200 replications",
        base=_scenario(replications=200),
        n_grid=(50, 200, 800),
    ),
    Preset(
        name="paper-fig1",
        command="curves",
        description="random centered curves with data for several lambdas",
        base=_scenario(),
    ),
]}


def preset_names() -> List[str]:
    return sorted(PRESETS)


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise DomainError(f"Unknown preset '{name}'. Available presets: {', '.join(preset_names())}")


def describe_presets() -> str:
    width = max(len(name) for name in PRESETS)
    return "\n".join(f"{p.name:<{width}}  [{p.command}] {p.description}"
                     for p in sorted(PRESETS.values(), key=lambda p: p.name))
