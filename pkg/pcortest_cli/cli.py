"""
pcortest CLI - Command-line interface for the partial correlation CI test
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from typing import List, Optional

from inference.correlation.partial_corr import t_statistic
from inference.errors import (
    DegenerateDataError,
    DomainError,
    NumericalFailureError,
    PcorTestError,
    ScenarioFailureError,
)
from inference.permutation.perm_test import DEFAULT_PERMUTATIONS, perm_test_exact, run_ci_test
from inference.rng import fresh_seed
from inference.smoothing.spline_smoother import SmootherConfig, residuals
from inference.types import Alternative, Estimator
from inference.wiener.wiener_sim import GeneratingModel
from simulation import harness
from simulation.harness import Scenario
from simulation.presets import Preset, describe_presets, get_preset
from simulation.reports import (
    ReportFormat,
    convergence_record,
    report_record,
    summary_line,
    write_convergence,
    write_curves,
    write_report,
)
from tools.data_io import dump_dataset, load_dataset

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_NUMERICAL = 4

WORKERS_ENV = "PCORTEST_WORKERS"
DEFAULT_CONVERGENCE_REPLICATIONS = 200
DEFAULT_N_GRID = (50, 200, 800)
SIMULATION_COMMANDS = ("simulate", "power", "robustness", "convergence", "curves")


def exit_code_for(error: PcorTestError) -> int:
    if isinstance(error, DegenerateDataError):
        return EXIT_DEGENERATE
    if isinstance(error, (NumericalFailureError, ScenarioFailureError)):
        return EXIT_NUMERICAL
    return EXIT_USAGE


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    try:
        workers = int(raw)
    except ValueError:
        raise DomainError(f"{WORKERS_ENV} must be an integer, got '{raw}'")
    if workers < 1:
        raise DomainError(f"{WORKERS_ENV} must be at least 1, got {workers}")
    return workers


def _number_list(kind):
    def parse(text: str):
        try:
            return tuple(kind(item) for item in text.split(",") if item.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got '{text}'")
    return parse


@dataclass(frozen=True)
class CliConfig:
    """Settings shared by every subcommand, with seed and workers resolved"""
    command: str
    seed: int
    seed_generated: bool
    workers: int
    json_output: bool = False
    fmt: Optional[ReportFormat] = None
    output: Optional[str] = None
    preset: Optional[Preset] = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'CliConfig':
        workers = args.workers if args.workers is not None else default_workers()
        if workers < 1:
            raise DomainError(f"--workers must be at least 1, got {workers}")
        if args.seed is not None and args.seed < 0:
            raise DomainError(f"--seed must be non-negative, got {args.seed}")
        seed = args.seed if args.seed is not None else fresh_seed()

        preset = None
        if getattr(args, "preset", None) is not None:
            preset = get_preset(args.preset)
            if preset.command != args.command:
                raise DomainError(f"preset '{preset.name}' belongs to '{preset.command}', "
                                  f"not '{args.command}'")

        output = getattr(args, "output", None)
        fmt = getattr(args, "format", None)
        if fmt is not None:
            fmt = ReportFormat.parse(fmt)
        elif output is not None:
            fmt = ReportFormat.from_path(output)

        return cls(
            command=args.command,
            seed=seed,
            seed_generated=args.seed is None,
            workers=workers,
            json_output=args.json,
            fmt=fmt,
            output=output,
            preset=preset,
        )


class PcorTestCLI:
    """pcortest command-line interface"""

    def __init__(self, stdout=None):
        self.version = "0.1.0"
        self.stdout = stdout if stdout is not None else sys.stdout
        self.parser = self._create_parser()

    def _create_parser(self):
        """Create argument parser"""
        parser = argparse.ArgumentParser(
            prog='pcortest',
            description='Permutation test of conditional independence via partial correlation',
        )
        parser.add_argument('--version', action='version', version=f'pcortest {self.version}')

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--seed', type=int, help='Seed (generated and printed when omitted)')
        common.add_argument('--workers', type=int, help=f'Worker threads (default ${WORKERS_ENV} or 1)')
        common.add_argument('--json', action='store_true', help='Machine-readable output on stdout')
        common.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
        common.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only')

        output = argparse.ArgumentParser(add_help=False)
        output.add_argument('--format', choices=['csv', 'json'], help='Report format')
        output.add_argument('--output', help='Report file')
        output.add_argument('--preset', help="Named experiment ('list' shows all)")

        scenario = argparse.ArgumentParser(add_help=False)
        scenario.add_argument('--n', type=int, help='Sample size')
        scenario.add_argument('--lambda', dest='lam', type=float, help='Generating noise-to-signal ratio')
        scenario.add_argument('--sigma0', type=float, help='Curve scale')
        scenario.add_argument('--sigma-eps', type=float, help='Error standard deviation')
        scenario.add_argument('--rho', type=float, help='Error correlation')
        scenario.add_argument('--design', choices=['equispaced', 'uniform'], help='Design points')
        scenario.add_argument('--span', type=float, help='Right end of the design interval')
        scenario.add_argument('--replications', type=int, help='Monte Carlo replications')

        testing = argparse.ArgumentParser(add_help=False)
        testing.add_argument('--b', type=int, help='Permutations per test')
        testing.add_argument('--alpha', type=float, help='Level')
        testing.add_argument('--alternative', choices=[a.value for a in Alternative], help='Sidedness')
        testing.add_argument('--fit-lambda-y', '--lambda-y', dest='fit_lambda_y', type=float,
                             help='Fitting lambda for y')
        testing.add_argument('--fit-lambda-z', '--lambda-z', dest='fit_lambda_z', type=float,
                             help='Fitting lambda for z')

        subparsers = parser.add_subparsers(dest='command', help='Commands')

        # Test command
        test_parser = subparsers.add_parser('test', parents=[common], help='Test a CSV dataset')
        test_parser.add_argument('--input', required=True, help='CSV file with columns x, y, z')
        test_parser.add_argument('--b', type=int, default=DEFAULT_PERMUTATIONS, help='Permutations')
        test_parser.add_argument('--alpha', type=float, default=0.05, help='Level for the verdict')
        test_parser.add_argument('--lambda-y', type=float, help='Smoothing lambda for y')
        test_parser.add_argument('--lambda-z', type=float, help='Smoothing lambda for z')
        test_parser.add_argument('--sigma0', type=float, help='Curve scale (both responses)')
        test_parser.add_argument('--sigma-eps', type=float, help='Error standard deviation (both responses)')
        test_parser.add_argument('--estimator', choices=['spline', 'linear'], default='spline')
        test_parser.add_argument('--alternative', choices=[a.value for a in Alternative],
                                 default=Alternative.TWO_SIDED.value)
        test_parser.add_argument('--exact', action='store_true', help='Enumerate all permutations (n <= 8)')

        # Simulation commands
        simulate_parser = subparsers.add_parser(
            'simulate', parents=[common, output, scenario, testing], help='Run simulation scenarios')
        simulate_parser.add_argument('--estimator', choices=['spline', 'linear', 'oracle'])
        simulate_parser.add_argument('--dump', help='Write the first generated dataset as CSV')

        power_parser = subparsers.add_parser(
            'power', parents=[common, output, scenario, testing], help='Power curve over rho')
        power_parser.add_argument('--rho-grid', type=_number_list(float), help='Comma-separated rho values')

        robustness_parser = subparsers.add_parser(
            'robustness', parents=[common, output, scenario, testing], help='Misspecified fit lambdas')
        robustness_parser.add_argument('--lambda-grid', type=_number_list(float),
                                       help='Comma-separated fit lambdas')

        convergence_parser = subparsers.add_parser(
            'convergence', parents=[common, output, scenario], help='|r_hat - r| along n')
        convergence_parser.add_argument('--n-grid', type=_number_list(int), help='Increasing sample sizes')
        convergence_parser.add_argument('--fit-lambda', type=float, help='Fitting lambda for y and z')

        curves_parser = subparsers.add_parser(
            'curves', parents=[common, output], help='Random curves with data')
        curves_parser.add_argument('--n', type=int, help='Points per curve')
        curves_parser.add_argument('--lambda-grid', type=_number_list(float), help='Comma-separated lambdas')
        curves_parser.add_argument('--span', type=float, help='Right end of the design interval')

        return parser

    def run(self, args=None) -> int:
        """Run the CLI and return the exit code"""
        args = self.parser.parse_args(args)

        if not args.command:
            self.parser.print_help()
            return EXIT_USAGE

        self._configure_logging(args)

        if getattr(args, 'preset', None) == 'list':
            self._print(describe_presets())
            return EXIT_OK

        try:
            config = CliConfig.from_args(args)
            if config.seed_generated:
                logger.info("no --seed given, using %d", config.seed)
            if args.command == 'test':
                self.cmd_test(args, config)
            elif args.command == 'simulate':
                self.cmd_simulate(args, config)
            elif args.command == 'power':
                self.cmd_power(args, config)
            elif args.command == 'robustness':
                self.cmd_robustness(args, config)
            elif args.command == 'convergence':
                self.cmd_convergence(args, config)
            elif args.command == 'curves':
                self.cmd_curves(args, config)
        except PcorTestError as e:
            code = exit_code_for(e)
            print(f"Error: {e}", file=sys.stderr)
            return code
        return EXIT_OK

    def _configure_logging(self, args):
        level = logging.INFO
        if args.verbose:
            level = logging.DEBUG
        elif args.quiet:
            level = logging.WARNING
        logging.basicConfig(level=level, stream=sys.stderr,
                            format='%(levelname)s %(name)s: %(message)s')
        logging.getLogger().setLevel(level)

    def _print(self, text: str):
        print(text, file=self.stdout)

    def _print_json(self, payload):
        self._print(json.dumps(payload, indent=2))

    # Test command

    def _smoother_config(self, args, lam: Optional[float], response: str) -> SmootherConfig:
        if lam is not None:
            return SmootherConfig.from_lambda(lam)
        if args.sigma0 is not None and args.sigma_eps is not None:
            return SmootherConfig(sigma0_hat=args.sigma0, sigma_eps_hat=args.sigma_eps)
        raise DomainError(f"give --lambda-{response}, or --sigma0 and --sigma-eps, "
                          f"to fix the smoothing of {response}")

    def cmd_test(self, args, config: CliConfig):
        """Test a dataset file for conditional independence"""
        data = load_dataset(args.input)
        estimator = Estimator.parse(args.estimator)
        alternative = Alternative.parse(args.alternative)
        if not 0.0 < args.alpha < 1.0:
            raise DomainError(f"--alpha must lie in (0, 1), got {args.alpha}")

        result = {"input": args.input, "n": data.n, "estimator": estimator.value,
                  "alternative": alternative.value}
        if estimator is Estimator.SPLINE:
            cfg_y = self._smoother_config(args, args.lambda_y, "y")
            cfg_z = self._smoother_config(args, args.lambda_z, "z")
            result.update({"lambda_y": cfg_y.lambda_hat, "lambda_z": cfg_z.lambda_hat})
        else:
            cfg_y = cfg_z = SmootherConfig()

        if args.exact:
            if estimator is not Estimator.SPLINE:
                raise DomainError("--exact is only available with the spline estimator")
            test = perm_test_exact(residuals(data, cfg_y, cfg_z), alternative)
        else:
            test = run_ci_test(data, cfg_y, cfg_z, b=args.b, seed=config.seed,
                               workers=config.workers, alternative=alternative,
                               estimator=estimator)

        result.update({
            "r_hat": test.r_obs,
            "p_value": test.p_value,
            "b": test.b_used,
            "mode": test.mode.value,
            "seed": test.seed,
            "reject": test.p_value <= args.alpha,
            "alpha": args.alpha,
        })
        if estimator is Estimator.LINEAR and abs(test.r_obs) < 1.0:
            t = t_statistic(test.r_obs, data.n, d=1)
            result.update({"t": t.value, "df": t.df, "t_p_value": t.p_value(alternative)})

        if config.json_output:
            self._print_json(result)
            return
        self._print(f"n = {data.n}, estimator = {estimator.value}")
        if estimator is Estimator.SPLINE:
            self._print(f"lambda_y = {result['lambda_y']:.6g}, lambda_z = {result['lambda_z']:.6g}")
        self._print(f"r_hat = {test.r_obs:.6f}")
        self._print(f"p-value = {test.p_value:.6g} ({alternative.value}, {test.mode.value}, "
                    f"{test.b_used} permutations)")
        if "t" in result:
            self._print(f"t = {result['t']:.4f} on {result['df']} df, p-value = {result['t_p_value']:.6g}")
        if test.seed is not None:
            self._print(f"seed = {test.seed}")

    # Simulation commands

    def _base_scenario(self, args, config: CliConfig) -> Scenario:
        if config.preset is not None:
            base = config.preset.base
        else:
            base = Scenario(n=100, model=GeneratingModel.from_lambda(0.5))

        model = base.model
        if args.lam is not None and args.sigma_eps is not None:
            raise DomainError("give either --lambda or --sigma-eps, not both")
        sigma0 = args.sigma0 if args.sigma0 is not None else model.sigma0
        if args.lam is not None:
            sigma_eps = args.lam * sigma0
        elif args.sigma_eps is not None:
            sigma_eps = args.sigma_eps
        else:
            sigma_eps = model.lam * sigma0
        rho = args.rho if args.rho is not None else model.rho
        scenario = with_model(base, GeneratingModel(sigma0, sigma_eps, rho))

        changes = {"master_seed": config.seed}
        for name in ("n", "alpha", "replications", "b", "design", "span", "alternative",
                     "estimator", "fit_lambda_y", "fit_lambda_z"):
            value = getattr(args, name, None)
            if value is not None:
                changes[name] = value
        return replace(scenario, **changes)

    def _emit_reports(self, reports, config: CliConfig):
        if config.output is not None:
            write_report(reports, config.fmt, config.output)
        if config.json_output:
            self._print_json([report_record(r) for r in reports])
        else:
            for report in reports:
                self._print(summary_line(report))
            self._print(f"seed = {config.seed}")

    def cmd_simulate(self, args, config: CliConfig):
        base = self._base_scenario(args, config)
        preset = config.preset
        n_values = (base.n,)
        if preset is not None and preset.n_values and args.n is None:
            n_values = preset.n_values
        models = (base.model,)
        if (preset is not None and preset.lambdas
                and args.lam is None and args.sigma0 is None and args.sigma_eps is None):
            models = tuple(GeneratingModel.from_lambda(lam, base.model.rho) for lam in preset.lambdas)

        estimators = (base.estimator,)
        if preset is not None and preset.estimators and args.estimator is None:
            estimators = preset.estimators

        scenarios = [with_model(replace(base, n=n, estimator=estimator), model)
                     for n in n_values for model in models for estimator in estimators]
        if args.dump:
            dump_dataset(harness.sample_dataset(scenarios[0]), args.dump)
        reports = [harness.run_scenario(s, config.workers) for s in scenarios]
        self._emit_reports(reports, config)

    def cmd_power(self, args, config: CliConfig):
        base = self._base_scenario(args, config)
        rho_grid = args.rho_grid
        if rho_grid is None:
            rho_grid = config.preset.rho_grid if config.preset else harness.DEFAULT_RHO_GRID
        self._emit_reports(harness.power_curve(base, rho_grid, config.workers), config)

    def cmd_robustness(self, args, config: CliConfig):
        base = self._base_scenario(args, config)
        grid = args.lambda_grid
        if grid is None:
            if config.preset is None or not config.preset.fit_lambda_grid:
                raise DomainError("give --lambda-grid or a robustness preset")
            grid = config.preset.fit_lambda_grid
        self._emit_reports(harness.robustness_sweep(base, grid, config.workers), config)

    def cmd_convergence(self, args, config: CliConfig):
        base = self._base_scenario(args, config)
        n_grid = args.n_grid
        if n_grid is None:
            n_grid = config.preset.n_grid if config.preset and config.preset.n_grid else DEFAULT_N_GRID
        replications = base.replications
        if config.preset is None and args.replications is None:
            replications = DEFAULT_CONVERGENCE_REPLICATIONS
        fit_lambda = args.fit_lambda if args.fit_lambda is not None else base.model.lam

        rows = harness.convergence_check(n_grid, base.model, replications, config.seed,
                                         fit_lambda=fit_lambda, workers=config.workers,
                                         design=base.design, span=base.span)
        if config.output is not None:
            write_convergence(rows, config.fmt, config.output)
        if config.json_output:
            self._print_json([convergence_record(row) for row in rows])
            return
        for row in rows:
            self._print(f"n={row.n}: median |r_hat - r| = {row.median_abs_r_gap:.4e} "
                        f"(mean {row.mean_abs_r_gap:.4e}, {row.failures} failures)")
        self._print(f"seed = {config.seed}")

    def cmd_curves(self, args, config: CliConfig):
        preset = config.preset
        n = args.n if args.n is not None else (preset.base.n if preset else 100)
        lambdas = args.lambda_grid
        if lambdas is None:
            lambdas = preset.curve_lambdas if preset else (0.1, 0.3, 0.5, 0.7)
        span = args.span
        if span is None:
            span = preset.base.span if preset else harness.DEFAULT_SPAN

        gallery = harness.curve_gallery(n, lambdas, config.seed, span)
        if config.json_output:
            self._print_json(gallery.to_dict("records"))
        elif config.output is None:
            # stdout carries the table itself
            self._print(gallery.to_csv(index=False).rstrip("\n"))
        if config.output is not None:
            write_curves(gallery, config.fmt, config.output)
            if not config.json_output:
                self._print(f"{len(gallery)} rows written to {config.output}, seed = {config.seed}")


def with_model(base: Scenario, model: GeneratingModel) -> Scenario:
    """Scenario with a new generating model

    Fit lambdas that tracked the old generating lambda track the new one.
    """
    fit_y = None if base.fit_lambda_y == base.model.lam else base.fit_lambda_y
    fit_z = None if base.fit_lambda_z == base.model.lam else base.fit_lambda_z
    return replace(base, model=model, fit_lambda_y=fit_y, fit_lambda_z=fit_z)


def main(argv: Optional[List[str]] = None):
    """Main entry point"""
    cli = PcorTestCLI()
    sys.exit(cli.run(argv))


if __name__ == '__main__':
    main()
