"""
Acceptance tests: the reference experiments at their stated sizes

These run thousands of replications each and take a few minutes in total.
"""
import math
import os
import tempfile
import unittest
from dataclasses import replace

import numpy as np
from scipy.integrate import dblquad

from inference.permutation.perm_test import perm_test_exact, perm_test_mc
from inference.rng import philox_stream
from inference.smoothing.spline_smoother import ResidualPair
from inference.types import Estimator
from inference.wiener.wiener_sim import GeneratingModel, iwp_kernel
from simulation import harness
from simulation.harness import Scenario
from simulation.presets import PRESETS, get_preset
from simulation.reports import read_report, write_convergence, write_curves, write_report

SEED = 20240501


def spline_scenario(n=100, lam=0.5, rho=0.0, **kwargs):
    return Scenario(n=n, model=GeneratingModel.from_lambda(lam, rho), master_seed=SEED, **kwargs)


class TestReferenceExperiments(unittest.TestCase):
    def test_linear_breakdown(self):
        """Straight-line fits on curved regressions reject a true null far too often"""
        preset = get_preset("paper-breakdown")
        base = replace(preset.base, master_seed=SEED)
        self.assertEqual(preset.estimators, (Estimator.LINEAR, Estimator.SPLINE))
        linear = harness.run_scenario(base, workers=4)
        spline = harness.run_scenario(replace(base, estimator=Estimator.SPLINE), workers=4)
        rates = dict(linear=linear.rejection_rate, spline=spline.rejection_rate)
        self.assertEqual(linear.completed, 2000)
        self.assertEqual(spline.completed, 2000)
        self.assertGreaterEqual(linear.rejection_rate, 0.64, rates)
        self.assertLessEqual(linear.rejection_rate, 0.78, rates)

    def test_spline_type1(self):
        for n in (20, 100):
            for lam in (0.3, 0.5, 0.7):
                report = harness.run_scenario(spline_scenario(n=n, lam=lam), workers=4)
                self.assertGreaterEqual(report.rejection_rate, 0.035, (n, lam))
                self.assertLessEqual(report.rejection_rate, 0.065, (n, lam))

    def test_undersmoothing_by_three(self):
        s = spline_scenario(fit_lambda_y=0.5 / 3, fit_lambda_z=0.5 / 3, replications=5000)
        rate = harness.run_scenario(s, workers=4).rejection_rate
        self.assertGreaterEqual(rate, 0.045)
        self.assertLessEqual(rate, 0.075)

    def test_oversmoothing(self):
        for report in harness.robustness_sweep(spline_scenario(), (0.75, 1.0, 1.5), workers=4):
            self.assertLessEqual(report.rejection_rate, 0.065, report.scenario.fit_lambda_y)

    def test_little_power_loss(self):
        spline, oracle = harness.power_curve(spline_scenario(), (0.5,), workers=4)
        self.assertIs(oracle.scenario.estimator, Estimator.ORACLE)
        self.assertLessEqual(oracle.rejection_rate - spline.rejection_rate, 0.07)

    def test_convergence(self):
        for rho in (0.0, 0.5):
            rows = harness.convergence_check((50, 200, 800), GeneratingModel.from_lambda(0.5, rho),
                                             200, seed=SEED, workers=4)
            medians = [row.median_abs_r_gap for row in rows]
            self.assertLess(medians[1], medians[0], rho)
            self.assertLess(medians[2], medians[1], rho)

    def test_oracle_null_validity(self):
        report = harness.run_scenario(
            spline_scenario(n=20, estimator=Estimator.ORACLE, replications=20000), workers=4)
        self.assertLessEqual(abs(report.rejection_rate - 0.05), 4.0 * math.sqrt(0.05 * 0.95 / 20000))


class TestEngineOracles(unittest.TestCase):
    def test_permutation_engines_agree(self):
        rng = philox_stream(SEED)
        b = 100000
        for k in range(20):
            n = 3 + k % 4
            res = ResidualPair.from_errors(rng.standard_normal(n), rng.standard_normal(n))
            exact = perm_test_exact(res).p_value
            mc = perm_test_mc(res, b=b, seed=SEED + k, workers=4).p_value
            self.assertLessEqual(abs(mc - exact), 3.0 * math.sqrt(exact * (1 - exact) / b))

    def test_three_point_fixture(self):
        res = ResidualPair.from_errors([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]).centered()
        self.assertAlmostEqual(perm_test_exact(res).p_value, 2.0 / 6.0, places=15)

    def test_kernel_against_quadrature(self):
        self.assertAlmostEqual(iwp_kernel(1.0, 1.0, 1.0), 1.0 / 3.0, places=15)
        for s in np.linspace(0.1, 1.0, 10):
            for t in np.linspace(0.1, 1.0, 10):
                value, _ = dblquad(lambda v, u: min(u, v), 0.0, s, lambda u: 0.0, lambda u, t=t: t)
                self.assertLess(abs(iwp_kernel(s, t) - value), 1e-6)


class TestPresetDeterminism(unittest.TestCase):
    """Reports repeat exactly for a fixed seed and any worker count"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def run_preset(self, preset, workers, tag):
        base = replace(preset.base, replications=40, master_seed=SEED)
        path = os.path.join(self.tmp.name, f"{preset.name}-{tag}.csv")
        if preset.command == "simulate":
            estimators = preset.estimators or (base.estimator,)
            reports = [harness.run_scenario(replace(base, estimator=e), workers) for e in estimators]
            write_report(reports, "csv", path)
        elif preset.command == "power":
            write_report(harness.power_curve(base, preset.rho_grid, workers), "csv", path)
        elif preset.command == "robustness":
            write_report(harness.robustness_sweep(base, preset.fit_lambda_grid, workers), "csv", path)
        elif preset.command == "convergence":
            rows = harness.convergence_check(preset.n_grid, base.model, 20, SEED, workers=workers)
            write_convergence(rows, "csv", path)
        else:
            write_curves(harness.curve_gallery(preset.base.n, preset.curve_lambdas, SEED), "csv", path)
        records = read_report(path)
        for record in records:
            record.pop("runtime_seconds", None)
        return records

    def test_presets(self):
        for preset in PRESETS.values():
            first = self.run_preset(preset, 1, "a")
            self.assertEqual(self.run_preset(preset, 1, "b"), first, preset.name)
            self.assertEqual(self.run_preset(preset, 8, "c"), first, preset.name)


if __name__ == '__main__':
    unittest.main()
