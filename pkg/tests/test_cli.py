"""
Tests for the pcortest command-line interface
"""
import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

from inference.errors import (
    DegenerateDataError,
    DomainError,
    InputFormatError,
    InterpolationInfeasibleError,
    ScenarioFailureError,
)
from pcortest_cli.cli import (
    EXIT_DEGENERATE,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    WORKERS_ENV,
    PcorTestCLI,
    default_workers,
    exit_code_for,
)
from simulation.presets import BREAKDOWN_SPAN
from simulation.reports import read_report


class CLITestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def invoke(self, *argv):
        """Run the CLI, returning (exit code, stdout, stderr)"""
        out = io.StringIO()
        err = io.StringIO()
        with contextlib.redirect_stderr(err):
            code = PcorTestCLI(stdout=out).run(list(argv))
        return code, out.getvalue(), err.getvalue()

    def write(self, name, text):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return path


class TestTestCommand(CLITestCase):
    def dump(self, rho, seed="7"):
        path = self.path(f"dump-{rho}.csv")
        code, _, _ = self.invoke("simulate", "--n", "100", "--lambda", "0.5", "--rho", str(rho),
                                 "--replications", "1", "--seed", seed, "--dump", path, "-q")
        self.assertEqual(code, EXIT_OK)
        return path

    def test_detects_dependence(self):
        path = self.dump(0.7)
        code, out, _ = self.invoke("test", "--input", path, "--lambda-y", "0.5", "--lambda-z", "0.5",
                                   "--seed", "3", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        result = json.loads(out)
        self.assertLess(result["p_value"], 0.05)
        self.assertEqual(result["b"], 999)
        self.assertEqual(result["seed"], 3)
        self.assertEqual(result["lambda_y"], 0.5)

    def test_seed_replay(self):
        path = self.dump(0.0)
        args = ("test", "--input", path, "--sigma0", "1", "--sigma-eps", "0.5", "--seed", "11", "--json", "-q")
        first = self.invoke(*args)
        self.assertEqual(first[0], EXIT_OK)
        self.assertEqual(self.invoke(*args)[1], first[1])

    def test_generated_seed_printed(self):
        path = self.dump(0.0)
        code, out, _ = self.invoke("test", "--input", path, "--lambda-y", "0.5", "--lambda-z", "0.5", "-q")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("seed = ", out)
        self.assertIn("p-value = ", out)

    def test_linear_estimator(self):
        path = self.dump(0.3)
        code, out, _ = self.invoke("test", "--input", path, "--estimator", "linear", "--seed", "1", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        result = json.loads(out)
        self.assertEqual(result["df"], 97)
        self.assertIn("t_p_value", result)

    def test_exact(self):
        path = self.write("small.csv", "x,y,z\n1,0.3,1.2\n2,1.1,0.4\n3,0.2,0.9\n4,1.7,2.2\n5,0.9,0.1\n6,1.4,1.0\n")
        code, out, _ = self.invoke("test", "--input", path, "--lambda-y", "0.5", "--lambda-z", "0.5",
                                   "--exact", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        result = json.loads(out)
        self.assertEqual(result["mode"], "exact")
        self.assertEqual(result["b"], 720)

    def test_non_numeric_cell(self):
        path = self.write("bad.csv", "x,y,z\n1,2,3\n2,3,4\n3,4,five\n4,1,1\n5,2,2\n")
        code, _, err = self.invoke("test", "--input", path, "--lambda-y", "0.5", "--lambda-z", "0.5", "-q")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("row 3", err)
        self.assertIn("column 'z'", err)

    def test_constant_response(self):
        path = self.write("flat.csv", "x,y,z\n1,2,3\n2,2,4\n3,2,1\n4,2,1\n5,2,2\n6,2,5\n")
        code, _, _ = self.invoke("test", "--input", path, "--lambda-y", "0.5", "--lambda-z", "0.5", "-q")
        self.assertEqual(code, EXIT_DEGENERATE)

    def test_missing_smoothing(self):
        path = self.dump(0.0)
        code, _, err = self.invoke("test", "--input", path, "-q")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("--lambda-y", err)

    def test_missing_input_flag(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                PcorTestCLI(stdout=io.StringIO()).run(["test"])
        self.assertEqual(ctx.exception.code, 2)


class TestSimulationCommands(CLITestCase):
    def test_preset_list(self):
        code, out, _ = self.invoke("simulate", "--preset", "list")
        self.assertEqual(code, EXIT_OK)
        for name in ("paper-breakdown", "paper-fig2", "paper-fig3", "paper-theorem"):
            self.assertIn(name, out)

    def test_unknown_preset(self):
        code, _, err = self.invoke("simulate", "--preset", "paper-nothing", "--seed", "1", "-q")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("paper-breakdown", err)

    def test_preset_for_other_command(self):
        code, _, _ = self.invoke("power", "--preset", "paper-breakdown", "--seed", "1", "-q")
        self.assertEqual(code, EXIT_USAGE)

    def test_breakdown_preset(self):
        """The breakdown preset reports the linear fit next to the spline fit"""
        output = self.path("breakdown.csv")
        code, out, _ = self.invoke("simulate", "--preset", "paper-breakdown", "--replications", "20",
                                   "--seed", "4", "--output", output, "-q")
        self.assertEqual(code, EXIT_OK)
        records = read_report(output)
        self.assertEqual([r["estimator"] for r in records], ["linear", "spline"])
        for record in records:
            self.assertEqual(record["n"], 100)
            self.assertEqual(record["lambda"], 0.5)
            self.assertEqual(record["span"], BREAKDOWN_SPAN)
            self.assertEqual(record["master_seed"], 4)
        self.assertEqual(records[0]["scenario_id"], records[1]["scenario_id"])
        self.assertIn("seed = 4", out)

    def test_breakdown_preset_estimator_flag(self):
        code, out, _ = self.invoke("simulate", "--preset", "paper-breakdown", "--estimator", "spline",
                                   "--replications", "5", "--seed", "4", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual([r["estimator"] for r in json.loads(out)], ["spline"])

    def test_lambda_aliases(self):
        """--lambda-y/--lambda-z set the fitting lambdas on simulation commands too"""
        code, out, _ = self.invoke("simulate", "--n", "20", "--lambda-y", "0.2", "--lambda-z", "0.3",
                                   "--replications", "5", "--seed", "1", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        record = json.loads(out)[0]
        self.assertEqual(record["fit_lambda_y"], 0.2)
        self.assertEqual(record["fit_lambda_z"], 0.3)
        self.assertEqual(record["lambda"], 0.5)

    def test_lambda_with_sigma_eps(self):
        code, out, err = self.invoke("simulate", "--n", "20", "--lambda", "0.5", "--sigma-eps", "0.3",
                                     "--replications", "5", "--seed", "1", "--json", "-q")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("--sigma-eps", err)

    def test_type1_preset_expands(self):
        code, out, _ = self.invoke("simulate", "--preset", "paper-type1", "--replications", "5",
                                   "--seed", "1", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        records = json.loads(out)
        self.assertEqual(len(records), 8)
        self.assertEqual(sorted({r["n"] for r in records}), [20, 100])
        self.assertTrue(all(r["fit_lambda_y"] == r["lambda"] for r in records))

    def test_flags_override_preset(self):
        code, out, _ = self.invoke("simulate", "--preset", "paper-undersmooth", "--n", "30",
                                   "--replications", "10", "--seed", "1", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        record = json.loads(out)[0]
        self.assertEqual(record["n"], 30)
        self.assertEqual(record["replications"], 10)
        self.assertAlmostEqual(record["fit_lambda_y"], 0.5 / 3)

    def test_workers_do_not_change_reports(self):
        files = []
        for workers in ("1", "4"):
            output = self.path(f"w{workers}.json")
            code, _, _ = self.invoke("simulate", "--n", "20", "--replications", "150", "--b", "99",
                                     "--seed", "9", "--workers", workers, "--output", output, "-q")
            self.assertEqual(code, EXIT_OK)
            records = read_report(output)
            for record in records:
                record.pop("runtime_seconds")
            files.append(records)
        self.assertEqual(files[0], files[1])

    def test_power(self):
        code, out, _ = self.invoke("power", "--n", "20", "--rho-grid", "0,0.5", "--replications", "10",
                                   "--seed", "2", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(json.loads(out)), 4)

    def test_robustness(self):
        code, out, _ = self.invoke("robustness", "--preset", "paper-oversmooth", "--n", "20",
                                   "--replications", "10", "--seed", "2", "--json", "-q")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual([r["fit_lambda_y"] for r in json.loads(out)], [0.75, 1.0, 1.5])

    def test_robustness_needs_grid(self):
        code, _, _ = self.invoke("robustness", "--seed", "2", "-q")
        self.assertEqual(code, EXIT_USAGE)

    def test_convergence(self):
        output = self.path("conv.csv")
        code, out, _ = self.invoke("convergence", "--n-grid", "10,20", "--replications", "5",
                                   "--seed", "3", "--output", output, "-q")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual([r["n"] for r in read_report(output)], [10, 20])
        self.assertIn("n=10", out)

    def test_convergence_bad_grid(self):
        code, _, _ = self.invoke("convergence", "--n-grid", "20,10", "--replications", "5", "--seed", "3", "-q")
        self.assertEqual(code, EXIT_USAGE)

    def test_curves(self):
        output = self.path("curves.csv")
        code, _, _ = self.invoke("curves", "--n", "15", "--lambda-grid", "0.1,0.7", "--seed", "5",
                                 "--output", output, "-q")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(read_report(output)), 30)

    def test_invalid_rho(self):
        code, _, _ = self.invoke("simulate", "--rho", "1.5", "--replications", "5", "--seed", "1", "-q")
        self.assertEqual(code, EXIT_USAGE)


class TestHelpers(unittest.TestCase):
    def test_exit_codes(self):
        self.assertEqual(exit_code_for(DomainError("x")), EXIT_USAGE)
        self.assertEqual(exit_code_for(InputFormatError("x", row=1)), EXIT_USAGE)
        self.assertEqual(exit_code_for(DegenerateDataError("x")), EXIT_DEGENERATE)
        self.assertEqual(exit_code_for(InterpolationInfeasibleError("x")), EXIT_NUMERICAL)
        self.assertEqual(exit_code_for(ScenarioFailureError("x")), EXIT_NUMERICAL)

    def test_workers_env(self):
        with mock.patch.dict(os.environ, {WORKERS_ENV: "3"}):
            self.assertEqual(default_workers(), 3)
        with mock.patch.dict(os.environ, {WORKERS_ENV: "many"}):
            with self.assertRaises(DomainError):
                default_workers()
        with mock.patch.dict(os.environ, {WORKERS_ENV: "0"}):
            with self.assertRaises(DomainError):
                default_workers()
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(default_workers(), 1)


if __name__ == '__main__':
    unittest.main()
