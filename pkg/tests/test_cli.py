import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from mfalloc import models
from mfalloc.bifidelity import Ensemble
from mfalloc.cli import main
from mfalloc.ensemble_io import load_ensemble, save_ensemble
from mfalloc.models import ModelName

TOY = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
TOY[:, 2] /= np.sqrt(2.0)


def run(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        code = main(list(argv))
    return code, stdout.getvalue(), stderr.getvalue()


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def write(self, name, snapshots, parameters=None):
        snapshots = np.asarray(snapshots, dtype=float)
        if parameters is None:
            parameters = np.arange(snapshots.shape[1], dtype=float)
        return save_ensemble(self.path(name), Ensemble(snapshots, parameters))


class TestSelectCommand(CliTestCase):

    def test_gomp_and_cholesky_on_toy(self):
        toy = self.write("toy.mfa", TOY)
        code, out, _ = run("select", toy, "--method", "gomp", "-m", "1")
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)["indices"], [3])
        code, out, _ = run("select", toy, "--method", "chol", "-m", "1")
        self.assertEqual(json.loads(out)["indices"], [1])
        self.assertEqual(set(json.loads(out)), {"method", "indices", "scores", "termination"})

    def test_repeated_runs_are_identical(self):
        rng = np.random.default_rng(0)
        path = self.write("rand.mfa", rng.standard_normal((6, 20)))
        for method in ("chol", "rand"):
            first = run("select", path, "--method", method, "-m", "5", "--seed", "42")
            second = run("select", path, "--method", method, "-m", "5", "--seed", "42")
            self.assertEqual(first, second)

    def test_unknown_method(self):
        toy = self.write("toy.mfa", TOY)
        code, _, err = run("select", toy, "--method", "svd", "-m", "1")
        self.assertEqual(code, 2)
        for name in ("rand", "lev", "qr", "chol", "lu", "gomp"):
            self.assertIn(name, err)

    def test_csv_format(self):
        toy = self.write("toy.mfa", TOY)
        code, out, _ = run("select", toy, "--method", "qr", "-m", "2", "--format", "csv")
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertEqual(lines[0], "step,index,score")
        self.assertEqual(lines[1].split(",")[:2], ["1", "1"])
        self.assertEqual(lines[-1], "termination,reached_target,")

    def test_missing_file(self):
        code, _, err = run("select", self.path("absent.mfa"), "--method", "gomp", "-m", "1")
        self.assertEqual(code, 2)
        self.assertIn("absent.mfa", err)


class TestGenerateCommand(CliTestCase):

    def test_single_point_burgers(self):
        code, out, _ = run("generate", "--model", "burgers", "--counts", "1", "1", "--out", self.tmp.name)
        self.assertEqual(code, 0)
        files = json.loads(out)["files"]
        low, high = (load_ensemble(path).ensemble for path in files)
        self.assertEqual((low.n_points, high.n_points), (1, 1))
        self.assertEqual((low.dim, high.dim), (42, 258))
        code, out, _ = run("select", files[0], "--method", "gomp", "-m", "1")
        self.assertEqual(json.loads(out)["indices"], [1])

    def test_byte_identical_reruns(self):
        first_dir, second_dir = self.path("a"), self.path("b")
        run("generate", "--model", "burgers", "--counts", "2", "2", "--out", first_dir)
        run("generate", "--model", "burgers", "--counts", "2", "2", "--out", second_dir)
        for name in ("burgers_low.mfa", "burgers_high.mfa"):
            with open(os.path.join(first_dir, name), "rb") as a, open(os.path.join(second_dir, name), "rb") as b:
                self.assertEqual(a.read(), b.read())

    def test_pendulum_row_counts(self):
        code, out, _ = run("generate", "--model", "pendulum", "--counts", "1", "1", "--out", self.tmp.name)
        self.assertEqual(code, 0)
        low, high = (load_ensemble(path).ensemble for path in json.loads(out)["files"])
        self.assertEqual((low.dim, high.dim), (61, 1501))

    def test_solver_failure_exit_code(self):
        def failing(point, fidelity):
            return np.zeros(3), False, "did not converge"

        with mock.patch.dict(models._SOLVERS, {ModelName.BURGERS: failing}):
            code, _, err = run("generate", "--model", "burgers", "--counts", "1", "1", "--out", self.tmp.name)
        self.assertEqual(code, 3)
        self.assertIn("parameter point", err)

    def test_bad_counts(self):
        code, _, _ = run("generate", "--model", "burgers", "--counts", "3", "--out", self.tmp.name)
        self.assertEqual(code, 2)


class TestVerifyCommand(CliTestCase):

    def test_planted_instance_meets_conditions(self):
        code, out, _ = run("generate", "--model", "synthetic", "--seed", "7", "--out", self.tmp.name)
        self.assertEqual(code, 0)
        path = json.loads(out)["files"][0]
        code, out, _ = run("verify", path)
        self.assertEqual(code, 0)
        diagnostics = json.loads(out)
        self.assertTrue(all(diagnostics["conditions_met"].values()))
        self.assertLessEqual(diagnostics["d_bar"], 0.7)

    def test_unit_in_span_column_fails(self):
        toy = self.write("toy.mfa", TOY)
        code, out, _ = run("verify", toy, "--basis", "1,2")
        self.assertEqual(code, 1)
        self.assertAlmostEqual(json.loads(out)["d_bar"], 1.41421, delta=1e-5)

    def test_worked_consistency_example(self):
        A = np.array([[1.0, 0.0, 0.3], [0.0, 1.0, 0.4], [0.0, 0.0, 0.0]])
        path = self.write("d07.mfa", A)
        code, out, _ = run("verify", path, "--basis", "1 2")
        self.assertEqual(code, 0)
        self.assertAlmostEqual(json.loads(out)["d_bar"], 0.7, delta=1e-5)

    def test_empty_basis_is_usage_error(self):
        toy = self.write("toy.mfa", TOY)
        code, _, _ = run("verify", toy, "--basis", "")
        self.assertEqual(code, 2)

    def test_rank_deficient_basis(self):
        path = self.write("deficient.mfa", [[1.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
        code, _, err = run("verify", path, "--basis", "1,2")
        self.assertEqual(code, 2)
        self.assertIn("rank deficient", err)


class TestSweepAndOracleCommands(CliTestCase):

    def setUp(self):
        super().setUp()
        rng = np.random.default_rng(3)
        latent = rng.standard_normal((3, 15))
        self.low = self.write("low.mfa", rng.standard_normal((8, 3)) @ latent + 1e-3 * rng.standard_normal((8, 15)))
        self.high = self.write("high.mfa", rng.standard_normal((12, 3)) @ latent)

    def test_csv_independent_of_workers(self):
        common = ("--sizes", "1,2,3,4", "--trials", "10", "--seed", "5")
        code, _, _ = run("sweep", self.low, self.high, *common, "--workers", "1", "--out", self.path("one.csv"))
        self.assertEqual(code, 0)
        run("sweep", self.low, self.high, *common, "--workers", "8", "--out", self.path("eight.csv"))
        with open(self.path("one.csv"), "rb") as one, open(self.path("eight.csv"), "rb") as eight:
            content = one.read()
            self.assertEqual(content, eight.read())
        rows = content.decode().splitlines()
        self.assertEqual(rows[0], "method,subset_size,low_error,high_error,seed")
        self.assertEqual(len(rows) - 1, 5 * 4 + 10 * 4)

    def test_plot_data_and_rank_k(self):
        code, out, _ = run(
            "sweep", self.low, self.high, "--methods", "gomp,rand", "--sizes", "1 2", "--trials", "3",
            "--rank-k", "--plot-data", self.path("plot.dat"),
        )
        self.assertEqual(code, 0)
        self.assertIn("rank-k,1,", out)
        with open(self.path("plot.dat"), encoding="utf-8") as file:
            header = file.readline().split()
        self.assertEqual(header, ["#", "subset_size", "gomp", "rand", "rand_min", "rand_max", "rank-k"])

    def test_default_sizes_fit_small_ensembles(self):
        code, out, _ = run("sweep", self.low, self.high, "--methods", "qr", "--format", "json")
        self.assertEqual(code, 0)
        self.assertEqual([row["subset_size"] for row in json.loads(out)], list(range(1, 16)))

    def test_default_sweep_on_wide_synthetic_file(self):
        code, out, _ = run("generate", "--model", "synthetic", "--out", self.tmp.name)
        path = json.loads(out)["files"][0]
        code, out, _ = run("sweep", path, path, "--trials", "2")
        self.assertEqual(code, 0)
        lev_sizes = [int(line.split(",")[1]) for line in out.splitlines() if line.startswith("lev,")]
        self.assertEqual(lev_sizes, list(range(1, 21)))

    def test_files_from_run_config(self):
        config_path = self.path("run.json")
        with open(config_path, "w", encoding="utf-8") as file:
            json.dump({"low_path": self.low, "high_path": self.high, "methods": ["qr"], "sizes": [1, 2]}, file)
        code, out, _ = run("sweep", "--config", config_path)
        self.assertEqual(code, 0)
        self.assertEqual(len(out.splitlines()), 3)
        code, _, err = run("sweep", "--sizes", "1")
        self.assertEqual(code, 2)
        self.assertIn("low_path", err)

    def test_grid_mismatch(self):
        shifted = self.write("shifted.mfa", np.ones((12, 15)), np.arange(15.0) + 0.5)
        code, _, err = run("sweep", self.low, shifted, "--sizes", "1")
        self.assertEqual(code, 2)
        self.assertIn("parameter grid", err)

    def test_oracle_on_toy(self):
        toy = self.write("toy.mfa", TOY)
        code, out, _ = run("oracle", toy, "-m", "1")
        self.assertEqual(code, 0)
        payload = json.loads(out)
        self.assertEqual(payload["indices"], [3])
        self.assertAlmostEqual(payload["residual"], 1.0, places=12)


if __name__ == "__main__":
    unittest.main()
