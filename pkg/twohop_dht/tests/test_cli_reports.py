"""
Unittest for source parsing, report files and the command-line entry point
"""
import json
import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_almost_equal

from ..cli_reports import (DSBS_REFERENCE, EXIT_CONFIG, EXIT_OK, ConfigError, FrontierRow,
                           RegionRow, dsbs_example, main, parse_grid, parse_n_grid,
                           parse_source, read_rows, write_rows)

SOURCE = """# binary example
p_x = 0.6 0.4
p_y_given_x = 0.2 0.8; 0.8 0.2
p_z_given_y = 0.2 0.8
    0.8 0.2
x_size = 2
"""


class TestParseSource(unittest.TestCase):
    def test_valid(self):
        src = parse_source(SOURCE)
        assert_almost_equal(src.p_y.probs, dsbs_example().p_y.probs)
        assert_almost_equal(src.p_z_given_y.rows, [[0.2, 0.8], [0.8, 0.2]])

    def assertConfigError(self, text, line):
        with self.assertRaises(ConfigError) as ctx:
            parse_source(text)
        self.assertEqual(ctx.exception.line, line)

    def test_errors_carry_line_numbers(self):
        self.assertConfigError(SOURCE.replace("0.8 0.2\n", "0.8 abc\n", 1), 3)
        self.assertConfigError(SOURCE.replace("p_y_given_x = 0.2 0.8",
                                              "p_y_given_x = 0.2 0.7"), 3)
        self.assertConfigError(SOURCE.replace("x_size = 2", "x_size = 3"), 6)
        self.assertConfigError(SOURCE + "p_w = 1\n", 7)
        self.assertConfigError(SOURCE.replace("    0.8 0.2", "0.8 0.2"), 5)
        self.assertConfigError(SOURCE + "p_x = 0.5 0.5\n", 7)

    def test_missing_key(self):
        self.assertConfigError("p_x = 0.5 0.5\n", None)


class TestReportFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "rows.csv")

    def tearDown(self):
        self.tmp.cleanup()

    def test_parse_grid(self):
        self.assertEqual(parse_grid("0.3:0.1:0.8"), (0.3, 0.4, 0.5, 0.6, 0.7, 0.8))
        self.assertEqual(parse_grid("0.5"), (0.5,))
        self.assertEqual(parse_grid(""), ())
        self.assertIsNone(parse_grid(None))
        with self.assertRaises(ConfigError):
            parse_grid("1:0:2")
        with self.assertRaises(ConfigError):
            parse_grid("a:b:c")
        self.assertEqual(parse_n_grid("20:10:40"), (20, 30, 40))
        self.assertIsNone(parse_n_grid(None))
        with self.assertRaises(ConfigError):
            parse_n_grid("10:0.5:11")

    def test_region_rows(self):
        rows = [RegionRow(0.5, 0.05, 0.1, 0.2, 0.3, 0.4),
                RegionRow(0.6, 0.05, 1 / 3., 0.25, 0.5, np.float64(0.75))]
        with open(self.path, "w", newline="") as fp:
            write_rows(rows, fp, RegionRow)
        with open(self.path) as fp:
            self.assertEqual(fp.readline().strip(),
                             "r,eps,theta1_fix,theta1_eps,theta2_fix,theta2_eps")
        self.assertEqual(read_rows(self.path), rows)

    def test_frontier_rows(self):
        rows = [FrontierRow("full", "achievable", 0.5, 0.5, 0.05, 0.15, 0.1, 0.36, 0.5, 0.5,
                            runtime=1.5),
                FrontierRow("full", "infeasible", 0.5, 0.5, 0.05, 0.15, 0.3, None, None, None,
                            runtime=0.5)]
        with open(self.path, "w", newline="") as fp:
            write_rows(rows, fp, FrontierRow, timing=True)
        self.assertEqual(read_rows(self.path), rows)
        self.assertIn("runtime", FrontierRow.columns(timing=True))
        self.assertNotIn("runtime", FrontierRow.columns())


class TestMain(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_configuration_errors(self):
        self.assertEqual(main(["--command", "frontier", "--eps1", "0.1", "--eps2", "0.1"]),
                         EXIT_CONFIG)
        self.assertEqual(main(["--command", "simulate", "--trials", "0"]), EXIT_CONFIG)
        self.assertEqual(main(["--command", "region", "--source", self._path("missing.txt")]),
                         EXIT_CONFIG)
        self.assertEqual(main(["--command", "region", "--eps1", "0.1", "--eps2", "0.2"]),
                         EXIT_CONFIG)

    def test_validate_rejects_corrupted_source(self):
        source = self._path("bad.txt")
        with open(source, "w") as fp:
            fp.write(SOURCE.replace("0.8 0.2\n", "0.8 0.3\n", 1))
        out = self._path("report.json")
        self.assertEqual(main(["--command", "validate", "--source", source, "--out", out]),
                         EXIT_CONFIG)
        with open(out) as fp:
            report = json.load(fp)
        self.assertFalse(report["passed"])
        self.assertEqual(report["checks"][0]["name"], "ingest")

    def test_validate_builtin_source(self):
        out = self._path("report.json")
        self.assertEqual(main(["--command", "validate", "--out", out]), EXIT_OK)
        with open(out) as fp:
            report = json.load(fp)
        self.assertTrue(report["passed"])
        names = {c["name"] for c in report["checks"]}
        self.assertIn("reference_theta2_eps", names)
        self.assertIn("oracle_tx-relay_0.5", names)

    def test_empty_region_grid(self):
        out = self._path("region.csv")
        self.assertEqual(main(["--command", "region", "--grid", "", "--out", out]), EXIT_OK)
        with open(out) as fp:
            self.assertEqual(fp.read(), "r,eps,theta1_fix,theta1_eps,theta2_fix,theta2_eps\n")

    def test_region_reference_row(self):
        out = self._path("region.csv")
        self.assertEqual(main(["--command", "region", "--grid", "0.5", "--out", out]), EXIT_OK)
        row, = read_rows(out)
        for key, ref in DSBS_REFERENCE.items():
            self.assertAlmostEqual(getattr(row, key), ref, delta=1e-3)

    def test_frontier_rows(self):
        out = self._path("frontier.csv")
        argv = ["--command", "frontier", "--eps1", "0.05", "--eps2", "0.15", "--grid", "0:0.3:0.3",
                "--out", out]
        self.assertEqual(main(argv), EXIT_OK)
        rows = read_rows(out)
        self.assertEqual([(r.variant, r.status) for r in rows],
                         [("full", "achievable"), ("full", "infeasible"), ("fixed", "corner")])
        self.assertAlmostEqual(rows[0].theta2, 0.375149407228070, delta=2e-3)
        self.assertIsNone(rows[1].theta2)

    def test_simulation_is_reproducible(self):
        argv = ["--command", "simulate", "--r1", "0.05", "--r2", "0.05", "--n", "30",
                "--mu", "0.1", "--trials", "30", "--seed", "4"]
        outputs = []
        for name in ("a.json", "b.json"):
            out = self._path(name)
            transcript = self._path(name + "l")
            self.assertEqual(main(argv + ["--out", out, "--transcript", transcript]), EXIT_OK)
            with open(out) as fp:
                outputs.append(fp.read())
            with open(transcript) as fp:
                self.assertEqual(len(fp.readlines()), 60)
        self.assertEqual(outputs[0], outputs[1])
        report = json.loads(outputs[0])
        self.assertEqual(report["regime"], "equal")
        self.assertEqual(report["stats"]["trials"], 30)

    def test_simulation_sweep(self):
        out = self._path("sweep.json")
        argv = ["--command", "simulate", "--r1", "0.05", "--r2", "0.05", "--n", "20",
                "--n-grid", "20:10:30", "--mu", "0.1", "--trials", "20", "--out", out]
        self.assertEqual(main(argv), EXIT_OK)
        with open(out) as fp:
            sweep = json.load(fp)["sweep"]
        self.assertEqual([p["n"] for p in sweep["points"]], [20, 30])
        self.assertEqual([p["mu"] for p in sweep["points"]], [0.1, 0.1])
        self.assertIn("fitted_beta2", sweep)
        self.assertIn("atypical_count", sweep["points"][0])
        self.assertEqual(main(argv[:-2] + ["--n-grid", "20", "--out", out]), EXIT_CONFIG)
        self.assertEqual(main(argv[:-2] + ["--n-grid", "20.5:1:22", "--out", out]),
                         EXIT_CONFIG)

    def test_oversized_codebook(self):
        argv = ["--command", "simulate", "--n", "100", "--mu", "0.1", "--trials", "1",
                "--out", self._path("sim.json")]
        self.assertEqual(main(argv), EXIT_CONFIG)


if __name__ == '__main__':
    unittest.main()
