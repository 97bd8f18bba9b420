"""
Tests for the command-line interface.
"""

import json
import os
import sys
import tempfile
import unittest

import yaml
from click.testing import CliRunner

# Add the parent directory to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from airdrop_sybil import __version__
from airdrop_sybil.main import cli
from airdrop_sybil.report import load_report
from airdrop_sybil.synthgen import CONFIG_FILE, TRUTH_FILE

SCENARIO = {
    "seed": 3,
    "chains": ["arbitrum"],
    "n_ordinary_users": 20,
    "accounts_per_bot": 6,
}


def first_json(output):
    """Decode the first JSON object printed to stdout."""
    value, _ = json.JSONDecoder().raw_decode(output[output.index("{"):])
    return value


class TestCli(unittest.TestCase):
    """Tests running the CLI over a simulated bundle."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = self.temp_dir.name
        self.runner = CliRunner()
        self.bundle = os.path.join(self.root, "bundle")
        self.config = os.path.join(self.bundle, CONFIG_FILE)
        self.report = os.path.join(self.root, "report.json")

    def tearDown(self):
        self.temp_dir.cleanup()

    def invoke(self, *args):
        return self.runner.invoke(cli, ["-q", *args])

    def write_scenario(self, data):
        path = os.path.join(self.root, "scenario.yaml")
        with open(path, "w") as f:
            yaml.safe_dump(data, f)
        return path

    def simulate_and_detect(self):
        result = self.invoke("simulate", self.write_scenario(SCENARIO), "-o", self.bundle)
        self.assertEqual(result.exit_code, 0, result.output)
        result = self.invoke("detect", "-c", self.config, "-o", self.report)
        self.assertEqual(result.exit_code, 0, result.output)
        return first_json(result.stdout)

    def test_simulate(self):
        """simulate writes a bundle and summarises it."""
        result = self.invoke("simulate", self.write_scenario(SCENARIO), "-o", self.bundle)
        self.assertEqual(result.exit_code, 0, result.output)
        summary = first_json(result.stdout)
        self.assertEqual(summary["bots"], 5)
        self.assertEqual(len(summary["snapshot_id"]), 16)
        for name in (CONFIG_FILE, TRUTH_FILE, "transactions.jsonl", "events.jsonl"):
            self.assertTrue(os.path.exists(os.path.join(self.bundle, name)))

    def test_detect_and_evaluate(self):
        """detect writes a report that evaluate scores against the truth."""
        summary = self.simulate_and_detect()
        self.assertEqual(summary["report"], self.report)
        self.assertTrue(os.path.exists(self.report))

        result = self.invoke("evaluate", self.report, os.path.join(self.bundle, TRUTH_FILE))
        self.assertEqual(result.exit_code, 0, result.output)
        metrics = first_json(result.stdout)
        self.assertIn("recall", metrics)
        self.assertIn("per_pattern_recall", metrics)
        self.assertGreaterEqual(metrics["recall"], 0.0)
        self.assertLessEqual(metrics["recall"], 1.0)

    def test_export_and_inspect(self):
        """export-dot, inspect and export-matrix work on a fresh report."""
        self.simulate_and_detect()
        report = load_report(self.report)

        dot_dir = os.path.join(self.root, "dots")
        result = self.invoke("export-dot", "-c", self.config, self.report, "-o", dot_dir)
        self.assertEqual(result.exit_code, 0, result.output)
        written = first_json(result.stdout)["files"]
        self.assertEqual(len([f for f in os.listdir(dot_dir) if f.endswith(".dot")]), written)

        cluster = next(report.clusters())
        result = self.invoke("inspect", "-c", self.config, self.report, cluster.cluster_id)
        self.assertEqual(result.exit_code, 0, result.output)

        component = report.components[0]
        csv_path = os.path.join(self.root, "matrix.csv")
        result = self.invoke(
            "export-matrix", "-c", self.config, self.report, component.component_id,
            "--chain", component.chain, "-o", csv_path,
        )
        self.assertEqual(result.exit_code, 0, result.output)
        with open(csv_path) as f:
            header = f.readline().strip().split(",")
        self.assertEqual(len(header), first_json(result.stdout)["accounts"])

    def test_unknown_cluster(self):
        """inspect rejects cluster ids the report does not hold."""
        self.simulate_and_detect()
        result = self.invoke("inspect", "-c", self.config, self.report, "cc-99999-arbitrum-0")
        self.assertEqual(result.exit_code, 2)

    def test_tune(self):
        """tune prints a table followed by the chosen parameters."""
        self.invoke("simulate", self.write_scenario(SCENARIO), "-o", self.bundle)
        result = self.invoke(
            "tune", "-c", self.config, "--chain", "arbitrum",
            "--eps-grid", "0.2,0.4,0.6", "--min-pts-grid", "3",
        )
        self.assertEqual(result.exit_code, 0, result.output)
        chosen = json.loads(result.stdout.strip().splitlines()[-1])
        self.assertEqual(chosen["chain"], "arbitrum")
        self.assertIn(chosen["eps"], [0.2, 0.4, 0.6])
        self.assertEqual(chosen["min_pts"], 3)

    def test_bad_grid(self):
        """A malformed grid is a usage error."""
        self.invoke("simulate", self.write_scenario(SCENARIO), "-o", self.bundle)
        result = self.invoke("tune", "-c", self.config, "--chain", "arbitrum", "--eps-grid", "a,b")
        self.assertEqual(result.exit_code, 2)

    def test_missing_transactions(self):
        """A missing snapshot file exits with status 1."""
        self.invoke("simulate", self.write_scenario(SCENARIO), "-o", self.bundle)
        os.remove(os.path.join(self.bundle, "transactions.jsonl"))
        result = self.invoke("detect", "-c", self.config, "-o", self.report)
        self.assertEqual(result.exit_code, 1)

    def test_unknown_chain(self):
        """Restricting detection to an unconfigured chain exits with status 2."""
        self.invoke("simulate", self.write_scenario(SCENARIO), "-o", self.bundle)
        result = self.invoke("detect", "-c", self.config, "-o", self.report, "--chain", "solana")
        self.assertEqual(result.exit_code, 2)

    def test_invalid_scenario(self):
        """A negative bot count exits with status 2."""
        path = self.write_scenario({"n_radial_bots": -1})
        result = self.invoke("simulate", path, "-o", self.bundle)
        self.assertEqual(result.exit_code, 2)

    def test_evaluate_snapshot_mismatch(self):
        """Truth from another snapshot is rejected."""
        self.simulate_and_detect()
        other = os.path.join(self.root, "other")
        self.invoke("simulate", self.write_scenario(dict(SCENARIO, seed=4)), "-o", other)
        result = self.invoke("evaluate", self.report, os.path.join(other, TRUTH_FILE))
        self.assertEqual(result.exit_code, 2)

    def test_version(self):
        """--version prints the package version."""
        result = self.runner.invoke(cli, ["--version"])
        self.assertEqual(result.exit_code, 0)
        self.assertIn(__version__, result.output)


if __name__ == '__main__':
    unittest.main()
