#!/usr/bin/env python3
"""
tfoc - Integration Test Suite
The HTTP tool endpoints and the command-line interface end to end
"""

import json
import math
import os
import sys
import tempfile
import unittest

import numpy as np
from click.testing import CliRunner

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '.'))

from config import Config
from tfoc import create_app
from tfoc.cli import main
from tfoc.services.corpus import SignalSpec, bandlimited_symbol
from tfoc.services.grid import l2_norm, make_grid
from tfoc.services.quantize import exchange
from tfoc.services.tables import load_symbol, save_table


PSEUDOMOD_EXPERIMENT = {"experiment_id": "weyl", "kind": "pseudomod", "N_list": [16], "corpus_size": 3,
                        "t": 0.5, "exponents": [2]}


class IntegrationConfig(Config):
    TESTING = True
    LOG_LEVEL = 'ERROR'
    WORKERS = 1


class TestToolEndpoints(unittest.TestCase):
    """HTTP endpoints through the Flask test client"""

    @classmethod
    def setUpClass(cls):
        cls.app = create_app(IntegrationConfig)
        cls.client = cls.app.test_client()

    def test_01_index_and_health(self):
        response = self.client.get('/health')
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.get_json()["status"], "healthy")
        index = self.client.get('/').get_json()
        self.assertEqual(index["service"], "tfoc")
        self.assertEqual(index["endpoints"]["run"], "/api/tools/run")

    def test_02_tool_listing(self):
        data = self.client.get('/api/tools').get_json()
        self.assertEqual([tool["name"] for tool in data["tools"]], ["mod_norm", "schatten", "run"])
        self.assertIn("capabilities", data)

    def test_03_gaussian_norm(self):
        """M^{2,2} of a Gaussian packet equals its L2 norm"""
        response = self.client.post('/api/tools/norm', json={
            "N": 32, "gaussian": {"width": 1.0, "center": 0.5, "modulation": 1.0}, "p": 2})
        self.assertEqual(response.status_code, 200)
        data = response.get_json()
        expected = l2_norm(SignalSpec(1.0, 0.5, 1.0).sample(make_grid(32)))
        self.assertAlmostEqual(data["norm"], expected, places=10)
        self.assertEqual(data["spec"]["q"], "2")

    def test_04_norm_of_values(self):
        values = np.exp(-make_grid(16).x_nodes ** 2).tolist()
        response = self.client.post('/api/tools/norm', json={
            "N": 16, "values": {"real": values, "imag": [0.0] * 16}, "p": 1, "q": "inf",
            "weight": "bracket_power(1)"})
        self.assertEqual(response.status_code, 200)
        self.assertGreater(response.get_json()["norm"], 0.0)

    def test_05_invalid_requests(self):
        """Bad grids, bodies and descriptors come back as 400 errors"""
        cases = [
            {"N": 15, "gaussian": {}},
            {"N": "abc", "gaussian": {}},
            {"N": 16},
            {"N": 16, "gaussian": {"width": "wide"}},
            {"N": 16, "values": [1.0] * 8},
            {"N": 16, "gaussian": {}, "weight": "spiral(1)"},
            {"N": 16, "gaussian": {}, "p": 0.5},
        ]
        for payload in cases:
            response = self.client.post('/api/tools/norm', json=payload)
            self.assertEqual(response.status_code, 400, payload)
            self.assertIn("message", response.get_json()["error"])
        response = self.client.post('/api/tools/norm', data="not json", content_type="text/plain")
        self.assertEqual(response.status_code, 400)

    def test_06_schatten_identity(self):
        """The kernel I / h has unit singular values"""
        grid = make_grid(16)
        kernel = (np.eye(16) / grid.spacing).tolist()
        response = self.client.post('/api/tools/schatten', json={"N": 16, "kernel": kernel})
        self.assertEqual(response.status_code, 200)
        norms = response.get_json()["norms"]
        self.assertAlmostEqual(norms["1"], 16.0, places=9)
        self.assertAlmostEqual(norms["inf"], 1.0, places=9)

    def test_07_inline_run(self):
        response = self.client.post('/api/tools/run', json={"experiments": [PSEUDOMOD_EXPERIMENT]})
        self.assertEqual(response.status_code, 200)
        bundle = response.get_json()
        self.assertTrue(bundle["pass"])
        self.assertEqual(bundle["experiments"][0]["experiment_id"], "weyl")
        response = self.client.post('/api/tools/run', json={"experiments": [{"kind": "pseudomod"}]})
        self.assertEqual(response.status_code, 400)

    def test_08_unknown_route(self):
        response = self.client.get('/api/tools/missing')
        self.assertEqual(response.status_code, 404)
        self.assertEqual(response.get_json()["error"]["status_code"], 404)


class TestCommandLine(unittest.TestCase):
    """The tfoc command through click's test runner"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.runner = CliRunner()
        self.grid = make_grid(16)

    def _path(self, name):
        return os.path.join(self.tmp.name, name)

    def _invoke(self, *args):
        return self.runner.invoke(main, ["--log-level", "ERROR", "--log-dir", self._path("logs"), *args])

    def test_01_version(self):
        result = self.runner.invoke(main, ["--version"])
        self.assertEqual(result.exit_code, 0)
        self.assertIn(Config.APP_VERSION, result.output)

    def test_02_norm(self):
        signal = SignalSpec(0.8, -0.3, 2.0).sample(self.grid)
        save_table(self._path("signal.csv"), signal.values, self.grid)
        result = self._invoke("norm", "--signal", self._path("signal.csv"), "--output", self._path("norms.csv"))
        self.assertEqual(result.exit_code, 0, result.output)
        data = json.loads(result.output)
        self.assertAlmostEqual(data["norm"], l2_norm(signal), places=10)
        self.assertTrue(os.path.exists(self._path("norms.csv")))

    def test_03_fio_then_schatten(self):
        """K_{b,phi} for the linear phase has ||K||_2 = sqrt(2 pi) h ||b||_F"""
        b = bandlimited_symbol(self.grid, np.random.default_rng(3))
        save_table(self._path("symbol.csv"), b.values, self.grid)
        result = self._invoke("fio", "--phase", "linear", "--symbol", self._path("symbol.csv"),
                              "--output", self._path("kernel.csv"))
        self.assertEqual(result.exit_code, 0, result.output)
        result = self._invoke("schatten", "--kernel", self._path("kernel.csv"))
        self.assertEqual(result.exit_code, 0, result.output)
        norms = json.loads(result.output)["norms"]
        expected = math.sqrt(2 * math.pi) * self.grid.spacing * np.linalg.norm(b.values)
        self.assertAlmostEqual(norms["2"] / expected, 1.0, places=9)

    def test_04_quantize_exchange(self):
        b = bandlimited_symbol(self.grid, np.random.default_rng(4))
        save_table(self._path("symbol.csv"), b.values, self.grid)
        result = self._invoke("quantize", "--symbol", self._path("symbol.csv"), "--t", "0", "--to-t", "0.5",
                              "--output", self._path("weyl.csv"))
        self.assertEqual(result.exit_code, 0, result.output)
        np.testing.assert_allclose(load_symbol(self._path("weyl.csv")).values, exchange(b, 0.0, 0.5).values,
                                   atol=1e-12)
        result = self._invoke("quantize", "--symbol", self._path("symbol.csv"), "--output", self._path("k.csv"))
        self.assertEqual(result.exit_code, 0, result.output)

    def test_05_error_exit_codes(self):
        """Configuration errors exit with 2"""
        save_table(self._path("symbol.csv"), np.ones((16, 16)), self.grid)
        result = self._invoke("fio", "--phase", "spiral", "--symbol", self._path("symbol.csv"),
                              "--output", self._path("kernel.csv"))
        self.assertEqual(result.exit_code, 2)
        result = self._invoke("run", "--config", self._path("missing.json"), "--report-dir", self._path("out"))
        self.assertEqual(result.exit_code, 2)

    def test_06_run(self):
        config_path = self._path("config.json")
        with open(config_path, "w") as handle:
            json.dump({"experiments": [PSEUDOMOD_EXPERIMENT]}, handle)
        result = self._invoke("run", "--config", config_path, "--report-dir", self._path("out"), "--workers", "1")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("weyl: PASS", result.output)
        self.assertTrue(os.path.exists(self._path(os.path.join("out", "bundle.json"))))


if __name__ == '__main__':
    unittest.main()
