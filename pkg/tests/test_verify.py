"""
Verification Tests
==================

Tests for each verification check with constructed configs.
"""

import math
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory
from unittest.mock import MagicMock, patch

from cat_aqec.config import ExperimentConfig
from cat_aqec.verify import (
    CheckResult,
    Status,
    check_config_valid,
    check_numerics,
    check_output_dir,
    check_python_version,
    check_selective_pulse,
    check_strong_dispersive,
    check_truncation,
    check_waiting_time,
    run_verify,
)


class TestCheckPythonVersion(unittest.TestCase):
    def test_current_version_passes(self) -> None:
        result = check_python_version()
        self.assertEqual(result.status, "PASS")

    @patch("cat_aqec.verify.sys")
    def test_old_version_fails(self, mock_sys: MagicMock) -> None:
        mock_sys.version_info = (3, 9, 0)
        result = check_python_version()
        self.assertEqual(result.status, "FAIL")


class TestCheckNumerics(unittest.TestCase):
    def test_installed(self) -> None:
        result = check_numerics()
        self.assertEqual(result.status, "PASS")
        self.assertIn("numpy", result.message)


class TestCheckConfigValid(unittest.TestCase):
    def test_defaults_pass(self) -> None:
        result, config = check_config_valid(None)
        self.assertEqual(result.status, "PASS")
        self.assertEqual(result.message, "defaults")
        self.assertIsNotNone(config)

    def test_invalid_file_fails(self) -> None:
        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "experiment.toml"
            path.write_text("fock_dim = 12\n")
            result, config = check_config_valid(path)
        self.assertEqual(result.status, "FAIL")
        self.assertIn("line 1: fock_dim", result.message)
        self.assertIsNone(config)

    def test_preset(self) -> None:
        result, config = check_config_valid(None, preset="smoke")
        self.assertEqual(result.status, "PASS")
        self.assertEqual(config.fock_dim, 56)


class TestPhysicsChecks(unittest.TestCase):
    def test_truncation(self) -> None:
        self.assertEqual(check_truncation(ExperimentConfig()).status, "PASS")
        self.assertEqual(check_truncation(ExperimentConfig(fock_dim=56)).status, "WARN")
        self.assertEqual(check_truncation(ExperimentConfig(fock_dim=40)).status, "FAIL")

    def test_strong_dispersive(self) -> None:
        self.assertEqual(check_strong_dispersive(ExperimentConfig()).status, "PASS")
        self.assertEqual(check_strong_dispersive(ExperimentConfig(chi_over_2pi_mhz=0.05)).status, "WARN")
        self.assertEqual(check_strong_dispersive(ExperimentConfig(chi_over_2pi_mhz=0.001)).status, "FAIL")

    def test_strong_dispersive_without_decoherence(self) -> None:
        config = ExperimentConfig(t1_us=math.inf, t2_us=math.inf, tcav_us=math.inf)
        result = check_strong_dispersive(config)
        self.assertEqual(result.status, "PASS")
        self.assertEqual(result.message, "no decoherence")

    def test_selective_pulse(self) -> None:
        self.assertEqual(check_selective_pulse(ExperimentConfig()).status, "PASS")
        self.assertEqual(check_selective_pulse(ExperimentConfig(t_sel_ns=10.0)).status, "WARN")

    def test_waiting_time(self) -> None:
        result = check_waiting_time(ExperimentConfig())
        self.assertEqual(result.status, "PASS")
        self.assertIn("62.05", result.message)
        self.assertEqual(check_waiting_time(ExperimentConfig(tw_us=500.0)).status, "WARN")
        self.assertEqual(check_waiting_time(ExperimentConfig(tcav_us=math.inf)).status, "PASS")


class TestCheckOutputDir(unittest.TestCase):
    def test_existing_dir_passes(self) -> None:
        with TemporaryDirectory() as tmpdir:
            result = check_output_dir(Path(tmpdir))
            self.assertEqual(result.status, "PASS")

    def test_new_dir_passes(self) -> None:
        with TemporaryDirectory() as tmpdir:
            result = check_output_dir(Path(tmpdir) / "results")
            self.assertEqual(result.status, "PASS")
            self.assertIn("Will be created", result.message)

    @patch("cat_aqec.verify.os.access", return_value=False)
    def test_not_writable_fails(self, mock_access: MagicMock) -> None:
        with TemporaryDirectory() as tmpdir:
            result = check_output_dir(Path(tmpdir))
            self.assertEqual(result.status, "FAIL")


class TestCheckResult(unittest.TestCase):
    def test_str(self) -> None:
        self.assertEqual(str(CheckResult("Fock truncation", "WARN", "close")), "  [WARN]   Fock truncation - close")

    def test_status_coerced_from_text(self) -> None:
        result = CheckResult("Output directory", "FAIL")
        self.assertIs(result.status, Status.FAIL)
        self.assertTrue(result.blocking)
        self.assertFalse(CheckResult("Output directory", "WARN").blocking)
        self.assertEqual(str(result), "  [FAIL]   Output directory")
        with self.assertRaises(ValueError):
            CheckResult("Output directory", "MAYBE")


class TestRunVerify(unittest.TestCase):
    def test_all_checks_run(self) -> None:
        with TemporaryDirectory() as tmpdir:
            results = run_verify(None, Path(tmpdir))
        names = [r.name for r in results]
        self.assertEqual(len(results), 8)
        self.assertEqual(names[-1], "Output directory")
        self.assertNotIn("FAIL", [r.status for r in results])

    def test_invalid_config_skips_dependent_checks(self) -> None:
        with TemporaryDirectory() as tmpdir:
            results = run_verify(Path(tmpdir) / "missing.toml", Path(tmpdir))
        names = [r.name for r in results]
        self.assertIn("Config validation", names)
        self.assertNotIn("Fock truncation", names)
        self.assertEqual(len(results), 4)


if __name__ == "__main__":
    unittest.main()
