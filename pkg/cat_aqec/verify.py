"""
Setup Verification
==================

Pre-flight checks that the environment and the experiment configuration
are ready to run: library versions, config validity, Fock truncation,
strong-dispersive regime, selective-pulse length, waiting time against
the analytic optimum, and the output directory.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from cat_aqec.config import ConfigError, ExperimentConfig, load_config, required_fock_dim

# Correction infidelity used to place the analytic optimum before any run.
REFERENCE_EPS_CORRECT = 0.0077
STRONG_DISPERSIVE_RATIO = 100.0


class Status(str, Enum):
    PASS = "PASS"
    WARN = "WARN"
    FAIL = "FAIL"


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one pre-flight check. FAIL blocks a run, WARN does not."""

    name: str
    status: Status
    message: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", Status(self.status))

    @property
    def blocking(self) -> bool:
        return self.status is Status.FAIL

    def __str__(self) -> str:
        tag = f"[{self.status.value}]"
        text = f"  {tag:8s} {self.name}"
        return f"{text} - {self.message}" if self.message else text


def check_python_version() -> CheckResult:
    """Check Python version >= 3.10."""
    version = sys.version_info
    version_str = f"{version[0]}.{version[1]}.{version[2]}"
    if version >= (3, 10):
        return CheckResult("Python version", "PASS", version_str)
    return CheckResult("Python version", "FAIL", f"Requires >= 3.10, got {version_str}")


def check_numerics() -> CheckResult:
    """Check that numpy and scipy import and report their versions."""
    try:
        import numpy
        import scipy
    except ImportError as e:
        return CheckResult("Numerical libraries", "FAIL", f"{e}. Run: pip install numpy scipy")
    return CheckResult("Numerical libraries", "PASS", f"numpy {numpy.__version__}, scipy {scipy.__version__}")


def check_config_valid(
    path: Optional[Path], preset: Optional[str] = None
) -> tuple[CheckResult, Optional[ExperimentConfig]]:
    """Check that the config loads and validates."""
    try:
        config = load_config(path, preset=preset)
    except ConfigError as e:
        return CheckResult("Config validation", "FAIL", str(e)), None
    return CheckResult("Config validation", "PASS", str(path) if path else "defaults"), config


def check_truncation(config: ExperimentConfig) -> CheckResult:
    """Check the Fock truncation against the largest amplitude of the sequences."""
    needed = required_fock_dim(config.nbar)
    if config.fock_dim < needed:
        return CheckResult("Fock truncation", "FAIL", f"fock_dim {config.fock_dim} < {needed}")
    if config.fock_dim < needed + 10:
        return CheckResult(
            "Fock truncation",
            "WARN",
            f"fock_dim {config.fock_dim} leaves no room for the +10 convergence re-run (limit {needed})",
        )
    return CheckResult("Fock truncation", "PASS", f"fock_dim {config.fock_dim} >= {needed}")


def check_strong_dispersive(config: ExperimentConfig) -> CheckResult:
    """Check chi >> kappa, 1/T2."""
    slowest = max(config.kappa, 1.0 / config.t2_us)
    if slowest == 0:
        return CheckResult("Strong dispersive regime", "PASS", "no decoherence")
    ratio = config.chi / slowest
    message = f"chi / max(kappa, 1/T2) = {ratio:.3g}"
    if ratio >= STRONG_DISPERSIVE_RATIO:
        return CheckResult("Strong dispersive regime", "PASS", message)
    if ratio >= 10:
        return CheckResult("Strong dispersive regime", "WARN", message)
    return CheckResult("Strong dispersive regime", "FAIL", message)


def check_selective_pulse(config: ExperimentConfig) -> CheckResult:
    """A vacuum-selective pulse must resolve the chi splitting: chi t_sel >= 2 pi."""
    phase = config.chi * config.t_sel_us
    message = f"chi * t_sel = {phase:.3g} rad"
    if phase >= 2 * math.pi:
        return CheckResult("Selective pulse length", "PASS", message)
    return CheckResult("Selective pulse length", "WARN", message + " (< 2 pi, not number-resolved)")


def check_waiting_time(config: ExperimentConfig) -> CheckResult:
    """Compare Tw with sqrt(2 eps_correct) / (kappa nbar) at a reference eps_correct."""
    if config.kappa == 0:
        return CheckResult("Waiting time", "PASS", "no cavity loss")
    optimum = math.sqrt(2 * REFERENCE_EPS_CORRECT) / (config.kappa * config.nbar)
    message = f"tw_us {config.tw_us:g} vs analytic optimum {optimum:.4g}"
    if 0.5 * optimum <= config.tw_us <= 2 * optimum:
        return CheckResult("Waiting time", "PASS", message)
    return CheckResult("Waiting time", "WARN", message)


def check_output_dir(out_dir: Path) -> CheckResult:
    """Check that the output directory is writable."""
    if out_dir.exists():
        if os.access(out_dir, os.W_OK):
            return CheckResult("Output directory", "PASS", str(out_dir))
        return CheckResult("Output directory", "FAIL", f"Not writable: {out_dir}")
    # Directory doesn't exist yet, check parent
    parent = out_dir.parent
    if parent.exists() and os.access(parent, os.W_OK):
        return CheckResult("Output directory", "PASS", f"Will be created: {out_dir}")
    return CheckResult("Output directory", "FAIL", f"Parent not writable: {parent}")


def run_verify(
    config_path: Optional[Path],
    out_dir: Path,
    preset: Optional[str] = None,
) -> list[CheckResult]:
    """Run every check; a failing check never stops the ones after it.

    The physics checks need a loaded config and are skipped when it is
    invalid, so the result has eight entries or four.
    """
    config_result, config = check_config_valid(config_path, preset)
    results = [check_python_version(), check_numerics(), config_result]
    if config is not None:
        results.extend(
            check(config)
            for check in (check_truncation, check_strong_dispersive, check_selective_pulse, check_waiting_time)
        )
    results.append(check_output_dir(out_dir))
    return results
