"""
Configuration Loading and Validation
=====================================

Loads and validates a flat TOML experiment file, merges it over the
defaults and an optional preset, applies CLI overrides and provides the
ExperimentConfig dataclass. Unknown keys are errors; every error read from
a file carries the line of the offending key.
"""

from __future__ import annotations

import logging
import math
import re
import sys
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from cat_aqec.dynamics import IntegratorMethod, IntegratorSettings, NoiseModel
from cat_aqec.gates import GateMode, GateModel, SelectiveHamiltonian
from cat_aqec.hilbert import HilbertConfig
from cat_aqec.states import CodeParams, LogicalQubit

logger = logging.getLogger(__name__)

if sys.version_info >= (3, 11):
    import tomllib
else:
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib  # type: ignore[no-redef]


DEFAULT_CONFIG_NAME = "experiment.toml"
MAX_SEED = 2**64
_KEY_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=")


class InitMode(str, Enum):
    """How run_aqec prepares the logical state."""

    IDEAL_STATE = "ideal-state"
    FULL_ENCODE = "full-encode"


class ConfigError(Exception):
    """Raised when configuration is invalid."""


@dataclass
class ExperimentConfig:
    """Physical, protocol and numerical parameters of a run.

    Units are carried in the key names. Defaults are the reference
    parameter set: chi/2pi = 40 MHz, T1 = T2 = 100 us, Tcav = 2 ms, nbar = 4.
    """

    # Physics
    chi_over_2pi_mhz: float = 40.0
    t1_us: float = 100.0
    t2_us: float = 100.0
    tcav_us: float = 2000.0
    nbar: float = 4.0
    alpha_phase: float = 0.0

    # Protocol
    tw_us: float = 65.6
    n_cycles: int = 60
    init_mode: str = InitMode.IDEAL_STATE.value
    logical_theta: float = math.pi / 2
    logical_phi: float = 0.0
    mbqec_correct_every: int = 1

    # Gates
    gate_model: str = SelectiveHamiltonian.SUSPENDED.value
    gate_mode: str = GateMode.IDEAL_WITH_NOISE.value
    t_sel_ns: float = 54.0
    reset_error: float = 0.0

    # Numerics
    fock_dim: int = 70
    integrator: str = IntegratorMethod.EXACT.value
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step_us: float = math.inf
    seed: int = 0
    workers: int = 1

    # Resolved by load_config, not read from TOML
    source: Optional[Path] = None
    key_lines: dict[str, int] = field(default_factory=dict, repr=False)

    @property
    def chi(self) -> float:
        """Dispersive shift in rad/us."""
        return 2.0 * math.pi * self.chi_over_2pi_mhz

    @property
    def t_sel_us(self) -> float:
        return self.t_sel_ns * 1e-3

    @property
    def kappa(self) -> float:
        return 0.0 if math.isinf(self.tcav_us) else 1.0 / self.tcav_us

    def hilbert(self) -> HilbertConfig:
        return HilbertConfig(self.fock_dim)

    def noise_model(self) -> NoiseModel:
        return NoiseModel.from_times(self.tcav_us, self.t1_us, self.t2_us)

    def code_params(self) -> CodeParams:
        return CodeParams.from_nbar(self.nbar, self.alpha_phase)

    def logical_qubit(self) -> LogicalQubit:
        return LogicalQubit.from_bloch(self.logical_theta, self.logical_phi)

    def gate_model_spec(self) -> GateModel:
        return GateModel(GateMode(self.gate_mode), SelectiveHamiltonian(self.gate_model), self.reset_error)

    def integrator_settings(self) -> IntegratorSettings:
        return IntegratorSettings(IntegratorMethod(self.integrator), self.rel_tol, self.abs_tol, self.max_step_us)

    def to_dict(self) -> dict[str, Any]:
        """Configuration keys and values, without the resolved fields."""
        return {name: getattr(self, name) for name in config_keys()}

    def replace(self, **changes: Any) -> ExperimentConfig:
        values = {name: getattr(self, name) for name in config_keys()}
        values.update(changes)
        return ExperimentConfig(**values, source=self.source, key_lines=dict(self.key_lines))


_RESOLVED_FIELDS = {"source", "key_lines"}


def config_keys() -> list[str]:
    return [f.name for f in fields(ExperimentConfig) if f.name not in _RESOLVED_FIELDS]


def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(ExperimentConfig) if f.name not in _RESOLVED_FIELDS}


def max_amplitude(nbar: float) -> float:
    """Largest instantaneous amplitude along the sequences, |alpha| (1 + sqrt 2)."""
    return math.sqrt(nbar) * (1.0 + math.sqrt(2.0))


def required_fock_dim(nbar: float) -> int:
    a = max_amplitude(nbar)
    return math.ceil(a * a + 6.0 * a)


def _where(config: ExperimentConfig, key: str) -> str:
    line = config.key_lines.get(key)
    return f"line {line}: {key}" if line else key


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_integer(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _validate_config(config: ExperimentConfig) -> list[str]:
    """Validate an ExperimentConfig and return a list of error messages."""
    errors = []
    types = _field_types()

    for key in config_keys():
        value = getattr(config, key)
        kind = types[key]
        if kind == "int" and not _is_integer(value):
            errors.append(f"{_where(config, key)} must be an integer, got: {type(value).__name__}")
        elif kind == "float" and not _is_number(value):
            errors.append(f"{_where(config, key)} must be a number, got: {type(value).__name__}")
        elif kind == "str" and not isinstance(value, str):
            errors.append(f"{_where(config, key)} must be a string, got: {type(value).__name__}")
        elif kind == "float" and math.isnan(value):
            errors.append(f"{_where(config, key)} must not be nan")
    if errors:
        return errors

    # Physical times may be inf (channel disabled) but must be positive
    for key in ("t1_us", "t2_us", "tcav_us"):
        if getattr(config, key) <= 0:
            errors.append(f"{_where(config, key)} must be positive")
    if config.t1_us > 0 and config.t2_us > 2 * config.t1_us:
        errors.append(f"{_where(config, 't2_us')} must be <= 2 * t1_us ({2 * config.t1_us:g})")

    if not 0 < config.chi_over_2pi_mhz < math.inf:
        errors.append(f"{_where(config, 'chi_over_2pi_mhz')} must be positive and finite")
    if not 0 < config.nbar < math.inf:
        errors.append(f"{_where(config, 'nbar')} must be positive and finite")
    if not math.isfinite(config.alpha_phase):
        errors.append(f"{_where(config, 'alpha_phase')} must be finite")

    if config.fock_dim < 2:
        errors.append(f"{_where(config, 'fock_dim')} must be >= 2")
    elif 0 < config.nbar < math.inf and config.fock_dim < required_fock_dim(config.nbar):
        errors.append(
            f"{_where(config, 'fock_dim')} = {config.fock_dim} is below the truncation safety limit "
            f"{required_fock_dim(config.nbar)} for nbar = {config.nbar:g}"
        )

    if not 0 <= config.tw_us < math.inf:
        errors.append(f"{_where(config, 'tw_us')} must be non-negative and finite")
    if config.n_cycles < 1:
        errors.append(f"{_where(config, 'n_cycles')} must be positive")
    if not 0 <= config.t_sel_ns < math.inf:
        errors.append(f"{_where(config, 't_sel_ns')} must be non-negative and finite")
    if not 0 <= config.reset_error <= 1:
        errors.append(f"{_where(config, 'reset_error')} must lie in [0, 1]")
    for key in ("logical_theta", "logical_phi"):
        if not math.isfinite(getattr(config, key)):
            errors.append(f"{_where(config, key)} must be finite")

    for key, enum in (
        ("init_mode", InitMode),
        ("gate_model", SelectiveHamiltonian),
        ("gate_mode", GateMode),
        ("integrator", IntegratorMethod),
    ):
        valid = [e.value for e in enum]
        if getattr(config, key) not in valid:
            errors.append(f"{_where(config, key)} must be one of {valid}, got: {getattr(config, key)!r}")

    for key in ("rel_tol", "abs_tol", "max_step_us"):
        if getattr(config, key) <= 0:
            errors.append(f"{_where(config, key)} must be positive")

    if not 0 <= config.seed < MAX_SEED:
        errors.append(f"{_where(config, 'seed')} must lie in [0, 2^64)")
    if config.mbqec_correct_every < 1:
        errors.append(f"{_where(config, 'mbqec_correct_every')} must be positive")
    if config.workers < 1:
        errors.append(f"{_where(config, 'workers')} must be positive")

    return errors


def _key_lines(text: str) -> dict[str, int]:
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        match = _KEY_LINE.match(line)
        if match and match.group(1) not in lines:
            lines[match.group(1)] = lineno
    return lines


def _coerce(values: dict[str, Any]) -> dict[str, Any]:
    """Accept integers where a float is expected."""
    types = _field_types()
    out = {}
    for key, value in values.items():
        if types.get(key) == "float" and _is_integer(value):
            value = float(value)
        out[key] = value
    return out


def load_config(
    path: Optional[Path] = None,
    preset: Optional[str] = None,
    cli_overrides: Optional[dict[str, Any]] = None,
) -> ExperimentConfig:
    """Resolve a configuration: defaults < preset < file < CLI overrides.

    Args:
        path: Flat TOML experiment file (optional)
        preset: Name of a registered preset (optional)
        cli_overrides: Values from CLI flags; None entries are ignored

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: If the file is missing or unparsable, a key is unknown,
            or validation fails
    """
    from cat_aqec.presets import find_preset, preset_names

    values: dict[str, Any] = {}
    key_lines: dict[str, int] = {}
    errors: list[str] = []
    known = set(config_keys())

    if preset is not None:
        found = find_preset(preset)
        if found is None:
            raise ConfigError(f"Unknown preset: {preset!r} (known: {', '.join(preset_names())})")
        values.update(found.overrides)

    if path is not None:
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        text = path.read_text()
        try:
            raw = tomllib.loads(text)
        except Exception as e:
            raise ConfigError(f"Failed to parse {path}: {e}") from e
        key_lines = _key_lines(text)
        for key, value in raw.items():
            where = f"line {key_lines[key]}: {key}" if key in key_lines else key
            if isinstance(value, dict):
                errors.append(f"{where} is a table; the config file is flat key = value")
            elif key not in known:
                errors.append(f"{where} is not a recognized key")
            else:
                values[key] = value

    if cli_overrides:
        for key, value in cli_overrides.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"Unknown override: {key!r}")
            values[key] = value
            key_lines.pop(key, None)

    if errors:
        raise ConfigError("Configuration errors:\n  " + "\n  ".join(errors))

    config = ExperimentConfig(**_coerce(values), source=path, key_lines=key_lines)

    errors = _validate_config(config)
    if errors:
        raise ConfigError("Configuration errors:\n  " + "\n  ".join(errors))

    logger.debug("resolved config from %s (preset %s)", path or "defaults", preset)
    return config
