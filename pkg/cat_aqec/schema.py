"""
Schema Generation
=================

Generates the configuration schema from the ExperimentConfig dataclass for
documentation and validation. Defaults, types and enum options come from
introspection; descriptions live here.
"""

from __future__ import annotations

import math
from dataclasses import MISSING, fields
from typing import Any

from cat_aqec.config import ExperimentConfig, InitMode, config_keys
from cat_aqec.dynamics import IntegratorMethod
from cat_aqec.gates import GateMode, SelectiveHamiltonian


# Description metadata (not stored in the dataclass)
DESCRIPTIONS = {
    "chi_over_2pi_mhz": "Dispersive shift chi/2pi in MHz",
    "t1_us": "Qubit relaxation time T1 in us (inf disables)",
    "t2_us": "Qubit decoherence time T2 in us, at most 2 * T1 (inf disables)",
    "tcav_us": "Cavity lifetime 1/kappa in us (inf disables)",
    "nbar": "Mean photon number per coherent component, |alpha|^2",
    "alpha_phase": "Phase of alpha in rad",
    "tw_us": "Waiting time between corrections in us",
    "n_cycles": "Number of correction cycles (MBQEC: measurement epochs)",
    "init_mode": "Prepare the ideal code state, or encode from the qubit and decode at the end",
    "logical_theta": "Bloch polar angle of the protected logical state",
    "logical_phi": "Bloch azimuth of the protected logical state",
    "mbqec_correct_every": "MBQEC: apply the correction every this many epochs",
    "gate_model": "Dispersive Hamiltonian during selective rotations",
    "gate_mode": "Whether decoherence acts during gates and waits",
    "t_sel_ns": "Duration of a vacuum-selective rotation in ns",
    "reset_error": "Probability that the reset leaves the qubit excited",
    "fock_dim": "Cavity Fock-space truncation",
    "integrator": "Master-equation engine",
    "rel_tol": "Relative tolerance of the adaptive integrator",
    "abs_tol": "Absolute tolerance of the adaptive integrator",
    "max_step_us": "Maximum integrator step in us (fixed-rk4 step when finite)",
    "seed": "Master random seed, 0 <= seed < 2^64",
    "workers": "Parallel worker processes for trajectories and sweeps",
}

ENUMS = {
    "init_mode": InitMode,
    "gate_model": SelectiveHamiltonian,
    "gate_mode": GateMode,
    "integrator": IntegratorMethod,
}

_TYPE_NAMES = {"float": "number", "int": "integer", "str": "string", "bool": "boolean"}


def _get_enum_values(enum_class) -> list[str]:
    """Extract string values from an Enum class."""
    return [e.value for e in enum_class]


def _default(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def generate_schema() -> dict:
    """Generate the configuration schema from the dataclass.

    Returns:
        Schema dict keyed by config key with type, default, description
        and enum options.
    """
    keys = set(config_keys())
    schema = {}
    for f in fields(ExperimentConfig):
        if f.name not in keys:
            continue
        info: dict[str, Any] = {"type": _TYPE_NAMES.get(str(f.type), "string")}
        if f.name in DESCRIPTIONS:
            info["description"] = DESCRIPTIONS[f.name]
        if f.default is not MISSING:
            info["default"] = _default(f.default)
        if f.name in ENUMS:
            info["enum"] = _get_enum_values(ENUMS[f.name])
        schema[f.name] = info
    return schema


def format_schema(schema: dict) -> str:
    """Human-readable schema listing, one key per line."""
    lines = []
    for key, info in schema.items():
        line = f"{key} ({info['type']}, default {info.get('default')!r})"
        if "enum" in info:
            line += f" one of {info['enum']}"
        lines.append(line)
        if "description" in info:
            lines.append(f"    {info['description']}")
    return "\n".join(lines)
