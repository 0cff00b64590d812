"""
Preset Configurations
=====================

Embedded parameter sets for common runs. A preset is applied over the
defaults and below the config file and CLI flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "overrides", MappingProxyType(dict(self.overrides)))


_REGISTRY: dict[str, Preset] = {
    p.name: p
    for p in (
        Preset(
            "reference",
            "chi/2pi = 40 MHz, T1 = T2 = 100 us, Tcav = 2 ms, nbar = 4, Tw = 65.6 us",
            {
                "chi_over_2pi_mhz": 40.0,
                "t1_us": 100.0,
                "t2_us": 100.0,
                "tcav_us": 2000.0,
                "nbar": 4.0,
                "tw_us": 65.6,
                "t_sel_ns": 54.0,
                "n_cycles": 60,
                "fock_dim": 70,
            },
        ),
        Preset(
            "noiseless",
            "All decay channels disabled; isolates gate and truncation errors",
            {
                "t1_us": math.inf,
                "t2_us": math.inf,
                "tcav_us": math.inf,
                "gate_mode": "noiseless-ideal",
            },
        ),
        # fock_dim 56 still clears the nbar = 4 truncation limit
        Preset(
            "smoke",
            "Reduced truncation and cycle count for quick end-to-end checks",
            {"fock_dim": 56, "n_cycles": 5},
        ),
    )
}


def find_preset(name: str) -> Preset | None:
    return _REGISTRY.get(name)


def preset_names() -> tuple[str, ...]:
    return tuple(_REGISTRY)


def all_presets() -> list[Preset]:
    """Registered presets in declaration order."""
    return list(_REGISTRY.values())
