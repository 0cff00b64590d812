"""
Cat-Code States
===============

Coherent states, two-component cats and the four-member logical family
psi^(n) whose parity is (-1)^n. A single photon loss maps psi^(n) to
psi^((n+1) mod 4); between losses the amplitude damps as alpha e^{-kappa t/2}.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from cat_aqec.hilbert import HilbertConfig, SimulationError, TruncationError, annihilation

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12
MIN_CAT_AMPLITUDE = 1e-6

# Coherent components of the code, in the order |a>, |-a>, |ia>, |-ia>.
COMPONENT_PHASES: tuple[complex, ...] = (1.0, -1.0, 1j, -1j)

# Phase multiplying c_e in psi^(n): (1, i, -1, -i).
_CE_PHASE: tuple[complex, ...] = (1.0, 1j, -1.0, -1j)


class DegenerateCat(SimulationError):
    """Raised when an odd cat is requested at vanishing amplitude."""


@dataclass(frozen=True)
class LogicalQubit:
    """Logical amplitudes c_g |0_L> + c_e |1_L>."""

    c_g: complex
    c_e: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "c_g", complex(self.c_g))
        object.__setattr__(self, "c_e", complex(self.c_e))
        norm = abs(self.c_g) ** 2 + abs(self.c_e) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"logical amplitudes are not normalized: |c_g|^2 + |c_e|^2 = {norm!r}")

    @classmethod
    def from_bloch(cls, theta: float, phi: float) -> LogicalQubit:
        return cls(math.cos(theta / 2), cmath.exp(1j * phi) * math.sin(theta / 2))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c_g, self.c_e], dtype=np.complex128)

    def with_global_phase(self, phi: float) -> LogicalQubit:
        phase = cmath.exp(1j * phi)
        return LogicalQubit(phase * self.c_g, phase * self.c_e)


_S = 1.0 / math.sqrt(2.0)

CARDINAL_STATES: dict[str, LogicalQubit] = {
    "+z": LogicalQubit(1.0, 0.0),
    "-z": LogicalQubit(0.0, 1.0),
    "+x": LogicalQubit(_S, _S),
    "-x": LogicalQubit(_S, -_S),
    "+y": LogicalQubit(_S, 1j * _S),
    "-y": LogicalQubit(_S, -1j * _S),
}


@dataclass(frozen=True)
class CodeParams:
    """Cat-code instance; nbar and beta are derived from alpha on access."""

    alpha: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", complex(self.alpha))

    @classmethod
    def from_nbar(cls, nbar: float, phase: float = 0.0) -> CodeParams:
        if nbar < 0:
            raise ValueError(f"nbar must be non-negative, got: {nbar!r}")
        return cls(cmath.rect(math.sqrt(nbar), phase))

    @property
    def nbar(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def beta(self) -> complex:
        return self.alpha * (-1 + 1j)

    def damped(self, factor: float) -> CodeParams:
        return CodeParams(self.alpha * factor)

    def components(self) -> tuple[complex, ...]:
        return tuple(phase * self.alpha for phase in COMPONENT_PHASES)


@dataclass(frozen=True)
class JumpIndex:
    """Photon-loss counter modulo 4."""

    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", int(self.n) % 4)

    def __add__(self, jumps: int) -> JumpIndex:
        return JumpIndex(self.n + int(jumps))

    def next(self) -> JumpIndex:
        return self + 1

    @property
    def parity(self) -> int:
        return 1 if self.n % 2 == 0 else -1


def _index(n: JumpIndex | int) -> int:
    return n.n if isinstance(n, JumpIndex) else int(n) % 4


def coherent_amplitudes(alpha: complex, fock_dim: int) -> np.ndarray:
    """Exact Fock coefficients <n|alpha>, n < fock_dim, without renormalization."""
    n = np.arange(fock_dim)
    r = abs(alpha)
    if r == 0.0:
        out = np.zeros(fock_dim, dtype=np.complex128)
        out[0] = 1.0
        return out
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * cmath.phase(alpha))


def coherent_overlap(a: complex, b: complex) -> complex:
    """<a|b> for untruncated coherent states."""
    return cmath.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + a.conjugate() * b)


def coherent_state(alpha: complex, cfg: HilbertConfig) -> np.ndarray:
    alpha = complex(alpha)
    if not cfg.fits(alpha):
        raise TruncationError(
            f"coherent amplitude {alpha:.6g} violates |a|^2 + 6|a| <= fock_dim ({cfg.fock_dim})"
        )
    vec = coherent_amplitudes(alpha, cfg.fock_dim)
    return vec / np.linalg.norm(vec)


def _sign_value(sign: int | str) -> int:
    if sign in (1, "+"):
        return 1
    if sign in (-1, "-"):
        return -1
    raise ValueError(f"cat sign must be +1/-1 or '+'/'-', got: {sign!r}")


def cat_state(alpha: complex, sign: int | str, cfg: HilbertConfig) -> np.ndarray:
    """Normalized N(|alpha> + sign |-alpha>)."""
    s = _sign_value(sign)
    alpha = complex(alpha)
    if s < 0 and abs(alpha) < MIN_CAT_AMPLITUDE:
        raise DegenerateCat(f"odd cat is undefined at amplitude {alpha:.3g}")
    vec = coherent_state(alpha, cfg) + s * coherent_state(-alpha, cfg)
    return vec / np.linalg.norm(vec)


def logical_state(
    n: JumpIndex | int,
    code: CodeParams,
    q: LogicalQubit,
    cfg: HilbertConfig,
) -> np.ndarray:
    """psi^(n): c_g C^s_alpha + phase_n c_e C^s_{i alpha}, s = (-1)^n, renormalized."""
    k = _index(n)
    sign = 1 if k % 2 == 0 else -1
    vec = q.c_g * cat_state(code.alpha, sign, cfg) + _CE_PHASE[k] * q.c_e * cat_state(
        1j * code.alpha, sign, cfg
    )
    return vec / np.linalg.norm(vec)


def logical_components(
    n: JumpIndex | int,
    code: CodeParams,
    q: LogicalQubit,
) -> list[tuple[complex, complex]]:
    """psi^(n) as (coefficient, amplitude) pairs over the four coherent components.

    Normalized with the analytic Gram matrix, so no truncation is involved.
    """
    k = _index(n)
    s = 1.0 if k % 2 == 0 else -1.0
    amps = code.components()
    coeffs = np.array(
        [q.c_g, s * q.c_g, _CE_PHASE[k] * q.c_e, s * _CE_PHASE[k] * q.c_e],
        dtype=np.complex128,
    )
    gram = np.array([[coherent_overlap(a, b) for b in amps] for a in amps])
    norm = math.sqrt(np.vdot(coeffs, gram @ coeffs).real)
    if norm < MIN_CAT_AMPLITUDE:
        raise DegenerateCat(f"logical state {k} vanishes at amplitude {code.alpha:.3g}")
    return [(complex(c / norm), a) for c, a in zip(coeffs, amps)]


def apply_photon_loss(
    n: JumpIndex | int,
    code: CodeParams,
    q: LogicalQubit,
    cfg: HilbertConfig,
) -> tuple[np.ndarray, JumpIndex]:
    """a psi^(n) / ||a psi^(n)||, together with the advanced jump index."""
    psi = logical_state(n, code, q, cfg)
    lowered = annihilation(cfg).matrix @ psi
    return lowered / np.linalg.norm(lowered), JumpIndex(_index(n) + 1)


def no_jump_damp(
    n: JumpIndex | int,
    code: CodeParams,
    q: LogicalQubit,
    t: float,
    kappa: float,
    cfg: HilbertConfig,
) -> np.ndarray:
    if t < 0:
        raise ValueError(f"damping time must be non-negative, got: {t!r}")
    return logical_state(n, code.damped(math.exp(-0.5 * kappa * t)), q, cfg)


def overlap_matrix(code: CodeParams, cfg: HilbertConfig) -> np.ndarray:
    """Gram matrix of |a>, |-a>, |ia>, |-ia> on the truncated space."""
    vectors = np.stack([coherent_state(a, cfg) for a in code.components()], axis=1)
    return vectors.conj().T @ vectors
