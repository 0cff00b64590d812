"""
Gate Steps and Sequence Execution
=================================

The gate set of the protocol: unconditional cavity displacements, dispersive
waits (conditional phases), vacuum-selective qubit rotations, unselective
qubit rotations and the qubit reset. A ``PulseSequence`` is an ordered tuple
of steps with a line-oriented text form::

    D re,im
    WAIT t_us
    X0 theta,eta,dur_us
    X theta,eta
    RESET
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional, Union

import numpy as np

from cat_aqec.dynamics import (
    IntegratorSettings,
    NoiseModel,
    dispersive_hamiltonian,
    evolve_master,
    evolve_trajectory,
    zero_hamiltonian,
)
from cat_aqec.hilbert import (
    EXCITED,
    GROUND,
    HilbertConfig,
    JointState,
    Operator,
    apply_unitary,
    displacement_operator,
    on_cavity,
    partial_trace,
)

logger = logging.getLogger(__name__)


def _fmt(x: float) -> str:
    return f"{float(x) + 0.0:.12g}"


def _check_duration(name: str, duration: float) -> None:
    if not duration >= 0:
        raise ValueError(f"{name} duration must be non-negative, got: {duration!r}")


@dataclass(frozen=True)
class Displace:
    alpha: complex
    duration: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", complex(self.alpha))
        _check_duration("Displace", self.duration)

    def to_text(self) -> str:
        return f"D {_fmt(self.alpha.real)},{_fmt(self.alpha.imag)}"


@dataclass(frozen=True)
class ConditionalWait:
    duration: float

    def __post_init__(self) -> None:
        _check_duration("ConditionalWait", self.duration)

    def to_text(self) -> str:
        return f"WAIT {_fmt(self.duration)}"


@dataclass(frozen=True)
class SelectiveRotation:
    """X0_{theta,eta}: rotates the qubit only when the cavity is in vacuum."""

    theta: float
    eta: float
    duration: float = 0.0

    def __post_init__(self) -> None:
        _check_duration("SelectiveRotation", self.duration)

    def to_text(self) -> str:
        return f"X0 {_fmt(self.theta)},{_fmt(self.eta)},{_fmt(self.duration)}"


@dataclass(frozen=True)
class QubitRotation:
    """Unselective qubit rotation, instantaneous."""

    theta: float
    eta: float
    duration: float = 0.0

    def __post_init__(self) -> None:
        _check_duration("QubitRotation", self.duration)

    def to_text(self) -> str:
        return f"X {_fmt(self.theta)},{_fmt(self.eta)}"


@dataclass(frozen=True)
class Reset:
    duration: float = 0.0

    def __post_init__(self) -> None:
        _check_duration("Reset", self.duration)

    def to_text(self) -> str:
        return "RESET"


GateStep = Union[Displace, ConditionalWait, SelectiveRotation, QubitRotation, Reset]


def _parse_numbers(body: str, count: int, lineno: int) -> list[float]:
    parts = [p.strip() for p in body.split(",")]
    if len(parts) != count:
        raise ValueError(f"line {lineno}: expected {count} comma-separated values, got {body!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise ValueError(f"line {lineno}: {e}") from e


def parse_step(line: str, lineno: int = 1, t_sel: float = 0.0) -> GateStep:
    """Parse one line of the text form; ``X0`` without a duration uses ``t_sel``."""
    op, _, body = line.strip().partition(" ")
    if op == "D":
        re, im = _parse_numbers(body, 2, lineno)
        return Displace(complex(re, im))
    if op == "WAIT":
        (t,) = _parse_numbers(body, 1, lineno)
        return ConditionalWait(t)
    if op == "X0":
        values = _parse_numbers(body, body.count(",") + 1, lineno)
        if len(values) == 2:
            values.append(t_sel)
        if len(values) != 3:
            raise ValueError(f"line {lineno}: X0 takes theta,eta[,dur_us], got {body!r}")
        return SelectiveRotation(*values)
    if op == "X":
        theta, eta = _parse_numbers(body, 2, lineno)
        return QubitRotation(theta, eta)
    if op == "RESET" and not body:
        return Reset()
    raise ValueError(f"line {lineno}: unknown gate step {line.strip()!r}")


@dataclass(frozen=True)
class PulseSequence:
    steps: tuple[GateStep, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def total_duration(self) -> float:
        return math.fsum(step.duration for step in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[GateStep]:
        return iter(self.steps)

    def __add__(self, other: PulseSequence) -> PulseSequence:
        name = "+".join(n for n in (self.name, other.name) if n)
        return PulseSequence(self.steps + other.steps, name)

    def without(self, kind: type) -> PulseSequence:
        return PulseSequence(tuple(s for s in self.steps if not isinstance(s, kind)), self.name)

    def to_text(self) -> str:
        return "".join(step.to_text() + "\n" for step in self.steps)

    @classmethod
    def from_text(cls, text: str, name: str = "", t_sel: float = 0.0) -> PulseSequence:
        steps = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            steps.append(parse_step(stripped, lineno, t_sel))
        return cls(tuple(steps), name)


class GateMode(str, Enum):
    NOISELESS_IDEAL = "noiseless-ideal"
    IDEAL_WITH_NOISE = "ideal-with-noise"


class SelectiveHamiltonian(str, Enum):
    """Whether the dispersive Hamiltonian acts during a selective pulse."""

    SUSPENDED = "suspended"
    ACTIVE = "active"


@dataclass(frozen=True)
class GateModel:
    mode: GateMode = GateMode.IDEAL_WITH_NOISE
    hamiltonian_during_selective: SelectiveHamiltonian = SelectiveHamiltonian.SUSPENDED
    reset_error: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", GateMode(self.mode))
        object.__setattr__(
            self, "hamiltonian_during_selective", SelectiveHamiltonian(self.hamiltonian_during_selective)
        )
        if not 0.0 <= self.reset_error <= 1.0:
            raise ValueError(f"reset_error must lie in [0, 1], got: {self.reset_error!r}")


def conditional_phase_unitary(t: float, chi: float, cfg: HilbertConfig) -> Operator:
    """exp(i chi t |e><e| (x) a^dag a), the dispersive wait propagator."""
    if t < 0:
        raise ValueError(f"wait time must be non-negative, got: {t!r}")
    n = np.arange(cfg.fock_dim)
    phases = np.concatenate([np.ones(cfg.fock_dim), np.exp(1j * chi * t * n)])
    return Operator(np.diag(phases), f"CP({t:.6g})")


def rotation_matrix(theta: float, eta: float) -> np.ndarray:
    """exp((theta/2)(e^{i eta}|e><g| - e^{-i eta}|g><e|)) in the (g, e) basis."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    m = np.array([[c, 0.0], [0.0, c]], dtype=np.complex128)
    m[EXCITED, GROUND] = s * np.exp(1j * eta)
    m[GROUND, EXCITED] = -s * np.exp(-1j * eta)
    return m


def selective_rotation_unitary(theta: float, eta: float, cfg: HilbertConfig) -> Operator:
    """R(theta, eta) (x) |0><0| + I (x) (I - |0><0|)."""
    vacuum = np.zeros((cfg.fock_dim, cfg.fock_dim))
    vacuum[0, 0] = 1.0
    rest = np.eye(cfg.fock_dim) - vacuum
    matrix = np.kron(rotation_matrix(theta, eta), vacuum) + np.kron(np.eye(2), rest)
    return Operator(matrix, f"X0({theta:.6g},{eta:.6g})")


def qubit_rotation_unitary(theta: float, eta: float, cfg: HilbertConfig) -> Operator:
    return Operator(np.kron(rotation_matrix(theta, eta), np.eye(cfg.fock_dim)), f"X({theta:.6g},{eta:.6g})")


def _embed_reset(cavity: np.ndarray, error: float) -> np.ndarray:
    qubit = np.diag([1.0 - error, error])
    return np.kron(qubit, cavity)


def reset_channel(state: JointState, error: float = 0.0) -> JointState:
    """rho -> |g><g| (x) tr_qubit(rho); with ``error`` the qubit is left in |e>."""
    cavity = partial_trace(state, "cavity")
    return JointState(_embed_reset(cavity, error), state.time_us)


def reset_unraveled(state: JointState, rng: np.random.Generator, error: float = 0.0) -> JointState:
    """Stochastic reset of a pure state with Kraus operators |g><g| and |g><e|."""
    n = state.fock_dim
    blocks = state.data.reshape(2, n)
    p_excited = float(np.vdot(blocks[EXCITED], blocks[EXCITED]).real)
    branch = EXCITED if rng.random() < p_excited else GROUND
    cavity = blocks[branch] / np.linalg.norm(blocks[branch])
    out = np.zeros(2 * n, dtype=np.complex128)
    target = EXCITED if error > 0.0 and rng.random() < error else GROUND
    out[target * n:(target + 1) * n] = cavity
    return JointState(out, state.time_us)


Observer = Callable[[int, GateStep, JointState], None]


@dataclass
class _Executor:
    cfg: HilbertConfig
    noise: NoiseModel
    chi: float
    model: GateModel
    settings: IntegratorSettings
    rng: Optional[np.random.Generator]
    _h_disp: Operator = field(init=False)
    _h_zero: Operator = field(init=False)

    def __post_init__(self) -> None:
        self._h_disp = dispersive_hamiltonian(self.chi, self.cfg)
        self._h_zero = zero_hamiltonian(self.cfg)

    def evolve(self, state: JointState, hamiltonian: Operator, t: float) -> JointState:
        if t == 0:
            return state
        if state.is_pure and self.noise.is_noiseless:
            phases = np.exp(-1j * np.diag(hamiltonian.matrix) * t)
            return JointState(phases * state.data, state.time_us + t)
        if state.is_pure and self.rng is not None:
            out, record = evolve_trajectory(state, hamiltonian, self.noise, t, self.rng)
            if len(record):
                logger.debug("%d jump(s) during %.6g us", len(record), t)
            return out
        return evolve_master(state, hamiltonian, self.noise, t, self.settings)

    def timed_unitary(self, state: JointState, unitary: Operator, duration: float, hamiltonian: Operator) -> JointState:
        half = 0.5 * duration
        state = self.evolve(state, hamiltonian, half)
        state = apply_unitary(state, unitary)
        return self.evolve(state, hamiltonian, duration - half)

    def apply(self, state: JointState, step: GateStep) -> JointState:
        if isinstance(step, Displace):
            unitary = on_cavity(displacement_operator(step.alpha, self.cfg))
            return self.timed_unitary(state, unitary, step.duration, self._h_zero)
        if isinstance(step, ConditionalWait):
            return self.evolve(state, self._h_disp, step.duration)
        if isinstance(step, SelectiveRotation):
            active = self.model.hamiltonian_during_selective is SelectiveHamiltonian.ACTIVE
            unitary = selective_rotation_unitary(step.theta, step.eta, self.cfg)
            return self.timed_unitary(state, unitary, step.duration, self._h_disp if active else self._h_zero)
        if isinstance(step, QubitRotation):
            unitary = qubit_rotation_unitary(step.theta, step.eta, self.cfg)
            return self.timed_unitary(state, unitary, step.duration, self._h_zero)
        if isinstance(step, Reset):
            state = self.evolve(state, self._h_zero, step.duration)
            if state.is_pure and self.rng is not None:
                return reset_unraveled(state, self.rng, self.model.reset_error)
            return reset_channel(state, self.model.reset_error)
        raise TypeError(f"unknown gate step: {step!r}")


def execute_sequence(
    state: JointState,
    seq: PulseSequence,
    noise: NoiseModel,
    chi: float,
    model: Optional[GateModel] = None,
    settings: Optional[IntegratorSettings] = None,
    *,
    rng: Optional[np.random.Generator] = None,
    observer: Optional[Observer] = None,
) -> JointState:
    """Apply the steps of ``seq`` in order.

    With an ``rng`` and a pure input the noisy segments are unraveled into
    trajectories and resets are sampled; otherwise a noisy segment promotes
    the state to a density matrix. ``observer`` is called after every step.
    """
    model = model or GateModel()
    settings = settings or IntegratorSettings()
    if model.mode is GateMode.NOISELESS_IDEAL:
        noise = NoiseModel.noiseless()
    executor = _Executor(HilbertConfig(state.fock_dim), noise, chi, model, settings, rng)
    logger.debug("executing %s: %d steps, %.6g us", seq.name or "sequence", len(seq), seq.total_duration)
    for index, step in enumerate(seq):
        state = executor.apply(state, step)
        if observer is not None:
            observer(index, step, state)
    return state
