"""
Truncated Hilbert Space
=======================

Dense operators and states on the joint qubit (x) cavity space.
The qubit factor always comes first: index = q * fock_dim + n, with
|g> at q = 0 and |e> at q = 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

logger = logging.getLogger(__name__)

QUBIT_DIM = 2
GROUND = 0
EXCITED = 1

PURE_NORM_TOL = 1e-9
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8
UNITARITY_TOL = 1e-8


class SimulationError(Exception):
    """Base class for numerical failures."""


class TruncationError(SimulationError):
    """Raised when an amplitude does not fit the Fock truncation."""


class DimensionMismatch(SimulationError, ValueError):
    """Raised when operator or state dimensions disagree."""


class StateInvariantError(SimulationError):
    """Raised when a state violates its norm, trace or positivity invariants."""


class Space(str, Enum):
    """Which factor an operator acts on."""

    QUBIT = "qubit"
    CAVITY = "cavity"
    JOINT = "joint"


class Factor(str, Enum):
    """Factor kept by a partial trace."""

    QUBIT = "qubit"
    CAVITY = "cavity"


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.complex128)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HilbertConfig:
    """Cavity truncation; the qubit is always two-level."""

    fock_dim: int = 70
    qubit_dim: int = QUBIT_DIM

    def __post_init__(self) -> None:
        if not isinstance(self.fock_dim, (int, np.integer)) or self.fock_dim < 2:
            raise ValueError(f"fock_dim must be an integer >= 2, got: {self.fock_dim!r}")
        if self.qubit_dim != QUBIT_DIM:
            raise ValueError(f"qubit_dim is fixed at {QUBIT_DIM}, got: {self.qubit_dim!r}")

    @property
    def dim(self) -> int:
        return self.qubit_dim * self.fock_dim

    def fits(self, amplitude: complex) -> bool:
        """Truncation safety rule |a|^2 + 6|a| <= fock_dim."""
        r = abs(amplitude)
        return r * r + 6.0 * r <= self.fock_dim


@dataclass(frozen=True)
class Operator:
    """Dense complex matrix tagged with the space it acts on."""

    matrix: np.ndarray
    label: str = ""
    space: Space = Space.JOINT

    def __post_init__(self) -> None:
        matrix = _frozen(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"operator {self.label!r} is not square: {matrix.shape}")
        if self.space is Space.QUBIT and matrix.shape[0] != QUBIT_DIM:
            raise DimensionMismatch(f"qubit operator {self.label!r} has dimension {matrix.shape[0]}")
        if self.space is Space.JOINT and matrix.shape[0] % QUBIT_DIM:
            raise DimensionMismatch(f"joint operator {self.label!r} has odd dimension {matrix.shape[0]}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> Operator:
        return Operator(self.matrix.conj().T, f"{self.label}^dag", self.space)

    def __matmul__(self, other: Operator) -> Operator:
        if self.dim != other.dim or self.space is not other.space:
            raise DimensionMismatch(
                f"cannot compose {self.label!r} ({self.space.value}, {self.dim}) "
                f"with {other.label!r} ({other.space.value}, {other.dim})"
            )
        return Operator(self.matrix @ other.matrix, f"{self.label}*{other.label}", self.space)


@dataclass(frozen=True)
class JointState:
    """Pure vector or density matrix on qubit (x) cavity, tagged with a time in us."""

    data: np.ndarray
    time_us: float = 0.0

    def __post_init__(self) -> None:
        data = _frozen(self.data)
        if data.ndim == 1:
            if data.shape[0] % QUBIT_DIM:
                raise DimensionMismatch(f"state vector has odd length {data.shape[0]}")
        elif data.ndim == 2:
            if data.shape[0] != data.shape[1] or data.shape[0] % QUBIT_DIM:
                raise DimensionMismatch(f"density matrix has shape {data.shape}")
        else:
            raise DimensionMismatch(f"state data must be 1-D or 2-D, got {data.ndim}-D")
        object.__setattr__(self, "data", data)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def fock_dim(self) -> int:
        return self.dim // QUBIT_DIM

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def as_density(self) -> JointState:
        if not self.is_pure:
            return self
        return JointState(self.density(), self.time_us)

    def at(self, time_us: float) -> JointState:
        return replace(self, time_us=time_us)

    def validate(self) -> JointState:
        """Check the representation invariants; returns self for chaining."""
        if self.is_pure:
            norm = np.linalg.norm(self.data)
            if abs(norm - 1.0) > PURE_NORM_TOL:
                raise StateInvariantError(f"pure state norm {norm:.12g} differs from 1")
            return self
        rho = self.data
        asym = np.max(np.abs(rho - rho.conj().T))
        if asym > HERMITIAN_TOL:
            raise StateInvariantError(f"density matrix not Hermitian (max defect {asym:.3g})")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise StateInvariantError(f"density matrix trace {trace:.12g} differs from 1")
        min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if min_eig < -POSITIVITY_TOL:
            raise StateInvariantError(f"density matrix has eigenvalue {min_eig:.3g}")
        return self


def number_operator(cfg: HilbertConfig) -> Operator:
    n = np.arange(cfg.fock_dim, dtype=float)
    return Operator(np.diag(n), "n", Space.CAVITY)


def annihilation(cfg: HilbertConfig) -> Operator:
    """Cavity lowering operator with <n-1|a|n> = sqrt(n)."""
    return Operator(np.diag(np.sqrt(np.arange(1, cfg.fock_dim, dtype=float)), k=1), "a", Space.CAVITY)


def parity_operator(cfg: HilbertConfig) -> Operator:
    """Photon-number parity exp(i pi a^dag a) on the cavity factor."""
    signs = np.where(np.arange(cfg.fock_dim) % 2 == 0, 1.0, -1.0)
    return Operator(np.diag(signs), "Pi", Space.CAVITY)


@lru_cache(maxsize=512)
def _displacement_matrix(alpha: complex, fock_dim: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), k=1)
    generator = alpha * a.conj().T - np.conj(alpha) * a
    matrix = expm(generator)
    low = fock_dim - 10
    if low > 0:
        block = matrix[:, :low]
        defect = np.max(np.abs(block.conj().T @ block - np.eye(low)))
        if defect > UNITARITY_TOL:
            raise TruncationError(
                f"displacement by {alpha:.6g} is not unitary on the low-photon block "
                f"(defect {defect:.3g}); increase fock_dim"
            )
    matrix.setflags(write=False)
    return matrix


def displacement_operator(alpha: complex, cfg: HilbertConfig) -> Operator:
    """D(alpha) = exp(alpha a^dag - alpha* a), exponentiated on the truncated space."""
    alpha = complex(alpha)
    if not cfg.fits(alpha):
        raise TruncationError(
            f"displacement {alpha:.6g} violates |a|^2 + 6|a| <= fock_dim ({cfg.fock_dim})"
        )
    return Operator(_displacement_matrix(alpha, cfg.fock_dim), f"D({alpha:.6g})", Space.CAVITY)


def qubit_identity() -> Operator:
    return Operator(np.eye(QUBIT_DIM), "I2", Space.QUBIT)


def cavity_identity(cfg: HilbertConfig) -> Operator:
    return Operator(np.eye(cfg.fock_dim), "I", Space.CAVITY)


def sigma_z() -> Operator:
    """|e><e| - |g><g|."""
    return Operator(np.diag([-1.0, 1.0]), "sz", Space.QUBIT)


def sigma_minus() -> Operator:
    """|g><e|."""
    m = np.zeros((QUBIT_DIM, QUBIT_DIM))
    m[GROUND, EXCITED] = 1.0
    return Operator(m, "sm", Space.QUBIT)


def excited_projector() -> Operator:
    return Operator(np.diag([0.0, 1.0]), "Pe", Space.QUBIT)


def ground_projector() -> Operator:
    return Operator(np.diag([1.0, 0.0]), "Pg", Space.QUBIT)


def tensor(q_op: Operator, c_op: Operator) -> Operator:
    """Kronecker product with the qubit factor first."""
    if q_op.dim != QUBIT_DIM or q_op.space is Space.JOINT:
        raise DimensionMismatch(f"left factor {q_op.label!r} must be a 2x2 qubit operator")
    if c_op.space is Space.JOINT:
        raise DimensionMismatch(f"right factor {c_op.label!r} must be a cavity operator")
    return Operator(np.kron(q_op.matrix, c_op.matrix), f"{q_op.label}(x){c_op.label}", Space.JOINT)


def on_cavity(c_op: Operator) -> Operator:
    return tensor(qubit_identity(), c_op)


def on_qubit(q_op: Operator, cfg: HilbertConfig) -> Operator:
    return tensor(q_op, cavity_identity(cfg))


def basis(index: int, dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.complex128)
    vec[index] = 1.0
    return vec


def product_state(qubit: np.ndarray, cavity: np.ndarray, time_us: float = 0.0) -> JointState:
    qubit = np.asarray(qubit, dtype=np.complex128)
    if qubit.shape != (QUBIT_DIM,):
        raise DimensionMismatch(f"qubit vector must have length 2, got {qubit.shape}")
    return JointState(np.kron(qubit, np.asarray(cavity, dtype=np.complex128)), time_us)


def _check_dims(state: JointState, op: Operator) -> None:
    if op.space is not Space.JOINT or op.dim != state.dim:
        raise DimensionMismatch(
            f"operator {op.label!r} ({op.space.value}, {op.dim}) does not act on a "
            f"joint state of dimension {state.dim}"
        )


def apply_unitary(state: JointState, op: Operator) -> JointState:
    """U|psi> for pure states, U rho U^dag for densities."""
    _check_dims(state, op)
    u = op.matrix
    if state.is_pure:
        return JointState(u @ state.data, state.time_us)
    return JointState(u @ state.data @ u.conj().T, state.time_us)


def expectation(state: JointState, op: Operator) -> complex:
    _check_dims(state, op)
    if state.is_pure:
        return complex(np.vdot(state.data, op.matrix @ state.data))
    return complex(np.trace(op.matrix @ state.data))


def partial_trace(state: JointState, keep: Factor | str) -> np.ndarray:
    """Reduced density matrix of the kept factor."""
    keep = Factor(keep)
    n = state.fock_dim
    rho = state.density().reshape(QUBIT_DIM, n, QUBIT_DIM, n)
    if keep is Factor.QUBIT:
        return np.einsum("injn->ij", rho)
    return np.einsum("inim->nm", rho)


def fidelity(state: JointState, target: JointState) -> float:
    """Overlap <t|rho|t> (or |<t|psi>|^2) with a pure target, clipped to [0, 1]."""
    if not target.is_pure:
        raise ValueError("fidelity target must be a pure state")
    if state.dim != target.dim:
        raise DimensionMismatch(f"state dimension {state.dim} != target dimension {target.dim}")
    t = target.data
    if state.is_pure:
        value = abs(np.vdot(t, state.data)) ** 2
    else:
        value = np.vdot(t, state.data @ t).real
    return float(min(max(value, 0.0), 1.0))


def purity(state: JointState) -> float:
    if state.is_pure:
        return 1.0
    rho = state.data
    return float(min(max(np.real(np.vdot(rho, rho)), 0.0), 1.0))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """0.5 * ||rho - sigma||_1 for Hermitian arguments."""
    diff = symmetrize(np.asarray(rho) - np.asarray(sigma))
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def symmetrize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)
