"""
Time Evolution
==============

Open-system evolution of the qubit (x) cavity state:

- ``exact``: closed-form propagator for H = -chi |e><e| a^dag a with cavity
  loss, qubit relaxation and pure dephasing. Every qubit block evolves under
  the photon-loss channel; the excited blocks pick up the dispersive phase.
- ``adaptive-rk``: scipy ``solve_ivp`` on the flattened Lindblad equation.
- ``fixed-rk4``: classical RK4 with per-step symmetrization.

plus Monte-Carlo wave-function trajectories and the coherent-state
closed form for pure cavity loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import gammaln

from cat_aqec.hilbert import (
    EXCITED,
    GROUND,
    QUBIT_DIM,
    HilbertConfig,
    JointState,
    Operator,
    SimulationError,
    annihilation,
    excited_projector,
    number_operator,
    on_cavity,
    on_qubit,
    sigma_minus,
    sigma_z,
    symmetrize,
    tensor,
)
from cat_aqec.states import coherent_amplitudes, coherent_overlap

logger = logging.getLogger(__name__)

CHANNEL_NAMES = ("cavity_loss", "qubit_relaxation", "qubit_dephasing")
DEFAULT_RK4_STEP_US = 1e-5
_SERIES_CUTOFF = 1e-6


class StepSizeUnderflow(SimulationError):
    """Raised when the adaptive integrator cannot meet its tolerances."""


class IntegratorMethod(str, Enum):
    """Master-equation engines."""

    EXACT = "exact"
    ADAPTIVE_RK = "adaptive-rk"
    FIXED_RK4 = "fixed-rk4"


@dataclass(frozen=True)
class NoiseModel:
    """Decay rates in 1/us and coherence times in us; ``inf`` disables a channel."""

    kappa: float = 0.0
    t1: float = math.inf
    t2: float = math.inf

    def __post_init__(self) -> None:
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be a finite non-negative rate, got: {self.kappa!r}")
        if not (self.t1 > 0.0 and self.t2 > 0.0):
            raise ValueError(f"t1 and t2 must be positive, got: t1={self.t1!r}, t2={self.t2!r}")
        if self.t2 > 2.0 * self.t1 * (1.0 + 1e-12):
            raise ValueError(f"t2 ({self.t2!r}) must not exceed 2 * t1 ({self.t1!r})")

    @classmethod
    def from_times(cls, tcav: float, t1: float, t2: float) -> NoiseModel:
        return cls(kappa=0.0 if math.isinf(tcav) else 1.0 / tcav, t1=t1, t2=t2)

    @classmethod
    def noiseless(cls) -> NoiseModel:
        return cls()

    @property
    def gamma1(self) -> float:
        return 1.0 / self.t1

    @property
    def gamma_phi(self) -> float:
        """1/T_phi = 1/T2 - 1/(2 T1)."""
        return max(1.0 / self.t2 - 0.5 / self.t1, 0.0)

    @property
    def tphi(self) -> float:
        rate = self.gamma_phi
        return math.inf if rate == 0.0 else 1.0 / rate

    @property
    def is_noiseless(self) -> bool:
        return self.kappa == 0.0 and self.gamma1 == 0.0 and self.gamma_phi == 0.0

    def rates(self) -> tuple[float, float, float]:
        """Prefactors squared of the collapse operators, in CHANNEL_NAMES order."""
        return (self.kappa, self.gamma1, 0.5 * self.gamma_phi)

    def collapse_operators(self, cfg: HilbertConfig) -> list[Operator]:
        kappa, gamma1, gamma_dephase = self.rates()
        return [
            Operator(math.sqrt(kappa) * on_cavity(annihilation(cfg)).matrix, "L_cav"),
            Operator(math.sqrt(gamma1) * on_qubit(sigma_minus(), cfg).matrix, "L_T1"),
            Operator(math.sqrt(gamma_dephase) * on_qubit(sigma_z(), cfg).matrix, "L_phi"),
        ]


@dataclass(frozen=True)
class IntegratorSettings:
    method: IntegratorMethod = IntegratorMethod.EXACT
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", IntegratorMethod(self.method))
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError(
                f"integrator tolerances must be positive, got: rel_tol={self.rel_tol!r}, abs_tol={self.abs_tol!r}"
            )
        if self.max_step <= 0:
            raise ValueError(f"max_step must be positive, got: {self.max_step!r}")

    def tightened(self, factor: float = 0.5) -> IntegratorSettings:
        return IntegratorSettings(self.method, self.rel_tol * factor, self.abs_tol * factor, self.max_step)


@dataclass(frozen=True)
class JumpRecord:
    """Jump times (us, relative to the evolution start) and collapse-channel indices."""

    jumps: tuple[tuple[float, int], ...] = ()

    def __post_init__(self) -> None:
        jumps = tuple((float(t), int(k)) for t, k in self.jumps)
        for (t0, _), (t1, _) in zip(jumps, jumps[1:]):
            if not t1 > t0:
                raise ValueError(f"jump times must be strictly increasing, got {t0!r} then {t1!r}")
        object.__setattr__(self, "jumps", jumps)

    def __len__(self) -> int:
        return len(self.jumps)

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.jumps]

    def count(self, channel: Optional[int] = None) -> int:
        if channel is None:
            return len(self.jumps)
        return sum(1 for _, k in self.jumps if k == channel)


class CoherentTerm(NamedTuple):
    """weight * |ket><bra| with coherent-state amplitudes."""

    weight: complex
    bra: complex
    ket: complex


def dispersive_hamiltonian(chi: float, cfg: HilbertConfig) -> Operator:
    """H = -chi |e><e| (x) a^dag a, chi in rad/us."""
    if not chi > 0:
        raise ValueError(f"chi must be positive, got: {chi!r}")
    op = tensor(excited_projector(), number_operator(cfg))
    return Operator(-chi * op.matrix, "H_disp")


def zero_hamiltonian(cfg: HilbertConfig) -> Operator:
    return Operator(np.zeros((cfg.dim, cfg.dim)), "0")


def _dispersive_shift(hamiltonian: Operator, fock_dim: int) -> float:
    """Recover chi from a Hamiltonian of the form -chi |e><e| a^dag a."""
    m = hamiltonian.matrix
    diag = np.diag(m)
    scale = max(1.0, float(np.max(np.abs(diag))))
    off = m - np.diag(diag)
    g_block = diag[:fock_dim]
    e_block = diag[fock_dim:]
    chi = -float(e_block[1].real) if fock_dim > 1 else 0.0
    n = np.arange(fock_dim)
    if (
        np.max(np.abs(off)) > 1e-12 * scale
        or np.max(np.abs(g_block)) > 1e-12 * scale
        or np.max(np.abs(e_block + chi * n)) > 1e-9 * scale
    ):
        raise ValueError("the exact integrator requires H = -chi |e><e| a^dag a")
    return chi


def _phi1(z: np.ndarray | complex, t: float) -> np.ndarray:
    """(exp(z t) - 1) / z, continuous at z = 0."""
    z = np.asarray(z, dtype=np.complex128)
    zt = z * t
    small = np.abs(zt) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, z)
    series = t * (1.0 + zt / 2.0 + zt * zt / 6.0)
    return np.where(small, series, (np.exp(zt) - 1.0) / safe)


def _loss_series(block: np.ndarray, coeff: complex, fock_dim: int) -> np.ndarray:
    """sum_k coeff^k / k! a^k X a^dag^k on the truncated cavity space."""
    out = np.array(block, dtype=np.complex128)
    if coeff == 0:
        return out
    log_c = math.log(abs(coeff))
    phase = coeff / abs(coeff)
    lg = gammaln(np.arange(fock_dim) + 1.0)
    for k in range(1, fock_dim):
        m = fock_dim - k
        # log sqrt((n+k)!/n!) for n = 0..m-1
        ls = 0.5 * (lg[k:] - lg[:m])
        weights = np.exp(k * log_c - lg[k] + ls[:, None] + ls[None, :])
        out[:m, :m] += phase**k * weights * block[k:, k:]
    return out


def _exact_step(rho: np.ndarray, chi: float, noise: NoiseModel, t: float, fock_dim: int) -> np.ndarray:
    n = np.arange(fock_dim, dtype=float)
    kappa, gamma1 = noise.kappa, noise.gamma1
    blocks = rho.reshape(QUBIT_DIM, fock_dim, QUBIT_DIM, fock_dim)
    gg, eg, ee = blocks[GROUND, :, GROUND, :], blocks[EXCITED, :, GROUND, :], blocks[EXCITED, :, EXCITED, :]

    damp = np.exp(-0.5 * kappa * n * t)
    p_loss = -math.expm1(-kappa * t)
    lam_ee = damp[:, None] * _loss_series(ee, p_loss, fock_dim) * damp[None, :]
    lam_gg = damp[:, None] * _loss_series(gg, p_loss, fock_dim) * damp[None, :]

    dn = n[:, None] - n[None, :]
    rotation = np.exp(1j * chi * t * dn)
    new_ee = math.exp(-gamma1 * t) * rotation * lam_ee
    feed = gamma1 * _phi1(1j * chi * dn - gamma1, t) if gamma1 > 0 else 0.0
    new_gg = lam_gg + feed * lam_ee

    w = 1j * chi - kappa
    f = complex(kappa * _phi1(w, t)) if kappa > 0 else 0.0
    gamma_coh = 0.5 * gamma1 + noise.gamma_phi
    left = math.exp(-gamma_coh * t) * np.exp(1j * chi * n * t) * damp
    new_eg = left[:, None] * _loss_series(eg, f, fock_dim) * damp[None, :]

    out = np.empty((QUBIT_DIM, fock_dim, QUBIT_DIM, fock_dim), dtype=np.complex128)
    out[GROUND, :, GROUND, :] = new_gg
    out[EXCITED, :, EXCITED, :] = new_ee
    out[EXCITED, :, GROUND, :] = new_eg
    out[GROUND, :, EXCITED, :] = new_eg.conj().T
    return out.reshape(rho.shape)


def _effective_hamiltonian(hamiltonian: Operator, collapse: Sequence[Operator]) -> np.ndarray:
    h_eff = np.array(hamiltonian.matrix, dtype=np.complex128)
    for op in collapse:
        h_eff = h_eff - 0.5j * (op.matrix.conj().T @ op.matrix)
    return h_eff


def _lindblad_rhs(h_eff: np.ndarray, collapse: Sequence[Operator]):
    jumps = [op.matrix for op in collapse if np.any(op.matrix)]
    jumps_dag = [j.conj().T for j in jumps]
    h_eff_dag = h_eff.conj().T

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = -1j * (h_eff @ rho - rho @ h_eff_dag)
        for j, jd in zip(jumps, jumps_dag):
            out += j @ rho @ jd
        return out

    return rhs


def _adaptive(rho: np.ndarray, rhs, duration: float, settings: IntegratorSettings) -> np.ndarray:
    dim = rho.shape[0]
    sol = solve_ivp(
        lambda _t, y: rhs(y.reshape(dim, dim)).ravel(),
        (0.0, duration),
        rho.ravel(),
        method="DOP853",
        rtol=settings.rel_tol,
        atol=settings.abs_tol,
        max_step=settings.max_step,
    )
    if not sol.success:
        raise StepSizeUnderflow(f"adaptive integration failed after {sol.t[-1]:.6g} us: {sol.message}")
    logger.debug("adaptive-rk: %d RHS evaluations over %.6g us", sol.nfev, duration)
    return sol.y[:, -1].reshape(dim, dim)


def _rk4(rho: np.ndarray, rhs, duration: float, settings: IntegratorSettings) -> np.ndarray:
    step = settings.max_step if math.isfinite(settings.max_step) else DEFAULT_RK4_STEP_US
    n_steps = max(1, math.ceil(duration / step))
    h = duration / n_steps
    for _ in range(n_steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h * k1)
        k3 = rhs(rho + 0.5 * h * k2)
        k4 = rhs(rho + h * k3)
        rho = symmetrize(rho + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4))
    logger.debug("fixed-rk4: %d steps of %.3g us", n_steps, h)
    return rho


def evolve_master(
    state: JointState,
    hamiltonian: Operator,
    noise: NoiseModel,
    duration: float,
    settings: Optional[IntegratorSettings] = None,
) -> JointState:
    """Evolve under the Lindblad equation for ``duration`` us.

    Pure inputs are promoted to density matrices. The result is validated
    (Hermiticity, trace and positivity) before it is returned.
    """
    if duration < 0:
        raise ValueError(f"duration must be non-negative, got: {duration!r}")
    settings = settings or IntegratorSettings()
    rho = state.density()
    if duration == 0:
        return JointState(rho, state.time_us).validate()
    cfg = HilbertConfig(state.fock_dim)

    if settings.method is IntegratorMethod.EXACT:
        chi = _dispersive_shift(hamiltonian, cfg.fock_dim)
        out = _exact_step(rho, chi, noise, duration, cfg.fock_dim)
    else:
        collapse = noise.collapse_operators(cfg)
        rhs = _lindblad_rhs(_effective_hamiltonian(hamiltonian, collapse), collapse)
        if settings.method is IntegratorMethod.ADAPTIVE_RK:
            out = _adaptive(rho, rhs, duration, settings)
        else:
            out = _rk4(rho, rhs, duration, settings)

    return JointState(symmetrize(out), state.time_us + duration).validate()


class _NoJumpPropagator:
    """exp(-i H_eff s) applied to a vector; diagonal H_eff takes the elementwise path."""

    def __init__(self, h_eff: np.ndarray):
        diag = np.diag(h_eff)
        self._diagonal = not np.any(h_eff - np.diag(diag))
        if self._diagonal:
            self._eig = diag
            self._vecs = self._inv = None
        else:
            self._eig, self._vecs = np.linalg.eig(h_eff)
            self._inv = np.linalg.inv(self._vecs)

    def __call__(self, psi: np.ndarray, s: float) -> np.ndarray:
        phases = np.exp(-1j * self._eig * s)
        if self._diagonal:
            return phases * psi
        return self._vecs @ (phases * (self._inv @ psi))


def evolve_trajectory(
    state: JointState,
    hamiltonian: Operator,
    noise: NoiseModel,
    duration: float,
    seed: int | np.random.Generator | np.random.SeedSequence | None = None,
) -> tuple[JointState, JumpRecord]:
    """One Monte-Carlo wave-function trajectory.

    The no-jump evolution runs under H - (i/2) sum L^dag L until the squared
    norm falls to a uniform draw; the jump channel is chosen with probability
    proportional to ||L_k psi||^2.
    """
    if not state.is_pure:
        raise ValueError("evolve_trajectory requires a pure state")
    if duration < 0:
        raise ValueError(f"duration must be non-negative, got: {duration!r}")
    rng = np.random.default_rng(seed)
    cfg = HilbertConfig(state.fock_dim)
    collapse = [op.matrix for op in noise.collapse_operators(cfg)]
    propagate = _NoJumpPropagator(_effective_hamiltonian(hamiltonian, [Operator(c) for c in collapse]))

    psi = np.array(state.data)
    elapsed = 0.0
    jumps: list[tuple[float, int]] = []
    while True:
        r = rng.random()
        remaining = duration - elapsed
        end = propagate(psi, remaining)
        if np.vdot(end, end).real > r:
            psi = end / np.linalg.norm(end)
            break
        start = psi

        def norm_gap(s: float) -> float:
            v = propagate(start, s)
            return np.vdot(v, v).real - r

        tau = brentq(norm_gap, 0.0, remaining, xtol=1e-13)
        psi = propagate(start, tau)
        elapsed += tau
        weights = np.array([np.vdot(c @ psi, c @ psi).real for c in collapse])
        total = weights.sum()
        if total <= 0.0:
            psi = psi / np.linalg.norm(psi)
            continue
        channel = int(rng.choice(len(collapse), p=weights / total))
        psi = collapse[channel] @ psi
        psi = psi / np.linalg.norm(psi)
        if jumps and elapsed <= jumps[-1][0]:
            elapsed = math.nextafter(jumps[-1][0], math.inf)
        jumps.append((elapsed, channel))
        logger.debug("jump on %s at t=%.6g us", CHANNEL_NAMES[channel], elapsed)

    return JointState(psi, state.time_us + duration).validate(), JumpRecord(tuple(jumps))


def trajectory_ensemble(
    state: JointState,
    hamiltonian: Operator,
    noise: NoiseModel,
    duration: float,
    n_trajectories: int,
    seed: int | None = None,
) -> tuple[np.ndarray, list[JumpRecord]]:
    """Average density matrix of independent trajectories with spawned seeds."""
    if n_trajectories < 1:
        raise ValueError(f"n_trajectories must be positive, got: {n_trajectories!r}")
    children = np.random.SeedSequence(seed).spawn(n_trajectories)
    rho = np.zeros((state.dim, state.dim), dtype=np.complex128)
    records = []
    for child in children:
        final, record = evolve_trajectory(state, hamiltonian, noise, duration, child)
        rho += np.outer(final.data, final.data.conj())
        records.append(record)
    return rho / n_trajectories, records


def terms_from_components(components: Sequence[tuple[complex, complex]]) -> list[CoherentTerm]:
    """|psi><psi| for psi = sum_j c_j |a_j>, as coherent outer-product terms."""
    return [
        CoherentTerm(complex(cj * np.conj(ck)), complex(ak), complex(aj))
        for cj, aj in components
        for ck, ak in components
    ]


def damp_superposition_closed_form(
    terms: Sequence[CoherentTerm],
    t: float,
    kappa: float,
) -> list[CoherentTerm]:
    """Exact photon-loss evolution of sum w |ket><bra|.

    Amplitudes shrink by exp(-kappa t / 2); each weight picks up
    <bra|ket>^(1 - exp(-kappa t)).
    """
    if t < 0:
        raise ValueError(f"damping time must be non-negative, got: {t!r}")
    loss = -math.expm1(-kappa * t)
    shrink = math.exp(-0.5 * kappa * t)
    out = []
    for term in terms:
        ket, bra = complex(term.ket), complex(term.bra)
        exponent = (ket * bra.conjugate() - 0.5 * (abs(ket) ** 2 + abs(bra) ** 2)) * loss
        out.append(CoherentTerm(complex(term.weight) * np.exp(exponent), bra * shrink, ket * shrink))
    return out


def terms_density(terms: Sequence[CoherentTerm], cfg: HilbertConfig) -> np.ndarray:
    """Cavity density matrix of coherent outer-product terms."""
    rho = np.zeros((cfg.fock_dim, cfg.fock_dim), dtype=np.complex128)
    for term in terms:
        ket = coherent_amplitudes(term.ket, cfg.fock_dim)
        bra = coherent_amplitudes(term.bra, cfg.fock_dim)
        rho += term.weight * np.outer(ket, bra.conj())
    return rho


def terms_fidelity(terms: Sequence[CoherentTerm], target: Sequence[tuple[complex, complex]]) -> float:
    """<t|rho|t> for a coherent-component target, without truncation."""
    total = 0.0 + 0.0j
    for term in terms:
        left = sum(c.conjugate() * coherent_overlap(a, term.ket) for c, a in ((complex(c), complex(a)) for c, a in target))
        right = sum(c * coherent_overlap(term.bra, a) for c, a in ((complex(c), complex(a)) for c, a in target))
        total += term.weight * left * right
    return float(min(max(total.real, 0.0), 1.0))
