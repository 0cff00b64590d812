"""
Channel Model and Analysis
==========================

Channel-level predictions for the autonomous protocol: Poisson statistics of
photon losses modulo 4, the wait and correction channels acting on the
weights of psi^(0..3), the product formula for the corrected fidelity, the
effective decay rate and its optimal waiting time. Also lifetime fitting,
Husimi-Q grids and the uncorrected baselines.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import gammaln

from cat_aqec.dynamics import damp_superposition_closed_form, terms_fidelity, terms_from_components
from cat_aqec.hilbert import SimulationError
from cat_aqec.states import CodeParams, LogicalQubit, logical_components

logger = logging.getLogger(__name__)

TAIL_BOUND = 1e-15
MAX_FIT_RESIDUAL = 0.05
MIN_FIT_POINTS = 5


class FitDiverged(SimulationError):
    """Raised when an exponential fit does not describe the series."""


class FitInputError(SimulationError, ValueError):
    """Raised when a series cannot be fitted: too few points or a fidelity outside (0, 1]."""


@dataclass(frozen=True)
class JumpStats:
    """Probabilities of k (mod 4) photon losses for epsilon = kappa Tw nbar."""

    epsilon: float
    p: tuple[float, float, float, float]

    @property
    def approximants(self) -> dict[str, float]:
        """Second-order forms p0 ~ 1 - e + e^2/2, p1 ~ e - e^2, p2 + p3 ~ e^2/2."""
        e = self.epsilon
        return {"p0": 1 - e + e * e / 2, "p1": e - e * e, "p23": e * e / 2}


def poisson_mod4(epsilon: float) -> JumpStats:
    """Sum the Poisson series by residue class, stopping once eps^M/M! e^eps < 1e-15."""
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be non-negative, got: {epsilon!r}")
    p = [0.0, 0.0, 0.0, 0.0]
    term = math.exp(-epsilon)
    m = 0
    while True:
        p[m % 4] += term
        m += 1
        # ratio eps^m/m! * e^eps, in log form to avoid overflow
        if epsilon == 0 or m * math.log(epsilon) - math.lgamma(m + 1) + epsilon < math.log(TAIL_BOUND):
            break
        term *= epsilon / m
    return JumpStats(float(epsilon), (p[0], p[1], p[2], p[3]))


@dataclass(frozen=True)
class CorrectionBudget:
    """Error budget of one correction cycle; epsilon_wait follows epsilon_jump."""

    epsilon_correct: float
    epsilon_jump: float
    tc_us: float
    tw_us: float

    def __post_init__(self) -> None:
        for name in ("epsilon_correct", "epsilon_jump"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got: {value!r}")
        if self.tc_us < 0 or self.tw_us < 0:
            raise ValueError(f"durations must be non-negative, got: tc={self.tc_us!r}, tw={self.tw_us!r}")

    @property
    def epsilon_wait(self) -> float:
        """Probability of two or more losses in one wait, eps_jump^2 / 2."""
        return 0.5 * self.epsilon_jump**2


class Prediction(NamedTuple):
    fidelity: float
    time_us: float


def predicted_fidelity(n_cycles: int, budget: CorrectionBudget) -> Prediction:
    """((1 - eps_correct)(1 - eps_wait))^N at t_N = N (Tc + Tw)."""
    if n_cycles < 0:
        raise ValueError(f"n_cycles must be non-negative, got: {n_cycles!r}")
    per_cycle = (1.0 - budget.epsilon_correct) * (1.0 - budget.epsilon_wait)
    return Prediction(per_cycle**n_cycles, n_cycles * (budget.tc_us + budget.tw_us))


@dataclass(frozen=True)
class ChannelState:
    """Weights of psi^(0..3), weight lost to uncorrectable errors, amplitude tag."""

    weights: tuple[float, float, float, float]
    leaked: float = 0.0
    alpha: complex = 2.0

    @classmethod
    def initial(cls, code: CodeParams) -> ChannelState:
        return cls((1.0, 0.0, 0.0, 0.0), 0.0, code.alpha)

    @property
    def total(self) -> float:
        return sum(self.weights) + self.leaked

    @property
    def fidelity(self) -> float:
        return self.weights[0]


def kraus_wait(state: ChannelState, epsilon: float, nbar: Optional[float] = None) -> ChannelState:
    """Convolve the weights with the mod-4 loss distribution and damp the amplitude.

    ``nbar`` converts epsilon back to kappa Tw; it defaults to |alpha|^2 of the tag.
    """
    p = poisson_mod4(epsilon).p
    w = state.weights
    new = tuple(sum(w[j] * p[(k - j) % 4] for j in range(4)) for k in range(4))
    nbar = abs(state.alpha) ** 2 if nbar is None else nbar
    shrink = math.exp(-0.5 * epsilon / nbar) if nbar > 0 else 1.0
    return ChannelState(new, state.leaked, state.alpha * shrink)  # type: ignore[arg-type]


def kraus_correct(state: ChannelState, epsilon_correct: float, alpha: complex) -> ChannelState:
    """Map psi^(0), psi^(1) to psi^(0) and psi^(2), psi^(3) to psi^(2), restoring ``alpha``."""
    w = state.weights
    keep = 1.0 - epsilon_correct
    new = (keep * (w[0] + w[1]), 0.0, keep * (w[2] + w[3]), 0.0)
    return ChannelState(new, state.leaked + epsilon_correct * sum(w), complex(alpha))


def channel_fidelity_series(n_cycles: int, budget: CorrectionBudget, code: CodeParams) -> np.ndarray:
    """Weight of psi^(0) after 0..N iterations of wait followed by correction."""
    state = ChannelState.initial(code)
    out = [state.fidelity]
    for _ in range(n_cycles):
        state = kraus_wait(state, budget.epsilon_jump, code.nbar)
        state = kraus_correct(state, budget.epsilon_correct, code.alpha)
        out.append(state.fidelity)
    return np.array(out)


def effective_decay_rate(epsilon_correct: float, kappa: float, nbar: float, tw: float) -> float:
    """(eps_correct + (kappa Tw nbar)^2 / 2) / Tw, valid for Tc << Tw."""
    if tw <= 0:
        return math.inf
    return (epsilon_correct + 0.5 * (kappa * tw * nbar) ** 2) / tw


class DecayPrediction(NamedTuple):
    kappa_eff: float
    optimal_tw: float
    kappa_eff_at_optimum: float

    @property
    def lifetime_at_optimum(self) -> float:
        return 1.0 / self.kappa_eff_at_optimum if self.kappa_eff_at_optimum > 0 else math.inf


def effective_decay(budget: CorrectionBudget, kappa: float, nbar: float) -> DecayPrediction:
    """Effective decay rate at budget.tw_us, the optimal Tw and the rate there."""
    if not 0.0 < budget.epsilon_correct < 1.0:
        raise ValueError(f"epsilon_correct must lie in (0, 1), got: {budget.epsilon_correct!r}")
    if not kappa * nbar > 0:
        raise ValueError(f"kappa * nbar must be positive, got: {kappa * nbar!r}")
    root = math.sqrt(2.0 * budget.epsilon_correct)
    return DecayPrediction(
        kappa_eff=effective_decay_rate(budget.epsilon_correct, kappa, nbar, budget.tw_us),
        optimal_tw=root / (kappa * nbar),
        kappa_eff_at_optimum=kappa * nbar * root,
    )


@dataclass(frozen=True)
class LifetimeFit:
    t_eff: float
    amplitude: float
    residual: float
    n_points: int


def _decay(t: np.ndarray, amplitude: float, rate: float) -> np.ndarray:
    return amplitude * np.exp(-rate * t)


def fit_lifetime(series: Sequence[tuple[float, float]], burn_in: int = 0) -> LifetimeFit:
    """Least-squares fit of F(t) = A exp(-t / T_eff) after dropping ``burn_in`` points.

    A non-decaying series gives T_eff = inf. The residual is the RMS deviation.
    """
    points = list(series)[burn_in:]
    if burn_in and len(points) < MIN_FIT_POINTS:
        logger.warning("burn-in of %d leaves %d points", burn_in, len(points))
    if len(points) < MIN_FIT_POINTS:
        raise FitInputError(f"fit_lifetime needs at least {MIN_FIT_POINTS} points, got {len(points)}")
    t = np.array([p[0] for p in points], dtype=float)
    f = np.array([p[1] for p in points], dtype=float)
    if np.any(f <= 0) or np.any(f > 1 + 1e-9):
        raise FitInputError("fidelities must lie in (0, 1]")

    slope, intercept = np.polyfit(t, np.log(f), 1)
    if slope >= 0:
        amplitude = float(np.mean(f))
        residual = float(np.sqrt(np.mean((f - amplitude) ** 2)))
        rate = 0.0
    else:
        try:
            (amplitude, rate), _ = curve_fit(_decay, t, f, p0=(math.exp(intercept), -slope))
        except (RuntimeError, ValueError) as e:
            raise FitDiverged(f"exponential fit failed: {e}") from e
        residual = float(np.sqrt(np.mean((f - _decay(t, amplitude, rate)) ** 2)))
    if residual > MAX_FIT_RESIDUAL:
        raise FitDiverged(f"fit residual {residual:.3g} exceeds {MAX_FIT_RESIDUAL}")
    t_eff = 1.0 / rate if rate > 0 else math.inf
    return LifetimeFit(float(t_eff), float(amplitude), residual, len(points))


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -5.0
    x_max: float = 5.0
    y_min: float = -5.0
    y_max: float = 5.0
    nx: int = 101
    ny: int = 101

    def __post_init__(self) -> None:
        bounds = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(math.isfinite(b) for b in bounds):
            raise ValueError(f"grid bounds must be finite, got: {bounds!r}")
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid sizes must be positive, got: nx={self.nx!r}, ny={self.ny!r}")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def header(self) -> str:
        return (
            f"# x_min={self.x_min:g},x_max={self.x_max:g},y_min={self.y_min:g},"
            f"y_max={self.y_max:g},nx={self.nx},ny={self.ny}"
        )


def phase_space_grid(rho: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Husimi Q(gamma) = <gamma|rho|gamma> / pi; rows ascend in Im(gamma)."""
    rho = np.asarray(rho)
    n = np.arange(rho.shape[0])
    gammas = (grid.xs[None, :] + 1j * grid.ys[:, None]).ravel()
    vectors = (
        np.power(gammas[None, :], n[:, None])
        * np.exp(-0.5 * gammaln(n + 1.0))[:, None]
        * np.exp(-0.5 * np.abs(gammas) ** 2)[None, :]
    )
    q = np.real(np.sum(vectors.conj() * (rho @ vectors), axis=0)) / math.pi
    return np.clip(q, 0.0, None).reshape(grid.ny, grid.nx)


def uncorrected_fidelity(code: CodeParams, q: LogicalQubit, kappa: float, times: Sequence[float]) -> np.ndarray:
    """Fidelity of psi^(0) to itself under pure cavity loss, in closed form."""
    components = logical_components(0, code, q)
    terms = terms_from_components(components)
    return np.array([terms_fidelity(damp_superposition_closed_form(terms, t, kappa), components) for t in times])


def bare_qubit_fidelity(t1: float, times: Sequence[float]) -> np.ndarray:
    return np.exp(-np.asarray(times, dtype=float) / t1)
