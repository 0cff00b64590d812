"""
Protocol Circuits
=================

Compiles the encode, decode and three-part correction sequences, and runs
the two error-correction protocols:

- autonomous (AQEC): wait, correct with a mid-sequence qubit reset, repeat;
  a single density matrix is propagated.
- measurement-based (MBQEC): trajectories with stroboscopic parity
  measurements; a jump counter selects the correction.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from cat_aqec.dynamics import dispersive_hamiltonian, evolve_master, evolve_trajectory
from cat_aqec.gates import (
    ConditionalWait,
    Displace,
    PulseSequence,
    QubitRotation,
    Reset,
    SelectiveRotation,
    execute_sequence,
)
from cat_aqec.hilbert import (
    GROUND,
    HilbertConfig,
    JointState,
    SimulationError,
    basis,
    expectation,
    fidelity,
    on_cavity,
    parity_operator,
    product_state,
    purity,
)
from cat_aqec.states import CARDINAL_STATES, CodeParams, LogicalQubit, logical_state

if TYPE_CHECKING:
    from cat_aqec.config import ExperimentConfig

logger = logging.getLogger(__name__)

PI = math.pi
ZERO_PROBABILITY = 1e-14


class ZeroProbability(SimulationError):
    """Raised when a sampled measurement branch has vanishing probability."""


@dataclass(frozen=True)
class ProtocolParams:
    """Code instance, dispersive shift (rad/us) and waiting time (us).

    The damped quantities are properties so they always follow ``tw``.
    """

    code: CodeParams
    chi: float
    tw: float = 0.0
    kappa: float = 0.0
    t_sel: float = 0.054

    def __post_init__(self) -> None:
        if self.tw < 0:
            raise ValueError(f"tw must be non-negative, got: {self.tw!r}")
        if not self.chi > 0:
            raise ValueError(f"chi must be positive, got: {self.chi!r}")

    @classmethod
    def from_config(cls, config: ExperimentConfig, tw: Optional[float] = None) -> ProtocolParams:
        return cls(
            config.code_params(),
            config.chi,
            config.tw_us if tw is None else tw,
            config.kappa,
            config.t_sel_us,
        )

    @property
    def alpha(self) -> complex:
        return self.code.alpha

    @property
    def nbar(self) -> float:
        return self.code.nbar

    @property
    def beta(self) -> complex:
        return self.code.beta

    @property
    def alpha_damped(self) -> complex:
        return self.code.alpha * math.exp(-0.5 * self.kappa * self.tw)

    @property
    def nbar_damped(self) -> float:
        return abs(self.alpha_damped) ** 2

    @property
    def beta_damped(self) -> complex:
        return self.alpha_damped * (1j - 1)

    @property
    def beta_repump(self) -> complex:
        """(beta' - beta) / 2."""
        return 0.5 * (self.beta_damped - self.beta)

    @property
    def half_wait(self) -> float:
        return 0.5 * PI / self.chi

    @property
    def pi_wait(self) -> float:
        return PI / self.chi

    def sel(self, theta: float, eta: float) -> SelectiveRotation:
        return SelectiveRotation(theta, eta, self.t_sel)


@dataclass(frozen=True)
class CycleReport:
    cycle: int
    time_us: float
    fidelity: float
    purity: float
    parity: float
    stage: str = "cycle"


def build_encode(p: ProtocolParams) -> PulseSequence:
    """Maps (c_g|g> + c_e|e>) (x) |0> to |g> (x) (c_g C+_a + c_e C+_ia)."""
    a, b, nbar = p.alpha, p.beta, p.nbar
    wait = ConditionalWait(p.half_wait)
    return PulseSequence(
        (
            Displace(a),
            wait,
            Displace(-1j * a),
            p.sel(-PI / 2, 0.0),
            Displace(b),
            wait,
            p.sel(PI / 2, 0.0),
            Displace(-1j * b),
            wait,
            p.sel(-PI, 2 * nbar),
            Displace(-b),
            p.sel(-PI, 2 * nbar),
            Displace(-a),
        ),
        "encode",
    )


def build_decode(p: ProtocolParams) -> PulseSequence:
    a, b, nbar = p.alpha, p.beta, p.nbar
    wait = ConditionalWait(p.half_wait)
    return PulseSequence(
        (
            Displace(a),
            p.sel(PI, 0.0),
            Displace(1j * b),
            wait,
            p.sel(PI, -2 * nbar),
            Displace(b),
            wait,
            p.sel(-PI / 2, 2 * nbar),
            Displace(-1j * b),
            p.sel(PI / 2, 0.0),
            Displace(-1j * a),
            wait,
            Displace(-a),
        ),
        "decode",
    )


def build_correct_parts(p: ProtocolParams) -> tuple[PulseSequence, PulseSequence, PulseSequence]:
    """Entropy transfer and reset, amplitude re-pump, re-encoding."""
    a, b, nbar = p.alpha, p.beta, p.nbar
    a1, b1, nbar1 = p.alpha_damped, p.beta_damped, p.nbar_damped
    wait = ConditionalWait(p.half_wait)
    transfer = PulseSequence(
        (
            Displace(1j * a1),
            p.sel(PI, -2 * nbar1),
            Displace(-b1),
            wait,
            p.sel(PI, -2 * nbar1),
            Displace(1j * b1),
            wait,
            p.sel(PI / 2, PI / 2),
            Reset(),
        ),
        "correct-a",
    )
    # The ground branch sits at a'(1 - i) and must reach a(1 - i): two
    # half-steps of +beta_repump around the parity flip.
    repump = PulseSequence(
        (
            p.sel(PI, nbar - nbar1 - PI / 4),
            Displace(p.beta_repump),
            ConditionalWait(p.pi_wait),
            Displace(p.beta_repump),
            p.sel(-PI, 0.0),
        ),
        "correct-b",
    )
    reencode = PulseSequence(
        (
            p.sel(PI / 2, 0.0),
            Displace(b),
            wait,
            p.sel(PI / 2, 0.0),
            Displace(-1j * b),
            wait,
            p.sel(-PI, 2 * nbar),
            Displace(-b),
            p.sel(-PI, 2 * nbar),
            Displace(-a),
        ),
        "correct-c",
    )
    return transfer, repump, reencode


def build_correct(p: ProtocolParams) -> PulseSequence:
    transfer, repump, reencode = build_correct_parts(p)
    return PulseSequence((transfer + repump + reencode).steps, "correct")


def build_mbqec_correct(p: ProtocolParams, jumps: int) -> PulseSequence:
    """Correction for a known jump count, with no qubit reset.

    After the transfer block the qubit is (|g> + (-1)^c |e>)/sqrt2 and is
    rotated back to |g>. For c mod 4 in {2, 3} a 2 pi selective rotation
    flips the sign of the vacuum component, which carries c_e.
    """
    transfer, repump, reencode = build_correct_parts(p)
    c = jumps % 4
    steps = list(transfer.without(Reset).steps)
    steps.append(QubitRotation(-PI / 2 if c % 2 == 0 else PI / 2, 0.0))
    if c in (2, 3):
        steps.append(p.sel(2 * PI, 0.0))
    steps.extend(repump.steps)
    steps.extend(reencode.steps)
    return PulseSequence(tuple(steps), f"mbqec-correct-{c}")


def ground_logical_state(n: int, code: CodeParams, q: LogicalQubit, cfg: HilbertConfig) -> JointState:
    """|g> (x) psi^(n)."""
    return product_state(basis(GROUND, 2), logical_state(n, code, q, cfg))


def qubit_input_state(q: LogicalQubit, cfg: HilbertConfig) -> JointState:
    """(c_g|g> + c_e|e>) (x) |0>, the encoder input."""
    return product_state(q.vector, basis(0, cfg.fock_dim))


def cavity_parity(state: JointState, cfg: HilbertConfig) -> float:
    return float(expectation(state, on_cavity(parity_operator(cfg))).real)


def parity_measure(
    state: JointState,
    seed: int | np.random.Generator | None = None,
) -> tuple[int, JointState]:
    """Projective photon-number parity measurement; returns (+1 | -1, post-state)."""
    rng = np.random.default_rng(seed)
    n = state.fock_dim
    even = np.tile(np.arange(n) % 2 == 0, 2)
    if state.is_pure:
        p_even = float(np.vdot(state.data[even], state.data[even]).real)
    else:
        p_even = float(np.real(np.sum(np.diag(state.data)[even])))
    p_even = min(max(p_even, 0.0), 1.0)
    outcome = 1 if rng.random() < p_even else -1
    keep = even if outcome == 1 else ~even
    prob = p_even if outcome == 1 else 1.0 - p_even
    if prob < ZERO_PROBABILITY:
        raise ZeroProbability(f"parity outcome {outcome:+d} sampled with probability {prob:.3g}")
    if state.is_pure:
        out = np.where(keep, state.data, 0.0)
        return outcome, JointState(out / math.sqrt(prob), state.time_us)
    mask = np.outer(keep, keep)
    return outcome, JointState(np.where(mask, state.data, 0.0) / prob, state.time_us)


def _report(cycle: int, state: JointState, target: JointState, cfg: HilbertConfig, stage: str = "cycle") -> CycleReport:
    return CycleReport(
        cycle=cycle,
        time_us=state.time_us,
        fidelity=fidelity(state, target),
        purity=purity(state),
        parity=min(max(cavity_parity(state, cfg), -1.0), 1.0),
        stage=stage,
    )


def run_aqec(
    config: ExperimentConfig,
    *,
    correct: bool = True,
    progress: Optional[Callable[[CycleReport], None]] = None,
) -> list[CycleReport]:
    """Autonomous correction loop.

    Row 0 is the prepared state. Each later row follows one wait of ``tw_us``
    and, unless ``correct`` is False, one correction sequence. With
    ``init_mode = full-encode`` the state is encoded first and decoded after
    the last cycle; the decoded fidelity is an extra row with stage "decoded".
    """
    from cat_aqec.config import InitMode

    cfg = config.hilbert()
    code, q = config.code_params(), config.logical_qubit()
    noise, model, settings = config.noise_model(), config.gate_model_spec(), config.integrator_settings()
    p = ProtocolParams.from_config(config)
    hamiltonian = dispersive_hamiltonian(config.chi, cfg)
    target = ground_logical_state(0, code, q, cfg)
    sequence = build_correct(p)
    full_encode = InitMode(config.init_mode) is InitMode.FULL_ENCODE

    if full_encode:
        state = execute_sequence(qubit_input_state(q, cfg), build_encode(p), noise, config.chi, model, settings)
    else:
        state = target
    reports = [_report(0, state, target, cfg, "init")]

    for cycle in range(1, config.n_cycles + 1):
        state = evolve_master(state, hamiltonian, noise, config.tw_us, settings)
        if correct:
            state = execute_sequence(state, sequence, noise, config.chi, model, settings)
        report = _report(cycle, state, target, cfg)
        reports.append(report)
        if progress is not None:
            progress(report)
        if cycle % 10 == 0:
            logger.info("aqec cycle %d/%d: fidelity %.6f", cycle, config.n_cycles, report.fidelity)

    if full_encode:
        state = execute_sequence(state, build_decode(p), noise, config.chi, model, settings)
        reports.append(_report(config.n_cycles, state, qubit_input_state(q, cfg), cfg, "decoded"))
    return reports


@dataclass(frozen=True)
class MbqecResult:
    """Per-epoch ensemble statistics over trajectories."""

    times_us: np.ndarray
    fidelities: np.ndarray
    jump_counts: np.ndarray
    corrections: np.ndarray

    @property
    def n_trajectories(self) -> int:
        return self.fidelities.shape[0]

    @property
    def mean_fidelity(self) -> np.ndarray:
        return self.fidelities.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        if self.n_trajectories < 2:
            return np.zeros(self.fidelities.shape[1])
        return self.fidelities.std(axis=0, ddof=1) / math.sqrt(self.n_trajectories)

    def jump_histogram(self) -> np.ndarray:
        """Counts of cavity jumps per epoch, pooled over trajectories and epochs."""
        return np.bincount(self.jump_counts.ravel())


def _mbqec_trajectory(job: tuple[ExperimentConfig, np.random.SeedSequence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    config, seed = job
    rng = np.random.default_rng(seed)
    cfg = config.hilbert()
    code, q = config.code_params(), config.logical_qubit()
    noise, model, settings = config.noise_model(), config.gate_model_spec(), config.integrator_settings()
    hamiltonian = dispersive_hamiltonian(config.chi, cfg)
    target = ground_logical_state(0, code, q, cfg)

    state = target
    counter, last_parity, elapsed = 0, 1, 0.0
    fids = np.empty(config.n_cycles)
    jumps = np.zeros(config.n_cycles, dtype=np.int64)
    corrected = np.zeros(config.n_cycles, dtype=bool)
    for epoch in range(config.n_cycles):
        state, record = evolve_trajectory(state, hamiltonian, noise, config.tw_us, rng)
        jumps[epoch] = record.count(0)
        elapsed += config.tw_us
        outcome, state = parity_measure(state, rng)
        if outcome != last_parity:
            counter += 1
            last_parity = outcome
        due = (epoch + 1) % config.mbqec_correct_every == 0
        if due and (counter % 4 != 0 or noise.kappa > 0):
            p = ProtocolParams.from_config(config, tw=elapsed)
            state = execute_sequence(
                state, build_mbqec_correct(p, counter), noise, config.chi, model, settings, rng=rng
            )
            counter, last_parity, elapsed = 0, 1, 0.0
            corrected[epoch] = True
        fids[epoch] = fidelity(state, target)
    return fids, jumps, corrected


def run_mbqec(config: ExperimentConfig, n_trajectories: int, seed: Optional[int] = None) -> MbqecResult:
    """Measurement-based correction over ``n_trajectories`` trajectories.

    Per-trajectory seeds are spawned from ``seed`` (default ``config.seed``);
    results are gathered in trajectory order, so the output does not depend
    on ``config.workers``.
    """
    if n_trajectories < 1:
        raise ValueError(f"n_trajectories must be positive, got: {n_trajectories!r}")
    children = np.random.SeedSequence(config.seed if seed is None else seed).spawn(n_trajectories)
    jobs = [(config, child) for child in children]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_mbqec_trajectory, jobs))
    else:
        results = [_mbqec_trajectory(job) for job in jobs]
    fids, jumps, corrected = (np.stack(parts) for parts in zip(*results))
    times = config.tw_us * np.arange(1, config.n_cycles + 1)
    logger.info("mbqec: %d trajectories, final mean fidelity %.6f", n_trajectories, fids[:, -1].mean())
    return MbqecResult(times, fids, jumps, corrected)


@dataclass(frozen=True)
class EncodeMeasurement:
    """Per-state infidelities of encode and decode; the headline values are the worst case."""

    encode_by_state: dict[str, float]
    decode_by_state: dict[str, float]
    encode_duration_us: float
    decode_duration_us: float

    @property
    def eps_encode(self) -> float:
        return max(self.encode_by_state.values())

    @property
    def eps_decode(self) -> float:
        return max(self.decode_by_state.values())

    @property
    def eps_encode_mean(self) -> float:
        return float(np.mean(list(self.encode_by_state.values())))

    @property
    def eps_decode_mean(self) -> float:
        return float(np.mean(list(self.decode_by_state.values())))


@dataclass(frozen=True)
class CorrectionMeasurement:
    """Correction infidelity keyed by (input branch, cardinal state name)."""

    eps_by_input: dict[tuple[int, str], float]
    duration_us: float

    @property
    def eps_correct(self) -> float:
        return max(self.eps_by_input.values())

    @property
    def worst_input(self) -> tuple[int, str]:
        return max(self.eps_by_input, key=self.eps_by_input.__getitem__)

    @property
    def eps_by_branch(self) -> dict[int, float]:
        """Worst case over the cardinal states, per branch."""
        worst: dict[int, float] = {}
        for (branch, _), eps in self.eps_by_input.items():
            worst[branch] = max(worst.get(branch, 0.0), eps)
        return worst

    @property
    def mean_by_branch(self) -> dict[int, float]:
        grouped: dict[int, list[float]] = {}
        for (branch, _), eps in self.eps_by_input.items():
            grouped.setdefault(branch, []).append(eps)
        return {branch: float(np.mean(values)) for branch, values in grouped.items()}


def measure_encode_decode(config: ExperimentConfig) -> EncodeMeasurement:
    """Infidelities of encode and of decode (on an ideal cat) for each of the six cardinal states."""
    cfg = config.hilbert()
    code = config.code_params()
    noise, model, settings = config.noise_model(), config.gate_model_spec(), config.integrator_settings()
    p = ProtocolParams.from_config(config)
    encode, decode = build_encode(p), build_decode(p)
    enc, dec = {}, {}
    for name, q in CARDINAL_STATES.items():
        encoded = execute_sequence(qubit_input_state(q, cfg), encode, noise, config.chi, model, settings)
        enc[name] = 1.0 - fidelity(encoded, ground_logical_state(0, code, q, cfg))
        decoded = execute_sequence(ground_logical_state(0, code, q, cfg), decode, noise, config.chi, model, settings)
        dec[name] = 1.0 - fidelity(decoded, qubit_input_state(q, cfg))
        logger.debug("%s: eps_encode %.3g, eps_decode %.3g", name, enc[name], dec[name])
    return EncodeMeasurement(enc, dec, encode.total_duration, decode.total_duration)


def measure_correction(config: ExperimentConfig, tw: Optional[float] = None) -> CorrectionMeasurement:
    """Correction infidelity for psi^(0) and psi^(1) damped over ``tw``, per cardinal state.

    ``eps_correct`` is the worst case over both branches and all six states.
    """
    cfg = config.hilbert()
    p = ProtocolParams.from_config(config, tw=tw)
    code = config.code_params()
    damped = CodeParams(p.alpha_damped)
    noise, model, settings = config.noise_model(), config.gate_model_spec(), config.integrator_settings()
    sequence = build_correct(p)
    eps = {}
    for branch in (0, 1):
        for name, q in CARDINAL_STATES.items():
            start = ground_logical_state(branch, damped, q, cfg)
            out = execute_sequence(start, sequence, noise, config.chi, model, settings)
            eps[branch, name] = 1.0 - fidelity(out, ground_logical_state(0, code, q, cfg))
    measured = CorrectionMeasurement(eps, sequence.total_duration)
    logger.debug("correction: worst input %s, eps %.3g", measured.worst_input, measured.eps_correct)
    return measured
