"""
Circuit Tests
=============

Tests for the protocol sequences, parity measurement and the AQEC and
MBQEC loops.
"""

import itertools
import math
import unittest
from unittest.mock import MagicMock, patch

import numpy as np

from cat_aqec.circuits import (
    ProtocolParams,
    ZeroProbability,
    build_correct,
    build_correct_parts,
    build_decode,
    build_encode,
    build_mbqec_correct,
    cavity_parity,
    ground_logical_state,
    measure_encode_decode,
    parity_measure,
    qubit_input_state,
    run_aqec,
    run_mbqec,
)
from cat_aqec.config import ExperimentConfig, load_config
from cat_aqec.dynamics import NoiseModel
from cat_aqec.gates import QubitRotation, Reset, SelectiveRotation, execute_sequence
from cat_aqec.hilbert import HilbertConfig, JointState, fidelity, partial_trace
from cat_aqec.states import CARDINAL_STATES, CodeParams

CHI = 2 * math.pi * 40
CFG = HilbertConfig(56)
CODE = CodeParams(2.0)
NOISELESS = NoiseModel()


def _params(tw: float = 0.0, kappa: float = 0.0) -> ProtocolParams:
    return ProtocolParams(CODE, CHI, tw, kappa, 0.054)


class TestProtocolParams(unittest.TestCase):
    def test_waits(self) -> None:
        p = _params()
        self.assertAlmostEqual(p.half_wait, 0.00625)
        self.assertAlmostEqual(p.pi_wait, 0.0125)

    def test_damped_amplitude(self) -> None:
        p = _params(tw=65.6, kappa=1 / 2000)
        self.assertAlmostEqual(p.alpha_damped, 2.0 * math.exp(-0.0164))
        self.assertAlmostEqual(p.beta_repump, 0.5 * (p.alpha_damped - 2.0) * (1j - 1))

    def test_repump_vanishes_without_loss(self) -> None:
        self.assertEqual(_params(tw=65.6).beta_repump, 0)

    def test_rejects_bad_values(self) -> None:
        with self.assertRaises(ValueError):
            ProtocolParams(CODE, CHI, tw=-1.0)
        with self.assertRaises(ValueError):
            ProtocolParams(CODE, 0.0)


class TestSequenceShapes(unittest.TestCase):
    def test_encode_duration(self) -> None:
        seq = build_encode(_params())
        self.assertEqual(len(seq), 13)
        self.assertAlmostEqual(seq.total_duration * 1e3, 234.75, places=6)

    def test_decode_duration(self) -> None:
        self.assertAlmostEqual(build_decode(_params()).total_duration * 1e3, 234.75, places=6)

    def test_correct_duration(self) -> None:
        seq = build_correct(_params(tw=65.6, kappa=1 / 2000))
        self.assertEqual(len(seq), 24)
        self.assertAlmostEqual(seq.total_duration * 1e3, 523.5, places=6)
        self.assertEqual(sum(isinstance(s, Reset) for s in seq), 1)

    def test_correct_parts_concatenate(self) -> None:
        transfer, repump, reencode = build_correct_parts(_params())
        self.assertIsInstance(transfer.steps[-1], Reset)
        self.assertEqual(len(transfer) + len(repump) + len(reencode), 24)

    def test_mbqec_correction_has_no_reset(self) -> None:
        for c in range(4):
            seq = build_mbqec_correct(_params(), c)
            self.assertFalse(any(isinstance(s, Reset) for s in seq))
            rotations = [s for s in seq if isinstance(s, QubitRotation)]
            self.assertEqual(len(rotations), 1)
            self.assertAlmostEqual(rotations[0].theta, -math.pi / 2 if c % 2 == 0 else math.pi / 2)
            full_turns = [s for s in seq if isinstance(s, SelectiveRotation) and s.theta == 2 * math.pi]
            self.assertEqual(len(full_turns), 1 if c in (2, 3) else 0)

    def test_mbqec_counter_wraps(self) -> None:
        self.assertEqual(build_mbqec_correct(_params(), 6).name, "mbqec-correct-2")


class TestNoiselessSequences(unittest.TestCase):
    """Floors set by the vacuum overlap of the selective rotations, not by truncation."""

    def test_encode(self) -> None:
        p = _params()
        for name, q in CARDINAL_STATES.items():
            out = execute_sequence(qubit_input_state(q, CFG), build_encode(p), NOISELESS, CHI)
            with self.subTest(state=name):
                self.assertGreaterEqual(fidelity(out, ground_logical_state(0, CODE, q, CFG)), 0.999)

    def test_decode_after_encode(self) -> None:
        p = _params()
        seq = build_encode(p) + build_decode(p)
        for name, q in CARDINAL_STATES.items():
            start = qubit_input_state(q, CFG)
            out = execute_sequence(start, seq, NOISELESS, CHI)
            with self.subTest(state=name):
                self.assertGreaterEqual(fidelity(out, start), 0.998)

    def test_correct_both_branches(self) -> None:
        seq = build_correct(_params())
        for (name, q), branch in itertools.product(CARDINAL_STATES.items(), (0, 1)):
            target = ground_logical_state(0, CODE, q, CFG)
            out = execute_sequence(ground_logical_state(branch, CODE, q, CFG), seq, NOISELESS, CHI)
            with self.subTest(state=name, branch=branch):
                self.assertGreaterEqual(fidelity(out, target), 0.996)
                self.assertAlmostEqual(cavity_parity(out, CFG), 1.0, delta=1e-2)

    def test_mbqec_correction_for_each_count(self) -> None:
        p = _params()
        q = CARDINAL_STATES["+x"]
        target = ground_logical_state(0, CODE, q, CFG)
        for c in range(4):
            out = execute_sequence(ground_logical_state(c, CODE, q, CFG), build_mbqec_correct(p, c), NOISELESS, CHI)
            with self.subTest(jumps=c):
                self.assertTrue(out.is_pure)
                self.assertGreaterEqual(fidelity(out, target), 0.99)


class TestParityMeasurement(unittest.TestCase):
    def test_definite_outcomes(self) -> None:
        q = CARDINAL_STATES["-x"]
        for n, expected in ((0, 1), (1, -1), (2, 1), (3, -1)):
            state = ground_logical_state(n, CODE, q, CFG)
            outcome, post = parity_measure(state, seed=0)
            self.assertEqual(outcome, expected)
            self.assertAlmostEqual(fidelity(post, state), 1.0, delta=1e-9)

    def test_density_input(self) -> None:
        state = ground_logical_state(1, CODE, CARDINAL_STATES["+z"], CFG).as_density()
        outcome, post = parity_measure(state, seed=1)
        self.assertEqual(outcome, -1)
        self.assertFalse(post.is_pure)

    def test_mixed_parity_collapses(self) -> None:
        even = ground_logical_state(0, CODE, CARDINAL_STATES["+z"], CFG).data
        odd = ground_logical_state(1, CODE, CARDINAL_STATES["+z"], CFG).data
        state = JointState((even + odd) / np.linalg.norm(even + odd))
        outcome, post = parity_measure(state, seed=2)
        self.assertAlmostEqual(cavity_parity(post, CFG), outcome, delta=1e-9)

    def test_zero_probability_branch(self) -> None:
        state = JointState(np.kron([1.0, 0.0], np.eye(CFG.fock_dim)[0]))
        rng = MagicMock()
        rng.random.return_value = 1.0
        with patch("numpy.random.default_rng", return_value=rng):
            with self.assertRaises(ZeroProbability):
                parity_measure(state, 0)


class TestRunAqec(unittest.TestCase):
    def test_noiseless_cycles(self) -> None:
        config = load_config(preset="noiseless", cli_overrides={"fock_dim": 56, "n_cycles": 2})
        reports = run_aqec(config)
        self.assertEqual([r.cycle for r in reports], [0, 1, 2])
        self.assertEqual(reports[0].stage, "init")
        self.assertAlmostEqual(reports[0].fidelity, 1.0, delta=1e-9)
        for r in reports[1:]:
            self.assertGreaterEqual(r.fidelity, 0.997)
            self.assertAlmostEqual(r.parity, 1.0, delta=1e-2)
        self.assertAlmostEqual(reports[2].time_us - reports[1].time_us, config.tw_us + build_correct(ProtocolParams.from_config(config)).total_duration)

    def test_noiseless_ten_cycle_floor(self) -> None:
        config = load_config(preset="noiseless", cli_overrides={"n_cycles": 10})
        fidelities = [r.fidelity for r in run_aqec(config)]
        self.assertEqual(len(fidelities), 11)
        self.assertGreaterEqual(min(fidelities), 0.97)
        self.assertLess(fidelities[-1], fidelities[1])

    def test_repeated_correction_without_wait(self) -> None:
        seq = build_correct(_params())
        q = CARDINAL_STATES["+z"]
        target = ground_logical_state(0, CODE, q, CFG)
        state, fidelities = target, []
        for _ in range(5):
            state = execute_sequence(state, seq, NOISELESS, CHI)
            fidelities.append(fidelity(state, target))
        self.assertGreaterEqual(min(fidelities), 0.975)
        self.assertEqual(fidelities, sorted(fidelities, reverse=True))

    def test_full_encode_adds_decoded_row(self) -> None:
        config = load_config(
            preset="noiseless",
            cli_overrides={"fock_dim": 56, "n_cycles": 1, "init_mode": "full-encode"},
        )
        reports = run_aqec(config)
        self.assertEqual([r.stage for r in reports], ["init", "cycle", "decoded"])
        self.assertGreaterEqual(reports[-1].fidelity, 0.97)

    def test_uncorrected_loses_fidelity(self) -> None:
        config = ExperimentConfig(fock_dim=56, n_cycles=2, tw_us=200.0, t1_us=math.inf, t2_us=math.inf)
        progress = []
        reports = run_aqec(config, correct=False, progress=progress.append)
        self.assertEqual(len(progress), 2)
        self.assertLess(reports[-1].fidelity, reports[1].fidelity)
        self.assertLess(reports[-1].purity, 1.0)

    def test_qubit_stays_in_ground_after_correction(self) -> None:
        config = load_config(preset="smoke", cli_overrides={"n_cycles": 1})
        reports = run_aqec(config)
        self.assertGreater(reports[1].fidelity, 0.95)


class TestRunMbqec(unittest.TestCase):
    def _config(self, **changes) -> ExperimentConfig:
        base = ExperimentConfig(nbar=1.0, fock_dim=30, n_cycles=2, tw_us=100.0, tcav_us=100.0, seed=7)
        return base.replace(**changes)

    def test_shapes(self) -> None:
        result = run_mbqec(self._config(), 3)
        self.assertEqual(result.fidelities.shape, (3, 2))
        self.assertEqual(result.jump_counts.shape, (3, 2))
        self.assertEqual(len(result.mean_fidelity), 2)
        self.assertEqual(int(result.jump_histogram().sum()), 6)
        np.testing.assert_allclose(result.times_us, [100.0, 200.0])

    def test_seed_reproducible(self) -> None:
        a = run_mbqec(self._config(), 2)
        b = run_mbqec(self._config(), 2)
        np.testing.assert_array_equal(a.fidelities, b.fidelities)
        np.testing.assert_array_equal(a.jump_counts, b.jump_counts)

    def test_workers_do_not_change_results(self) -> None:
        serial = run_mbqec(self._config(), 2)
        parallel = run_mbqec(self._config(workers=2), 2)
        np.testing.assert_array_equal(serial.fidelities, parallel.fidelities)

    def test_correction_every_epoch_with_loss(self) -> None:
        result = run_mbqec(self._config(), 2)
        self.assertTrue(result.corrections.all())

    def test_invalid_trajectory_count(self) -> None:
        with self.assertRaises(ValueError):
            run_mbqec(self._config(), 0)


class TestMeasurements(unittest.TestCase):
    def test_noiseless_encode_decode(self) -> None:
        config = load_config(preset="noiseless", cli_overrides={"fock_dim": 56})
        measured = measure_encode_decode(config)
        self.assertLess(measured.eps_encode, 1e-3)
        self.assertLess(measured.eps_decode, 2e-3)
        self.assertLessEqual(measured.eps_encode_mean, measured.eps_encode)
        self.assertEqual(set(measured.encode_by_state), set(CARDINAL_STATES))
        self.assertAlmostEqual(measured.encode_duration_us, 0.23475)

    def test_encoded_cavity_has_four_components(self) -> None:
        p = _params()
        q = CARDINAL_STATES["+x"]
        out = execute_sequence(qubit_input_state(q, CFG), build_encode(p), NOISELESS, CHI)
        rho = partial_trace(out, "cavity")
        self.assertAlmostEqual(np.trace(rho).real, 1.0, delta=1e-9)


if __name__ == "__main__":
    unittest.main()
