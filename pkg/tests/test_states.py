"""
Cat-Code State Tests
====================

Tests for coherent states, cats, the logical family and photon loss.
"""

import cmath
import math
import unittest

import numpy as np

from cat_aqec.dynamics import terms_fidelity, terms_from_components
from cat_aqec.hilbert import HilbertConfig, TruncationError, number_operator, parity_operator
from cat_aqec.states import (
    CARDINAL_STATES,
    CodeParams,
    DegenerateCat,
    JumpIndex,
    LogicalQubit,
    apply_photon_loss,
    cat_state,
    coherent_overlap,
    coherent_state,
    logical_components,
    logical_state,
    no_jump_damp,
    overlap_matrix,
)

CFG = HilbertConfig(50)
CODE = CodeParams(2.0)


class TestLogicalQubit(unittest.TestCase):
    def test_rejects_unnormalized(self) -> None:
        with self.assertRaises(ValueError):
            LogicalQubit(1.0, 1.0)

    def test_from_bloch_equator(self) -> None:
        q = LogicalQubit.from_bloch(math.pi / 2, 0.0)
        self.assertAlmostEqual(q.c_g, 1 / math.sqrt(2))
        self.assertAlmostEqual(q.c_e, 1 / math.sqrt(2))

    def test_cardinal_states_normalized(self) -> None:
        self.assertEqual(len(CARDINAL_STATES), 6)
        for q in CARDINAL_STATES.values():
            self.assertAlmostEqual(abs(q.c_g) ** 2 + abs(q.c_e) ** 2, 1.0, delta=1e-12)

    def test_global_phase(self) -> None:
        q = CARDINAL_STATES["+y"].with_global_phase(0.3)
        self.assertAlmostEqual(q.c_e / q.c_g, 1j)


class TestCodeParams(unittest.TestCase):
    def test_from_nbar(self) -> None:
        code = CodeParams.from_nbar(4.0, math.pi / 2)
        self.assertAlmostEqual(code.alpha, 2j)
        self.assertAlmostEqual(code.nbar, 4.0, delta=1e-12)

    def test_beta(self) -> None:
        self.assertAlmostEqual(CODE.beta / CODE.alpha, -1 + 1j, delta=1e-12)

    def test_components(self) -> None:
        self.assertEqual(CODE.components(), (2.0, -2.0, 2j, -2j))


class TestJumpIndex(unittest.TestCase):
    def test_wraps_modulo_four(self) -> None:
        self.assertEqual(JumpIndex(3).next().n, 0)
        self.assertEqual((JumpIndex(1) + 6).n, 3)
        self.assertEqual(JumpIndex(-1).n, 3)

    def test_parity(self) -> None:
        self.assertEqual([JumpIndex(n).parity for n in range(4)], [1, -1, 1, -1])


class TestCoherentStates(unittest.TestCase):
    def test_mean_photon_number(self) -> None:
        psi = coherent_state(2.0, CFG)
        self.assertAlmostEqual(np.vdot(psi, number_operator(CFG).matrix @ psi).real, 4.0, delta=1e-8)

    def test_overlap_magnitude(self) -> None:
        a, b = 1.0 + 0.5j, -0.3j
        self.assertAlmostEqual(abs(coherent_overlap(a, b)) ** 2, math.exp(-abs(a - b) ** 2))

    def test_truncated_overlap_matches_analytic(self) -> None:
        gram = overlap_matrix(CODE, CFG)
        np.testing.assert_allclose(np.diag(gram), np.ones(4), atol=1e-12)
        self.assertAlmostEqual(gram[0, 1].real, math.exp(-8.0), delta=1e-10)

    def test_truncation_checked(self) -> None:
        with self.assertRaises(TruncationError):
            coherent_state(6.0, HilbertConfig(40))


class TestCats(unittest.TestCase):
    def test_cat_parity(self) -> None:
        parity = parity_operator(CFG).matrix
        for sign, expected in (("+", 1.0), ("-", -1.0)):
            psi = cat_state(2.0, sign, CFG)
            self.assertAlmostEqual(np.vdot(psi, parity @ psi).real, expected, delta=1e-10)

    def test_odd_cat_at_zero_amplitude(self) -> None:
        with self.assertRaises(DegenerateCat):
            cat_state(0.0, -1, CFG)

    def test_even_cat_at_zero_amplitude_is_vacuum(self) -> None:
        psi = cat_state(0.0, 1, CFG)
        self.assertAlmostEqual(abs(psi[0]), 1.0)

    def test_bad_sign(self) -> None:
        with self.assertRaises(ValueError):
            cat_state(2.0, 0, CFG)


class TestLogicalFamily(unittest.TestCase):
    def test_parity_follows_index(self) -> None:
        parity = parity_operator(CFG).matrix
        q = CARDINAL_STATES["+x"]
        for n in range(4):
            psi = logical_state(n, CODE, q, CFG)
            self.assertAlmostEqual(np.linalg.norm(psi), 1.0, delta=1e-9)
            self.assertAlmostEqual(np.vdot(psi, parity @ psi).real, (-1) ** n, delta=1e-10)

    def test_photon_loss_advances_index(self) -> None:
        q = CARDINAL_STATES["+y"]
        for n in range(4):
            lowered, index = apply_photon_loss(n, CODE, q, CFG)
            self.assertEqual(index.n, (n + 1) % 4)
            overlap = abs(np.vdot(logical_state(index, CODE, q, CFG), lowered))
            self.assertAlmostEqual(overlap, 1.0, delta=1e-8)

    def test_four_losses_return_to_start(self) -> None:
        q = CARDINAL_STATES["-y"]
        _, index = apply_photon_loss(3, CODE, q, CFG)
        self.assertEqual(index, JumpIndex(0))

    def test_no_jump_damping_shrinks_amplitude(self) -> None:
        q = CARDINAL_STATES["+z"]
        damped = no_jump_damp(0, CODE, q, 200.0, 1 / 2000, CFG)
        expected = logical_state(0, CodeParams(2.0 * math.exp(-0.05)), q, CFG)
        self.assertAlmostEqual(abs(np.vdot(expected, damped)), 1.0, delta=1e-12)

    def test_components_match_vector(self) -> None:
        q = LogicalQubit.from_bloch(1.1, 0.4)
        components = logical_components(2, CODE, q)
        self.assertAlmostEqual(terms_fidelity(terms_from_components(components), components), 1.0, delta=1e-10)
        vec = sum(c * coherent_state(a, CFG) for c, a in components)
        self.assertAlmostEqual(abs(np.vdot(logical_state(2, CODE, q, CFG), vec)), 1.0, delta=1e-9)

    def test_sign_of_second_pair_in_index_two(self) -> None:
        q = CARDINAL_STATES["+x"]
        components = logical_components(2, CODE, q)
        ratio = components[2][0] / components[0][0]
        self.assertAlmostEqual(ratio, -1.0)
        self.assertTrue(cmath.isclose(components[3][1], -2j))


class TestLossClosure(unittest.TestCase):
    """a psi^(n) stays in the logical family for any amplitude and logical state."""

    AMPLITUDES = (1.5, 2.0, 3.0)

    @staticmethod
    def _random_states(count: int, seed: int) -> list[LogicalQubit]:
        rng = np.random.default_rng(seed)
        return [
            LogicalQubit.from_bloch(math.acos(1.0 - 2.0 * u), 2.0 * math.pi * v)
            for u, v in rng.random((count, 2))
        ]

    def test_jump_closure(self) -> None:
        parity = parity_operator(CFG).matrix
        for alpha in self.AMPLITUDES:
            code = CodeParams(alpha)
            for i, q in enumerate(self._random_states(20, seed=int(10 * alpha))):
                for n in range(4):
                    lowered, index = apply_photon_loss(n, code, q, CFG)
                    with self.subTest(alpha=alpha, state=i, n=n):
                        overlap = abs(np.vdot(logical_state(index, code, q, CFG), lowered))
                        self.assertAlmostEqual(overlap, 1.0, delta=1e-10)
                        self.assertAlmostEqual(np.vdot(lowered, parity @ lowered).real, index.parity, delta=1e-10)

    def test_no_jump_damping_matches_operator(self) -> None:
        kappa, t = 1 / 2000, 65.6
        decay = np.exp(-0.5 * kappa * t * np.arange(CFG.fock_dim))
        for alpha in self.AMPLITUDES:
            code = CodeParams(alpha)
            for i, q in enumerate(self._random_states(5, seed=int(100 * alpha))):
                for n in range(4):
                    expected = decay * logical_state(n, code, q, CFG)
                    expected /= np.linalg.norm(expected)
                    with self.subTest(alpha=alpha, state=i, n=n):
                        overlap = abs(np.vdot(expected, no_jump_damp(n, code, q, t, kappa, CFG)))
                        self.assertAlmostEqual(overlap, 1.0, delta=1e-10)

    def test_loss_commutes_with_damping(self) -> None:
        kappa, t = 1 / 2000, 65.6
        decay = np.exp(-0.5 * kappa * t * np.arange(CFG.fock_dim))
        for alpha in self.AMPLITUDES:
            code = CodeParams(alpha)
            damped = code.damped(math.exp(-0.5 * kappa * t))
            for i, q in enumerate(self._random_states(5, seed=int(1000 * alpha))):
                for n in range(4):
                    lowered, index = apply_photon_loss(n, code, q, CFG)
                    damp_after = decay * lowered
                    damp_after /= np.linalg.norm(damp_after)
                    loss_after, _ = apply_photon_loss(n, damped, q, CFG)
                    with self.subTest(alpha=alpha, state=i, n=n):
                        self.assertAlmostEqual(abs(np.vdot(damp_after, loss_after)), 1.0, delta=1e-10)
                        closure = no_jump_damp(index, code, q, t, kappa, CFG)
                        self.assertAlmostEqual(abs(np.vdot(closure, loss_after)), 1.0, delta=1e-10)


if __name__ == "__main__":
    unittest.main()
