"""
Hilbert Space Tests
===================

Tests for operators, joint states, displacement and reduced states.
"""

import math
import unittest

import numpy as np
from scipy.linalg import expm

from cat_aqec.hilbert import (
    DimensionMismatch,
    Factor,
    HilbertConfig,
    JointState,
    Operator,
    Space,
    StateInvariantError,
    TruncationError,
    annihilation,
    apply_unitary,
    basis,
    displacement_operator,
    expectation,
    fidelity,
    number_operator,
    on_cavity,
    on_qubit,
    parity_operator,
    partial_trace,
    product_state,
    purity,
    sigma_minus,
    sigma_z,
    tensor,
    trace_distance,
)
from cat_aqec.states import coherent_state


class TestHilbertConfig(unittest.TestCase):
    def test_joint_dimension(self) -> None:
        self.assertEqual(HilbertConfig(40).dim, 80)

    def test_rejects_small_truncation(self) -> None:
        with self.assertRaises(ValueError):
            HilbertConfig(1)

    def test_truncation_rule(self) -> None:
        cfg = HilbertConfig(70)
        self.assertTrue(cfg.fits(2 * (1 + np.sqrt(2))))
        self.assertFalse(cfg.fits(6.0))


class TestOperators(unittest.TestCase):
    def test_number_operator_is_adag_a(self) -> None:
        cfg = HilbertConfig(10)
        a = annihilation(cfg)
        np.testing.assert_allclose((a.dag() @ a).matrix, number_operator(cfg).matrix, atol=1e-12)

    def test_operator_is_read_only(self) -> None:
        op = sigma_z()
        with self.assertRaises(ValueError):
            op.matrix[0, 0] = 5.0

    def test_compose_across_spaces_fails(self) -> None:
        with self.assertRaises(DimensionMismatch):
            sigma_z() @ number_operator(HilbertConfig(2))

    def test_sigma_minus_lowers(self) -> None:
        out = sigma_minus().matrix @ np.array([0.0, 1.0])
        np.testing.assert_allclose(out, [1.0, 0.0])

    def test_parity_of_fock_states(self) -> None:
        cfg = HilbertConfig(6)
        parity = on_cavity(parity_operator(cfg))
        for n in range(6):
            state = product_state(basis(0, 2), basis(n, 6))
            self.assertAlmostEqual(expectation(state, parity).real, (-1) ** n)

    def test_parity_is_exponentiated_number(self) -> None:
        cfg = HilbertConfig(30)
        expected = expm(1j * math.pi * number_operator(cfg).matrix)
        np.testing.assert_allclose(parity_operator(cfg).matrix, expected, atol=1e-10)

    def test_qubit_operator_shape_checked(self) -> None:
        with self.assertRaises(DimensionMismatch):
            Operator(np.eye(3), "bad", Space.QUBIT)

    def test_tensor_puts_qubit_first(self) -> None:
        cfg = HilbertConfig(3)
        joint = tensor(sigma_z(), number_operator(cfg))
        self.assertIs(joint.space, Space.JOINT)
        np.testing.assert_allclose(np.diag(joint.matrix), [0, -1, -2, 0, 1, 2])
        with self.assertRaises(DimensionMismatch):
            tensor(number_operator(cfg), sigma_z())


class TestDisplacement(unittest.TestCase):
    def test_vacuum_displaces_to_coherent_state(self) -> None:
        cfg = HilbertConfig(40)
        out = displacement_operator(2.0 + 1.0j, cfg).matrix @ basis(0, 40)
        np.testing.assert_allclose(out, coherent_state(2.0 + 1.0j, cfg), atol=1e-8)

    def test_mean_photon_number(self) -> None:
        cfg = HilbertConfig(40)
        psi = displacement_operator(2.0, cfg).matrix @ basis(0, 40)
        n = np.vdot(psi, number_operator(cfg).matrix @ psi).real
        self.assertAlmostEqual(n, 4.0, delta=1e-8)

    def test_inverse(self) -> None:
        cfg = HilbertConfig(40)
        product = displacement_operator(1.5j, cfg).matrix @ displacement_operator(-1.5j, cfg).matrix
        np.testing.assert_allclose(product[:, :10], np.eye(40)[:, :10], atol=1e-8)

    def test_composition_phase(self) -> None:
        cfg = HilbertConfig(40)
        a, b = 0.7 + 0.2j, -0.4 + 0.9j
        product = displacement_operator(a, cfg).matrix @ displacement_operator(b, cfg).matrix
        combined = np.exp(1j * (a * np.conj(b)).imag) * displacement_operator(a + b, cfg).matrix
        np.testing.assert_allclose(product[:, :10], combined[:, :10], atol=1e-8)

    def test_truncation_error(self) -> None:
        with self.assertRaises(TruncationError):
            displacement_operator(5.0, HilbertConfig(40))


class TestJointState(unittest.TestCase):
    def test_data_is_read_only(self) -> None:
        state = product_state(basis(0, 2), basis(0, 4))
        with self.assertRaises(ValueError):
            state.data[0] = 0.0

    def test_validate_rejects_unnormalized(self) -> None:
        with self.assertRaises(StateInvariantError):
            JointState(2 * basis(0, 8)).validate()

    def test_validate_rejects_negative_density(self) -> None:
        rho = np.diag([1.5, -0.5, 0.0, 0.0])
        with self.assertRaises(StateInvariantError):
            JointState(rho).validate()

    def test_odd_length_rejected(self) -> None:
        with self.assertRaises(DimensionMismatch):
            JointState(basis(0, 3))

    def test_as_density_keeps_time(self) -> None:
        state = product_state(basis(1, 2), basis(2, 4), time_us=3.0)
        rho = state.as_density()
        self.assertFalse(rho.is_pure)
        self.assertEqual(rho.time_us, 3.0)
        self.assertAlmostEqual(purity(rho), 1.0)

    def test_apply_unitary_on_density(self) -> None:
        cfg = HilbertConfig(4)
        flip = on_qubit(Operator(np.array([[0, 1], [1, 0]]), "x", Space.QUBIT), cfg)
        rho = product_state(basis(0, 2), basis(1, 4)).as_density()
        out = apply_unitary(rho, flip)
        self.assertAlmostEqual(fidelity(out, product_state(basis(1, 2), basis(1, 4))), 1.0)


class TestReducedStates(unittest.TestCase):
    def test_partial_trace_of_product(self) -> None:
        q = np.array([0.6, 0.8j])
        c = coherent_state(1.0, HilbertConfig(20))
        state = product_state(q, c)
        np.testing.assert_allclose(partial_trace(state, Factor.QUBIT), np.outer(q, q.conj()), atol=1e-12)
        np.testing.assert_allclose(partial_trace(state, "cavity"), np.outer(c, c.conj()), atol=1e-12)

    def test_fidelity_requires_pure_target(self) -> None:
        state = product_state(basis(0, 2), basis(0, 4))
        with self.assertRaises(ValueError):
            fidelity(state, state.as_density())

    def test_fidelity_dimension_mismatch(self) -> None:
        with self.assertRaises(DimensionMismatch):
            fidelity(product_state(basis(0, 2), basis(0, 4)), product_state(basis(0, 2), basis(0, 5)))

    def test_trace_distance(self) -> None:
        rho = np.diag([1.0, 0.0])
        sigma = np.diag([0.0, 1.0])
        self.assertAlmostEqual(trace_distance(rho, rho), 0.0)
        self.assertAlmostEqual(trace_distance(rho, sigma), 1.0)

    def test_mixed_purity(self) -> None:
        rho = JointState(np.eye(4) / 4)
        self.assertAlmostEqual(purity(rho), 0.25)


if __name__ == "__main__":
    unittest.main()
