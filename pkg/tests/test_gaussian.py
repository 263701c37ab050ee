#!/usr/bin/env python3
"""
Tests for the Gaussian core component
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from gaussian.gaussian import (
    GaussianState, SymplecticForm, apply_loss, coherent_product, from_snu, make_epr_from_squeezers,
    make_tmsv, project_to_physical, purity, state_digest, swap_modes, symplectic_eigenvalues,
    thermal_product, thermal_state, tmsv_from_variance, to_snu, vacuum, von_neumann_entropy,
    williamson,
)
from utils.errors import ParameterError, UnphysicalStateError


class TestStateConstruction(unittest.TestCase):
    """Test cases for state constructors"""

    def test_tmsv_entries(self):
        """TMSV blocks are cosh(2r)/2 with +/- sinh(2r)/2 correlations"""
        r = 0.5
        cm = make_tmsv(r).cm
        self.assertAlmostEqual(cm[0, 0], 0.5 * np.cosh(2 * r), places=12)
        self.assertAlmostEqual(cm[0, 2], 0.5 * np.sinh(2 * r), places=12)
        self.assertAlmostEqual(cm[1, 3], -0.5 * np.sinh(2 * r), places=12)
        self.assertEqual(cm[0, 1], 0.0)

    def test_tmsv_zero_is_vacuum(self):
        np.testing.assert_allclose(make_tmsv(0.0).cm, vacuum().cm, atol=1e-15)

    def test_negative_squeezing_rejected(self):
        with self.assertRaises(ParameterError):
            make_tmsv(-1.0)

    def test_squeezing_limit(self):
        with self.assertRaises(ParameterError):
            make_tmsv(11.0)
        make_tmsv(12.0, limit=12.0)

    def test_tmsv_from_variance(self):
        state = tmsv_from_variance(1.437)
        self.assertAlmostEqual(to_snu(state.cm)[0, 0], 1.437, places=12)
        with self.assertRaises(ParameterError):
            tmsv_from_variance(0.9)

    def test_squeezers_reproduce_tmsv(self):
        """Pure squeezers combined on a 50:50 beam-splitter give the TMSV"""
        r = 0.4
        state = make_epr_from_squeezers(np.exp(-2 * r), np.exp(2 * r))
        np.testing.assert_allclose(state.cm, make_tmsv(r).cm, atol=1e-12)

    def test_squeezers_uncertainty_violation(self):
        with self.assertRaises(UnphysicalStateError):
            make_epr_from_squeezers(0.5, 1.5)

    def test_squeezers_range(self):
        with self.assertRaises(ParameterError):
            make_epr_from_squeezers(1.2, 1.5)

    def test_coherent_mean(self):
        state = coherent_product(1.0 + 0.5j)
        np.testing.assert_allclose(state.mean, np.sqrt(2.0) * np.array([0.0, 0.0, 1.0, 0.5]))
        np.testing.assert_allclose(state.cm, 0.5 * np.eye(4))

    def test_thermal_product(self):
        state = thermal_product(1.0, 0.0)
        self.assertAlmostEqual(state.cm[0, 0], 1.5)
        self.assertAlmostEqual(state.cm[2, 2], 0.5)
        with self.assertRaises(ParameterError):
            thermal_state(-0.1)


class TestValidation(unittest.TestCase):
    """Test cases for GaussianState invariants"""

    def test_asymmetric_rejected(self):
        cm = 0.5 * np.eye(4)
        cm[0, 2] = 0.1
        with self.assertRaises(ParameterError):
            GaussianState(cm)

    def test_uncertainty_violation_rejected(self):
        with self.assertRaises(UnphysicalStateError):
            GaussianState(0.4 * np.eye(4))

    def test_wrong_shape_rejected(self):
        with self.assertRaises(ParameterError):
            GaussianState(0.5 * np.eye(2))

    def test_arrays_read_only(self):
        state = make_tmsv(0.3)
        with self.assertRaises(ValueError):
            state.cm[0, 0] = 1.0

    def test_symplectic_form(self):
        form = SymplecticForm(2)
        self.assertTrue(form.check())
        omega = form.omega
        np.testing.assert_allclose(omega, -omega.T)


class TestChannels(unittest.TestCase):
    """Test cases for loss channels"""

    def test_unit_transmission_is_identity(self):
        state = make_tmsv(0.6)
        np.testing.assert_allclose(apply_loss(state, 'B', 1.0).cm, state.cm, atol=1e-15)

    def test_full_loss_replaces_mode_with_vacuum(self):
        out = apply_loss(make_tmsv(0.6), 'B', 0.0)
        np.testing.assert_allclose(out.block('B'), 0.5 * np.eye(2), atol=1e-15)
        np.testing.assert_allclose(out.cross, np.zeros((2, 2)), atol=1e-15)

    def test_thermal_loss(self):
        out = apply_loss(vacuum(), 'A', 0.5, n_th=1.0)
        self.assertAlmostEqual(out.cm[0, 0], 0.5 * 0.5 + 0.5 * 1.5)

    def test_invalid_transmission(self):
        with self.assertRaises(ParameterError):
            apply_loss(vacuum(), 'B', 1.5)
        with self.assertRaises(ParameterError):
            apply_loss(vacuum(), 'C', 0.5)


class TestSpectraAndEntropy(unittest.TestCase):
    """Test cases for symplectic spectra, purity and entropy"""

    def test_pure_state_spectrum(self):
        nu = symplectic_eigenvalues(make_tmsv(0.8).cm)
        np.testing.assert_allclose(nu, [0.5, 0.5], atol=1e-9)
        self.assertAlmostEqual(purity(make_tmsv(0.8)), 1.0, places=9)
        self.assertAlmostEqual(von_neumann_entropy(make_tmsv(0.8).cm), 0.0, places=9)

    def test_pure_state_spectrum_at_large_squeezing(self):
        """The vacuum spectrum survives entries far beyond double precision of V - C"""
        for r in (8.0, 10.0, 12.0):
            with self.subTest(r=r):
                state = make_tmsv(r, limit=12.0)
                np.testing.assert_allclose(symplectic_eigenvalues(state.cm), [0.5, 0.5], atol=1e-12)
                self.assertAlmostEqual(purity(state), 1.0, places=12)
                self.assertAlmostEqual(von_neumann_entropy(state.cm), 0.0, places=12)

    def test_lossy_state_at_large_squeezing(self):
        lossy = apply_loss(make_tmsv(10.0), 'B', 0.5)
        nu = symplectic_eigenvalues(lossy.cm)
        self.assertGreater(nu[0], 1.0)
        self.assertLess(purity(lossy), 1e-3)

    def test_marginal_purity(self):
        r = 0.5
        self.assertAlmostEqual(purity(make_tmsv(r), 'A'), 1.0 / np.cosh(2 * r), places=12)

    def test_thermal_entropy_two_bits(self):
        self.assertAlmostEqual(von_neumann_entropy(thermal_state(1.0)), 2.0, places=9)

    def test_williamson_reconstructs(self):
        cm = apply_loss(make_tmsv(0.7), 'B', 0.6, n_th=0.2).cm
        form = williamson(cm)
        np.testing.assert_allclose(form.reconstruct(), cm, atol=1e-9)
        np.testing.assert_allclose(np.sort(form.nu)[::-1], symplectic_eigenvalues(cm), atol=1e-9)

    def test_projection_leaves_physical_matrix(self):
        cm = make_tmsv(0.3).cm
        projected, distance = project_to_physical(cm)
        self.assertEqual(distance, 0.0)
        np.testing.assert_allclose(projected, cm)

    def test_projection_fixes_unphysical_matrix(self):
        cm = np.diag([0.45, 0.45, 0.6, 0.6])
        projected, distance = project_to_physical(cm)
        self.assertGreater(distance, 0.0)
        self.assertGreaterEqual(symplectic_eigenvalues(projected).min(), 0.5 - 1e-9)


class TestHelpers(unittest.TestCase):
    """Test cases for unit conversion, digests and mode swapping"""

    def test_unit_conversion(self):
        cm = make_tmsv(0.2).cm
        np.testing.assert_allclose(from_snu(to_snu(cm)), cm)
        np.testing.assert_allclose(to_snu(vacuum().cm), np.eye(4))

    def test_digest(self):
        self.assertEqual(state_digest(make_tmsv(0.3)), state_digest(make_tmsv(0.3)))
        self.assertNotEqual(state_digest(make_tmsv(0.3)), state_digest(make_tmsv(0.31)))
        self.assertEqual(len(state_digest(vacuum())), 32)

    def test_swap_modes(self):
        cm = apply_loss(make_tmsv(0.5), 'B', 0.3).cm
        swapped = swap_modes(cm)
        np.testing.assert_allclose(swapped[0:2, 0:2], cm[2:4, 2:4])
        np.testing.assert_allclose(swap_modes(swapped), cm)


if __name__ == '__main__':
    unittest.main()
