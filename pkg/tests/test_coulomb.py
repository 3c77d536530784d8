"""
Tests for the Coulomb potential and boundary data
"""

import sys
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core_model import ChargeSystem, PBEProblem, UnitMode
from src.coulomb import (
    BoundaryMode,
    CoulombField,
    boundary_data,
    eval_G,
    eval_grad_G,
    fd_gradient,
    fd_laplacian,
)
from src.exceptions import ConfigurationError, SingularityError, UnsupportedModeError


class TestCoulomb2D(unittest.TestCase):
    """Test the logarithmic kernel"""

    def setUp(self):
        self.charges = ChargeSystem.from_arrays([[0.21, 0.13], [-0.33, -0.17]], [1, -1])
        self.field = CoulombField(self.charges, eps_m=2.0)

    def test_single_charge_value(self):
        """G = -2 z ln r for one unit charge"""
        field = CoulombField(ChargeSystem.from_arrays([[0.0, 0.0]], [1]), eps_m=1.0)
        self.assertAlmostEqual(eval_G(field, [np.e, 0.0]), -2.0)
        self.assertAlmostEqual(eval_G(field, [0.0, 1.0]), 0.0)

    def test_vectorized_matches_pointwise(self):
        """Batch evaluation equals single-point evaluation"""
        rng = np.random.default_rng(42)
        points = rng.uniform(1.0, 2.0, size=(10, 2))
        batch = eval_G(self.field, points)
        np.testing.assert_allclose(batch, [eval_G(self.field, p) for p in points], rtol=1e-14)

    def test_gradient_matches_finite_differences(self):
        """Analytic gradient agrees with central differences"""
        rng = np.random.default_rng(42)
        for x in rng.uniform(0.6, 2.5, size=(8, 2)):
            np.testing.assert_allclose(eval_grad_G(self.field, x), fd_gradient(self.field, x),
                                       rtol=1e-6, atol=1e-8)

    def test_harmonic_away_from_charges(self):
        """G is harmonic off the charge locations"""
        lap = fd_laplacian(self.field, np.array([1.5, 1.2]), h=1e-3)
        self.assertLess(abs(lap), 1e-4)

    def test_singularity(self):
        """Evaluation at a charge raises SingularityError"""
        with self.assertRaises(SingularityError):
            eval_G(self.field, [0.21, 0.13])

    def test_zero_valence_charge_ignored(self):
        """A neutral site does not make its location singular"""
        charges = ChargeSystem.from_arrays([[0.0, 0.0], [1.0, 0.0]], [1, 0])
        field = CoulombField(charges, eps_m=1.0)
        self.assertAlmostEqual(eval_G(field, [1.0, 0.0]), 0.0)

    def test_dimension_mismatch(self):
        """Points must match the charge dimension"""
        with self.assertRaises(ConfigurationError):
            eval_G(self.field, [1.0, 1.0, 1.0])

    def test_from_problem_scale(self):
        """Synthetic problems give scale_G = 1"""
        problem = PBEProblem(unit_mode=UnitMode.SYNTHETIC)
        self.assertEqual(CoulombField.from_problem(self.charges, problem).scale_G, 1.0)

    def test_screened_unavailable_in_2d(self):
        """Screened boundary data needs three dimensions"""
        with self.assertRaises(UnsupportedModeError):
            boundary_data(self.field, BoundaryMode.SCREENED, [3.0, 3.0], kappa=1.0)

    def test_boundary_modes(self):
        """Zero and restricted_G modes return 0 and G"""
        points = np.array([[3.0, 0.0], [0.0, 3.0]])
        np.testing.assert_array_equal(boundary_data(self.field, "zero", points), [0.0, 0.0])
        np.testing.assert_allclose(boundary_data(self.field, "restricted_G", points),
                                   eval_G(self.field, points))


class TestCoulomb3D(unittest.TestCase):
    """Test the 1/r kernel"""

    def setUp(self):
        charges = ChargeSystem.from_arrays([[0.0, 0.0, 0.0]], [2])
        self.field = CoulombField(charges, eps_m=1.0, scale_G=0.5)

    def test_value(self):
        """G = scale_G z / r"""
        self.assertAlmostEqual(eval_G(self.field, [0.0, 2.0, 0.0]), 0.5)

    def test_harmonic(self):
        """7-point Laplacian vanishes away from the charge"""
        self.assertLess(abs(fd_laplacian(self.field, np.array([1.0, 0.5, -0.3]), h=1e-3)), 1e-4)

    def test_screened_reduces_to_coulomb(self):
        """kappa = 0 and eps_s = eps_m give back G"""
        x = [1.0, 1.0, 1.0]
        self.assertAlmostEqual(boundary_data(self.field, "screened", x, kappa=0.0),
                               eval_G(self.field, x))
        self.assertLess(boundary_data(self.field, "screened", x, kappa=1.0, eps_s=80.0),
                        eval_G(self.field, x))


if __name__ == '__main__':
    unittest.main(verbosity=2)
