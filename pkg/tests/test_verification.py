"""
Tests for manufactured solutions, convergence studies, L-infinity
diagnostics and the invariant suite
"""

import math
import sys
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core_model import RegionTag
from src.exceptions import ConfigurationError, DataError, InfeasibleExponentError, NonConvergenceError
from src.mesh import DiscreteField, Mesh
from src.solver import NewtonSettings
from src.verification import (
    CASE_IDS,
    CHECKS,
    DataNorms,
    apriori_bound,
    consistency_residual,
    convergence_study,
    disk_charges,
    disk_family,
    disk_problem,
    disk_setup,
    extinction_check,
    fit_slope,
    manufactured_case,
    measure_data_norms,
    mesh_family,
    run_invariant_suite,
    splitting_equivalence,
    theta_curve,
)


class TestManufacturedCases(unittest.TestCase):
    """Test the bundled exact solutions"""

    def test_all_cases_build(self):
        """Every case id constructs"""
        for case_id in CASE_IDS:
            self.assertEqual(manufactured_case(case_id).case_id, case_id)
        with self.assertRaises(ConfigurationError):
            manufactured_case("quadratic")

    def test_linear_jump_interface_conditions(self):
        """Value and normal flux are continuous across r = r_m"""
        case = manufactured_case("linear_jump")
        point = np.array([[0.6, 0.8]])
        inside = case.exact(point, np.array([RegionTag.MOLECULE]))
        outside = case.exact(point, np.array([RegionTag.IEL]))
        self.assertAlmostEqual(inside[0], outside[0], places=12)
        flux_in = case.problem.eps_m * case.exact_grad(point, np.array([RegionTag.MOLECULE]))
        flux_out = case.problem.eps_s.value * case.exact_grad(point, np.array([RegionTag.IEL]))
        np.testing.assert_allclose(flux_in, flux_out, rtol=1e-12)
        self.assertEqual(case.f0(point, np.array([RegionTag.IONS]))[0], -4.0)

    def test_semilinear_source(self):
        """f0 = -eps Laplace(u*) + b(u*) on Ions"""
        case = manufactured_case("semilinear_neutral")
        self.assertAlmostEqual(case.f0(np.array([[0.0, 0.0]]), np.array([RegionTag.MOLECULE]))[0],
                               0.32, places=12)
        u_star = 0.02 * 9.0
        expected = -80.0 * 0.02 * 56.0 + 2.0 * math.sinh(u_star)
        self.assertAlmostEqual(case.f0(np.array([[2.0, 0.0]]), np.array([RegionTag.IONS]))[0],
                               expected, places=10)

    def test_consistency_residual_decreases(self):
        """The interpolant satisfies the discrete equations better on finer meshes"""
        case = manufactured_case("linear_jump")
        meshes = mesh_family(case.mesh(8), 3)
        residuals = [consistency_residual(case, m) for m in meshes]
        self.assertLess(residuals[2], residuals[1])
        self.assertLess(residuals[1], residuals[0])

    def test_linear_exact_consistent(self):
        """P1 reproduces a linear solution"""
        case = manufactured_case("linear_exact")
        self.assertLess(consistency_residual(case, case.mesh(8)), 1e-9)


class TestConvergence(unittest.TestCase):
    """Test refinement studies"""

    def test_fit_slope(self):
        """Slope of a pure power law"""
        h = np.array([1.0, 0.5, 0.25])
        self.assertAlmostEqual(fit_slope(h, h ** 2), 2.0, places=12)
        self.assertTrue(math.isnan(fit_slope([1.0], [1.0])))
        self.assertTrue(math.isnan(fit_slope(h, [1.0, 0.0, 1.0])))

    def test_mesh_family(self):
        """levels counts the base mesh"""
        self.assertEqual(len(disk_family(levels=2)), 2)
        with self.assertRaises(ConfigurationError):
            mesh_family(disk_family(levels=1)[0], 0)

    def test_linear_jump_rates(self):
        """P1 converges at second order in L2 and first order in H1"""
        result = convergence_study(manufactured_case("linear_jump"), levels=4)
        self.assertFalse(result.saturated)
        self.assertEqual(list(result.table.columns),
                         ["level", "h", "n_nodes", "l2_error", "h1_error", "newton_iterations"])
        self.assertEqual(len(result.table), 4)
        self.assertAlmostEqual(result.slopes['l2'], 2.0, delta=0.25)
        self.assertAlmostEqual(result.slopes['h1'], 1.0, delta=0.25)

    def test_semilinear_rates(self):
        """The nonlinear cases keep the optimal rates"""
        for case_id in ("semilinear_neutral", "semilinear_nonneutral"):
            result = convergence_study(manufactured_case(case_id), levels=4)
            self.assertAlmostEqual(result.slopes['l2'], 2.0, delta=0.25, msg=case_id)
            self.assertAlmostEqual(result.slopes['h1'], 1.0, delta=0.25, msg=case_id)
            errors = result.table["l2_error"].to_numpy()
            self.assertTrue(np.all(np.diff(errors) < 0), case_id)

    def test_threads_do_not_change_results(self):
        """Concurrent levels give the same table"""
        case = manufactured_case("semilinear_neutral")
        serial = convergence_study(case, levels=2)
        parallel = convergence_study(case, levels=2, threads=2)
        pd.testing.assert_frame_equal(serial.table, parallel.table)

    def test_linear_exact_saturates(self):
        """Errors at solver tolerance are flagged instead of fitted"""
        result = convergence_study(manufactured_case("linear_exact"), levels=2,
                                   settings=NewtonSettings(tol=1e-12))
        self.assertTrue(result.saturated)
        self.assertTrue(math.isnan(result.slopes['l2']))

    def test_failure_keeps_partial_table(self):
        """A failing level raises with the rows solved so far"""
        settings = NewtonSettings(tol=1e-30, maxit=1)
        with self.assertRaises(NonConvergenceError) as ctx:
            convergence_study(manufactured_case("semilinear_neutral"), levels=2, settings=settings)
        self.assertIsInstance(ctx.exception.partial, pd.DataFrame)
        self.assertEqual(len(ctx.exception.partial), 0)


class TestSplittingEquivalence(unittest.TestCase):
    """Test that both splittings approach the same potential"""

    def test_difference_decreases(self):
        """The relative solvent difference shrinks under refinement"""
        report = splitting_equivalence(disk_problem("cell_model"), disk_charges(),
                                       disk_family(levels=4))
        self.assertEqual(len(report.table), 4)
        self.assertTrue(report.decreasing, report.table.to_string())
        self.assertTrue(all(f >= 2.5 for f in report.factors), report.factors)
        self.assertLessEqual(report.final_difference, 1e-2)


class TestBounds(unittest.TestCase):
    """Test level-set measures, a priori bounds and extinction"""

    def setUp(self):
        self.square = Mesh([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                           [[0, 1, 2], [0, 2, 3]], [2, 2], boundary_nodes=[0, 1, 2, 3])

    def test_theta_of_linear_field(self):
        """Theta(k) = 1 - k for u = x on the unit square"""
        u = DiscreteField(self.square, self.square.nodes[:, 0])
        curve = theta_curve(u, [0.0, 0.25, 0.5, 1.0])
        np.testing.assert_allclose([m for _, m in curve], [1.0, 0.75, 0.5, 0.0], atol=1e-14)

    def test_theta_counts_both_signs(self):
        """|u| > k includes negative values"""
        u = DiscreteField(self.square, -self.square.nodes[:, 0])
        self.assertAlmostEqual(theta_curve(u, [0.5])[0][1], 0.5, places=14)

    def test_theta_levels_sorted(self):
        """Levels must be sorted and nonnegative"""
        u = DiscreteField.zeros(self.square)
        with self.assertRaises(DataError):
            theta_curve(u, [0.5, 0.1])
        with self.assertRaises(DataError):
            theta_curve(u, [-1.0])

    def test_default_exponents(self):
        """s = 8, r = 4, q = 4 give beta = 3/2"""
        bound = apriori_bound(DataNorms(f_s=1.0, c_r=1.0, measure=4.0, diameter=2.0))
        self.assertAlmostEqual(bound.beta, 1.5)
        self.assertGreaterEqual(bound.k1, bound.k0)
        C, alpha, beta = bound.extinction_parameters()
        self.assertAlmostEqual(C, (2.0 * bound.C_M) ** 4)
        self.assertEqual(alpha, 4.0)

    def test_extinction_level_matches_k1(self):
        """k0 + t_e with Theta(k0) = |Omega| reproduces k1"""
        norms = DataNorms(f_s=1.0, c_r=1.0, measure=4.0, diameter=2.0)
        bound = apriori_bound(norms)
        C, alpha, beta = bound.extinction_parameters()
        curve = [(bound.k0, norms.measure), (2.0 * bound.k1, 0.0)]
        verdict = extinction_check(curve, C, alpha, beta, k0=bound.k0)
        self.assertAlmostEqual(bound.k0 + verdict.t_e, bound.k1, delta=1e-10 * bound.k1)

    def test_bound_monotone_in_data(self):
        """Larger data norms never lower k1"""
        base = dict(f_s=1.0, c_r=1.0, measure=4.0, diameter=2.0)
        k1 = apriori_bound(DataNorms(**base)).k1
        for key in ("f_s", "c_r", "f0_r"):
            for value in (1.5, 3.0, 10.0):
                larger = apriori_bound(DataNorms(**{**base, key: value})).k1
                self.assertGreaterEqual(larger, k1, (key, value))
        previous = 0.0
        for f_s in np.linspace(0.0, 5.0, 11):
            current = apriori_bound(DataNorms(**{**base, 'f_s': f_s})).k1
            self.assertGreaterEqual(current, previous)
            previous = current

    def test_infeasible_exponents(self):
        """beta must exceed one"""
        with self.assertRaises(InfeasibleExponentError):
            apriori_bound(DataNorms(s=2.0))
        with self.assertRaises(InfeasibleExponentError):
            apriori_bound(DataNorms(s=4.0, r=2.0))

    def test_bound_holds_for_disk_solution(self):
        """||u_h||_inf stays below k1 on the neutral example"""
        from src.solver import solve_gpbe_regular
        problem, mesh, field = disk_setup("neutral")
        norms = measure_data_norms(problem, mesh, field)
        self.assertGreater(norms.f_s, 0.0)
        bound = apriori_bound(norms)
        u = solve_gpbe_regular(problem, mesh, field).u
        self.assertLessEqual(u.max_abs(), bound.k1)

    def test_extinction_starts_at_k0(self):
        """The disk solution is checked from k0 and its extinction level stays below k1"""
        from src.solver import solve_gpbe_regular
        problem, mesh, field = disk_setup("neutral")
        bound = apriori_bound(measure_data_norms(problem, mesh, field))
        u = solve_gpbe_regular(problem, mesh, field).u
        levels = np.unique(np.r_[np.linspace(0.0, 1.05 * u.max_abs(), 32), bound.k0, bound.k1])
        C, alpha, beta = bound.extinction_parameters()
        verdict = extinction_check(theta_curve(u, levels), C, alpha, beta, k0=bound.k0)
        self.assertEqual(verdict.k0, bound.k0)
        self.assertLessEqual(bound.k0 + verdict.t_e, bound.k1 * (1.0 + 1e-12))

    def test_extinction_synthetic(self):
        """A cubic profile satisfies the decay inequality and vanishes on time"""
        levels = np.linspace(0.0, 2.0, 81)
        curve = [(k, max(0.0, 1.0 - k) ** 3) for k in levels]
        verdict = extinction_check(curve, C=0.06, alpha=1.5, beta=1.5)
        self.assertTrue(verdict.passed, verdict.detail)
        self.assertAlmostEqual(verdict.t_e, (0.06 * 2.0 ** 4.5) ** (2.0 / 3.0), places=12)

    def test_extinction_violation(self):
        """A too small constant is reported as a violation"""
        curve = [(k, max(0.0, 1.0 - k) ** 3) for k in np.linspace(0.0, 2.0, 41)]
        verdict = extinction_check(curve, C=1e-4, alpha=1.5, beta=1.5)
        self.assertFalse(verdict.inequality_holds)
        self.assertGreater(verdict.violations, 0)

    def test_extinction_input_checks(self):
        """Increasing curves and beta <= 1 are rejected"""
        with self.assertRaises(DataError):
            extinction_check([(0.0, 0.5), (1.0, 0.7)], C=1.0, alpha=1.0, beta=1.5)
        with self.assertRaises(InfeasibleExponentError):
            extinction_check([(0.0, 1.0), (1.0, 0.0)], C=1.0, alpha=1.0, beta=1.0)


class TestInvariantSuite(unittest.TestCase):
    """Test the verify command's checks"""

    def test_all_checks_pass(self):
        """Every invariant holds with the default seed"""
        table = run_invariant_suite(seed=42)
        self.assertEqual(list(table["check"]), list(CHECKS))
        failed = table.loc[~table["passed"], ["check", "detail"]]
        self.assertTrue(failed.empty, failed.to_string())

    def test_subset(self):
        """Checks can be selected by name"""
        table = run_invariant_suite(checks=["b_monotone", "extinction_synthetic"])
        self.assertEqual(list(table["check"]), ["b_monotone", "extinction_synthetic"])


if __name__ == '__main__':
    unittest.main(verbosity=2)
