"""
Tests for CSR assembly and preconditioned conjugate gradients
"""

import sys
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.exceptions import AssemblyError, BreakdownError, ConfigurationError
from src.linalg import cg_solve, csr_from_triplets


def laplacian_1d(n):
    rows, cols, vals = [], [], []
    for i in range(n):
        rows.append(i); cols.append(i); vals.append(2.0)
        if i + 1 < n:
            rows += [i, i + 1]; cols += [i + 1, i]; vals += [-1.0, -1.0]
    return csr_from_triplets(n, (np.array(rows), np.array(cols), np.array(vals)))


class TestTriplets(unittest.TestCase):
    """Test CSR construction"""

    def test_duplicates_summed(self):
        """Repeated entries are added"""
        A = csr_from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0)])
        self.assertEqual(A[0, 0], 3.0)
        self.assertEqual(A.nnz, 2)

    def test_out_of_range(self):
        """Indices beyond the dimension raise AssemblyError"""
        with self.assertRaises(AssemblyError):
            csr_from_triplets(2, [(0, 2, 1.0)])

    def test_empty(self):
        """No triplets give the zero matrix"""
        self.assertEqual(csr_from_triplets(3, []).nnz, 0)


class TestConjugateGradients(unittest.TestCase):
    """Test the CG solver"""

    def test_dense_oracle(self):
        """CG matches a dense solve on random SPD systems"""
        rng = np.random.default_rng(42)
        for _ in range(5):
            n = int(rng.integers(5, 30))
            Q = rng.normal(size=(n, n))
            dense = Q @ Q.T + n * np.eye(n)
            rows, cols = np.nonzero(dense)
            A = csr_from_triplets(n, (rows, cols, dense[rows, cols]))
            b = rng.normal(size=n)
            x, stats = cg_solve(A, b, tol=1e-12)
            self.assertTrue(stats.converged)
            np.testing.assert_allclose(x, np.linalg.solve(dense, b), rtol=1e-8, atol=1e-10)

    def test_preconditioner_choices(self):
        """Both preconditioners solve the 1-D Laplacian"""
        A = laplacian_1d(40)
        b = np.ones(40)
        for precond in ("none", "jacobi"):
            x, stats = cg_solve(A, b, tol=1e-12, precond=precond)
            self.assertTrue(stats.converged)
            self.assertLess(np.linalg.norm(A @ x - b), 1e-9)

    def test_zero_rhs(self):
        """A zero right-hand side returns zero without iterating"""
        x, stats = cg_solve(laplacian_1d(5), np.zeros(5))
        np.testing.assert_array_equal(x, 0.0)
        self.assertEqual(stats.iterations, 0)

    def test_iteration_cap(self):
        """Hitting maxit reports non-convergence with the best iterate"""
        _, stats = cg_solve(laplacian_1d(50), np.ones(50), tol=1e-14, maxit=3)
        self.assertFalse(stats.converged)
        self.assertEqual(stats.iterations, 3)

    def test_invalid_arguments(self):
        """Tolerance and preconditioner are validated"""
        A = laplacian_1d(3)
        with self.assertRaises(ConfigurationError):
            cg_solve(A, np.ones(3), tol=0.0)
        with self.assertRaises(ConfigurationError):
            cg_solve(A, np.ones(3), precond="ilu")

    def test_indefinite_breakdown(self):
        """A negative diagonal is reported as a breakdown"""
        A = csr_from_triplets(2, [(0, 0, -1.0), (1, 1, 1.0)])
        with self.assertRaises(BreakdownError):
            cg_solve(A, np.ones(2))


if __name__ == '__main__':
    unittest.main(verbosity=2)
