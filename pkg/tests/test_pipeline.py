"""
Test suite for the pbesolve pipeline
"""

import io
import json
import unittest
import sys
from contextlib import redirect_stdout
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core_model import ChargeSystem
from src.exceptions import ConfigurationError, NonConvergenceError
from src.pbe_pipeline import PBEPipeline
from src.solver import NewtonSettings
from src.verification import disk_charges, disk_problem


class TestPBEPipeline(unittest.TestCase):
    """Test the full solve pipeline"""

    @classmethod
    def setUpClass(cls):
        cls.pipeline = PBEPipeline(disk_problem("neutral"), disk_charges())
        cls.result = cls.pipeline.process()

    def test_pipeline_basic(self):
        """Test that the default pipeline converges and reports an energy"""
        self.assertTrue(self.result.converged)
        self.assertEqual(self.result.splitting, "two_term")
        self.assertEqual(self.result.phi_masked_nodes, 0)
        self.assertIsNotNone(self.result.energy)
        self.assertLess(self.result.energy['value'], 0.0)
        self.assertEqual(self.result.warnings, [])

    def test_result_json(self):
        """Test that results serialize without the solution objects"""
        data = json.loads(self.result.to_json())
        self.assertEqual(data['n_nodes'], self.result.n_nodes)
        self.assertNotIn('solution', data)

    def test_verbose_stages(self):
        """Test that verbose mode prints every stage banner"""
        buffer = io.StringIO()
        with redirect_stdout(buffer):
            PBEPipeline(disk_problem("cell_model"), disk_charges()).process(verbose=True)
        output = buffer.getvalue()
        for stage in (1, 2, 3, 5):
            self.assertIn(f"[Stage {stage}]", output)
        self.assertNotIn("[Stage 4]", output)

    def test_refinement(self):
        """Test that refinements enlarge the mesh"""
        fine = PBEPipeline(disk_problem("neutral"), disk_charges(), refinements=1).process()
        self.assertGreater(fine.n_nodes, self.result.n_nodes)

    def test_three_term(self):
        """Test that the three-term splitting skips the energy with a warning"""
        result = PBEPipeline(disk_problem("cell_model"), disk_charges(), splitting="three_term").process()
        self.assertTrue(result.converged)
        self.assertIsNone(result.energy)
        self.assertTrue(any("two-term" in w for w in result.warnings))

    def test_linear_model(self):
        """Test the LGPBE path"""
        result = PBEPipeline(disk_problem("neutral"), disk_charges(), model="lgpbe").process()
        self.assertEqual(result.model, "lgpbe")
        self.assertEqual(result.iterations, 0)


class TestEdgeCases(unittest.TestCase):
    """Test edge cases"""

    def test_unknown_model(self):
        """Test that only gpbe and lgpbe are accepted"""
        with self.assertRaises(ConfigurationError):
            PBEPipeline(disk_problem("neutral"), disk_charges(), model="pbe")

    def test_charge_outside_molecule(self):
        """Test that charges in the solvent disable the energy"""
        charges = ChargeSystem.from_arrays([[0.2, 0.1], [2.0, 0.3]], [1, -1])
        result = PBEPipeline(disk_problem("neutral"), charges).process()
        self.assertIsNone(result.energy)
        self.assertTrue(any("outside" in w for w in result.warnings))
        with self.assertRaises(ConfigurationError):
            PBEPipeline(disk_problem("neutral"), charges, splitting="three_term").process()

    def test_retries_exhausted(self):
        """Test that Newton failures propagate after the restart"""
        settings = NewtonSettings(tol=1e-30, maxit=1)
        for retries in (0, 1):
            pipeline = PBEPipeline(disk_problem("neutral"), disk_charges(), settings=settings,
                                   max_retries=retries)
            with self.assertRaises(NonConvergenceError):
                pipeline.process()


if __name__ == '__main__':
    unittest.main(verbosity=2)
