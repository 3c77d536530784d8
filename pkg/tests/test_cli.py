"""
Tests for configuration parsing, writers and the pbesolve entry point
"""

import os
import sys
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.cli import (
    echo_config,
    main,
    parse_config,
    read_config,
    read_csv,
    vtk_mask_text,
    vtk_mesh_text,
    write_csv,
)
from src.cli.app import build_charges, build_problem, resolve_threads
from src.core_model import UnitMode
from src.exceptions import ConfigParseError
from src.geometry import VoxelGrid
from src.mesh import Mesh

CONFIG_DIR = Path(__file__).parent.parent / "configs"


class TestConfigParsing(unittest.TestCase):
    """Test the key = value configuration format"""

    def test_defaults(self):
        """Only the command is required"""
        config = parse_config("[run]\ncommand = mesh\n")
        self.assertEqual(config.command, "mesh")
        self.assertEqual(config.geometry.kind, "disk")
        self.assertEqual(config.solver.splitting, "two_term")
        self.assertEqual(config.problem.eps_s, 80.0)

    def test_comments_and_repeated_keys(self):
        """Comments are stripped, charge lines accumulate"""
        config = read_config(CONFIG_DIR / "disk_solve.cfg")
        self.assertEqual(len(config.charges.charge), 2)
        self.assertEqual(config.problem.species, [(1.0, 1), (1.0, -1)])
        charges = build_charges(config, CONFIG_DIR)
        self.assertEqual(len(charges), 2)
        self.assertEqual(build_problem(config).unit_mode, UnitMode.SYNTHETIC)

    def test_unknown_key_line(self):
        """Unknown keys report their line"""
        with self.assertRaises(ConfigParseError) as ctx:
            parse_config("[run]\ncommand = solve\nbogus = 1\n")
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn("bogus", str(ctx.exception))

    def test_invalid_value_line(self):
        """Bad values report their line"""
        with self.assertRaises(ConfigParseError) as ctx:
            parse_config("# header\n[run]\ncommand = fly\n")
        self.assertEqual(ctx.exception.line, 3)

    def test_duplicate_key(self):
        """Non-repeatable keys may appear only once"""
        with self.assertRaises(ConfigParseError) as ctx:
            parse_config("[run]\ncommand = mesh\n[geometry]\nn = 8\nn = 16\n")
        self.assertEqual(ctx.exception.line, 5)

    def test_unknown_section(self):
        """Only the known sections are accepted"""
        with self.assertRaises(ConfigParseError) as ctx:
            parse_config("[run]\ncommand = mesh\n[plots]\n")
        self.assertEqual(ctx.exception.line, 3)

    def test_geometry_ordering(self):
        """Cross-field checks point at the section header"""
        with self.assertRaises(ConfigParseError) as ctx:
            parse_config("[run]\ncommand = mesh\n[geometry]\nr_m = 2.0\n")
        self.assertEqual(ctx.exception.line, 3)

    def test_missing_charge(self):
        """Disk solves need at least one charge"""
        with self.assertRaises(ConfigParseError):
            parse_config("[run]\ncommand = solve\n")
        parse_config("[run]\ncommand = verify\n")

    def test_missing_input_file(self):
        """Input paths are checked against the config directory"""
        with self.assertRaises(ConfigParseError):
            parse_config("[run]\ncommand = mesh\n[geometry]\nmesh_path = nowhere.txt\n",
                         base_dir=CONFIG_DIR)

    def test_overrides(self):
        """Command-line values replace file values"""
        config = parse_config("[run]\ncommand = mesh\noutput = a\n",
                              {'run': {'command': 'verify', 'output': 'b', 'seed': None}})
        self.assertEqual(config.command, "verify")
        self.assertEqual(config.run.output, "b")

    def test_echo_round_trip(self):
        """The echoed configuration parses back to the same values"""
        for name in ("disk_solve.cfg", "disk_three_term.cfg", "verify.cfg", "convergence.cfg"):
            config = read_config(CONFIG_DIR / name)
            self.assertEqual(parse_config(echo_config(config), base_dir=CONFIG_DIR), config, name)


class TestThreads(unittest.TestCase):
    """Test worker thread precedence"""

    def test_precedence(self):
        """Explicit value, then environment, then one"""
        config = parse_config("[run]\ncommand = convergence\n")
        with mock.patch.dict(os.environ, {"PBESOLVE_THREADS": "3"}):
            self.assertEqual(resolve_threads(config), 3)
            explicit = parse_config("[run]\ncommand = convergence\nthreads = 2\n")
            self.assertEqual(resolve_threads(explicit), 2)
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(resolve_threads(config), 1)


class TestWriters(unittest.TestCase):
    """Test VTK and CSV output"""

    def test_vtk_two_triangles(self):
        """Unit square with a nodal field"""
        mesh = Mesh([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                    [[0, 1, 2], [0, 2, 3]], [0, 2], boundary_nodes=[0, 1, 2, 3],
                    interface_nodes=[0, 2])
        expected = "\n".join([
            "# vtk DataFile Version 3.0", "pbesolve field", "ASCII", "DATASET UNSTRUCTURED_GRID",
            "POINTS 4 double", "0 0 0", "1 0 0", "1 1 0", "0 1 0",
            "CELLS 2 8", "3 0 1 2", "3 0 2 3",
            "CELL_TYPES 2", "5", "5",
            "CELL_DATA 2", "SCALARS region int 1", "LOOKUP_TABLE default", "0", "2",
            "POINT_DATA 4", "SCALARS u double 1", "LOOKUP_TABLE default",
            "0.5", "1", "-2", "0.10000000000000001",
        ]) + "\n"
        self.assertEqual(vtk_mesh_text(mesh, {'u': [0.5, 1.0, -2.0, 0.1]}), expected)
        with self.assertRaises(ValueError):
            vtk_mesh_text(mesh, {'u': [1.0]})

    def test_vtk_mask(self):
        """Structured points list x fastest"""
        grid = VoxelGrid(np.array([-1.0, 0.0]), 0.5, (2, 3))
        tags = np.array([[0, 1, 2], [1, 2, 2]])
        lines = vtk_mask_text(grid, tags).splitlines()
        self.assertIn("DIMENSIONS 2 3 1", lines)
        self.assertIn("ORIGIN -1 0 0", lines)
        self.assertEqual(lines[-6:], ["0", "1", "1", "2", "2", "2"])

    def test_csv_footer(self):
        """Footer lines are comments that read_csv skips"""
        table = pd.DataFrame({'h': [0.5, 0.25], 'l2_error': [1e-2, 2.5e-3]})
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(table, Path(tmp) / "out" / "t.csv", footer={'slope_l2': 2.0})
            text = path.read_text()
            loaded = read_csv(path)
        self.assertIn("# slope_l2 = 2", text)
        pd.testing.assert_frame_equal(loaded, table)


class TestMain(unittest.TestCase):
    """Test the entry point and its exit codes"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.out = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_mesh(self):
        """mesh writes the text and VTK files"""
        self.assertEqual(main(["mesh", "--out", str(self.out)]), 0)
        self.assertTrue((self.out / "mesh.txt").exists())
        self.assertTrue((self.out / "mesh.vtk").exists())
        self.assertTrue((self.out / "config.echo.cfg").exists())

    def test_surface(self):
        """surface writes the region mask"""
        self.assertEqual(main(["surface", "--out", str(self.out)]), 0)
        self.assertTrue((self.out / "regions.vtk").exists())
        self.assertTrue((self.out / "regions.jsonl").exists())

    def test_solve(self):
        """solve writes fields, report and iteration table"""
        code = main(["solve", "--config", str(CONFIG_DIR / "disk_solve.cfg"), "--out", str(self.out)])
        self.assertEqual(code, 0)
        for name in ("phi.vtk", "u.vtk", "G.vtk", "report.jsonl", "iterations.csv"):
            self.assertTrue((self.out / name).exists(), name)

    def test_solve_is_reproducible(self):
        """Repeated runs write identical reports"""
        config = str(CONFIG_DIR / "disk_solve.cfg")
        main(["solve", "--config", config, "--out", str(self.out / "a")])
        main(["solve", "--config", config, "--out", str(self.out / "b")])
        self.assertEqual((self.out / "a" / "report.jsonl").read_text(),
                         (self.out / "b" / "report.jsonl").read_text())

    def test_verify(self):
        """All invariant checks pass"""
        self.assertEqual(main(["verify", "--out", str(self.out)]), 0)
        table = read_csv(self.out / "verify.csv")
        self.assertTrue(table["passed"].all())

    def test_bad_config(self):
        """Configuration errors exit with 1"""
        path = self.out / "bad.cfg"
        path.write_text("[run]\ncommand = mesh\n[geometry]\nn = four\n")
        self.assertEqual(main(["mesh", "--config", str(path), "--out", str(self.out)]), 1)

    def test_missing_config_file(self):
        """An unreadable config file exits with 1"""
        self.assertEqual(main(["mesh", "--config", str(self.out / "missing.cfg")]), 1)

    def test_energy_needs_two_term(self):
        """energy rejects the three-term splitting"""
        code = main(["energy", "--config", str(CONFIG_DIR / "disk_three_term.cfg"),
                     "--out", str(self.out)])
        self.assertEqual(code, 1)

    def test_nonconvergence_exit_code(self):
        """Solver failures exit with 2"""
        path = self.out / "tight.cfg"
        text = (CONFIG_DIR / "disk_solve.cfg").read_text().replace("tol = 1e-10", "tol = 1e-30\nmaxit = 1")
        path.write_text(text)
        self.assertEqual(main(["solve", "--config", str(path), "--out", str(self.out)]), 2)


if __name__ == '__main__':
    unittest.main(verbosity=2)
