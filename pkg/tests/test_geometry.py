"""
Tests for PQR ingestion and the molecular region construction
"""

import sys
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core_model import RegionTag
from src.exceptions import ConfigurationError, EmptyInputError, PQRParseError, ResolutionError
from scipy import ndimage
from scipy.spatial import cKDTree

from src.geometry import (
    BallUnion,
    VoxelGrid,
    analytic_disk_regions,
    build_region_map,
    close_mask,
    dist_to_union,
    ingest_pqr,
    load_pqr,
    minimum_gap_width,
    open_mask,
    rolling_ball_close,
)

DATA_DIR = Path(__file__).parent.parent / "data"

PQR_TEXT = """REMARK two charges
ATOM      1  N   ALA     1       1.000   2.000   3.000 -0.3000 1.8240
HETATM    2  O   HOH     2      -1.000   0.500   0.000  0.3000 1.6612
TER
END
"""


class TestPQR(unittest.TestCase):
    """Test PQR parsing"""

    def test_parse_records(self):
        """ATOM and HETATM records become charges, others are skipped"""
        charges = ingest_pqr(PQR_TEXT)
        self.assertEqual(len(charges), 2)
        np.testing.assert_allclose(charges.positions[0], [1.0, 2.0, 3.0])
        np.testing.assert_allclose(charges.valences, [-0.3, 0.3])
        np.testing.assert_allclose(charges.radii, [1.824, 1.6612])

    def test_length_unit_and_projection(self):
        """Positions are rescaled and projected onto the xy plane"""
        charges = ingest_pqr(PQR_TEXT, length_unit=1e-9, dimension=2)
        self.assertEqual(charges.dimension, 2)
        np.testing.assert_allclose(charges.positions[0], [0.1, 0.2])

    def test_malformed_number(self):
        """Bad numeric fields report their line"""
        text = "REMARK\nATOM 1 N ALA 1 1.0 2.0 abc -0.3 1.8\n"
        with self.assertRaises(PQRParseError) as ctx:
            ingest_pqr(text)
        self.assertEqual(ctx.exception.line, 2)

    def test_short_record(self):
        """Records without enough fields are rejected"""
        with self.assertRaises(PQRParseError):
            ingest_pqr("ATOM 1.0 2.0 3.0\n")

    def test_negative_radius(self):
        """Radii must be non-negative"""
        with self.assertRaises(PQRParseError):
            ingest_pqr("ATOM 1 N ALA 1 1.0 2.0 3.0 -0.3 -1.8\n")

    def test_empty(self):
        """Input without atoms raises EmptyInputError"""
        with self.assertRaises(EmptyInputError):
            ingest_pqr("REMARK nothing here\nEND\n")

    def test_sample_file(self):
        """The bundled methanol file loads in two dimensions"""
        charges = load_pqr(DATA_DIR / "methanol.pqr", dimension=2)
        self.assertEqual(len(charges), 6)
        self.assertAlmostEqual(charges.valences.sum(), 0.0, places=3)


class TestBallUnion(unittest.TestCase):
    """Test ball unions and their distance function"""

    def setUp(self):
        self.union = BallUnion(np.array([[-1.2, 0.0], [1.2, 0.0]]), np.array([1.0, 1.0]))

    def test_distance(self):
        """Distance is zero inside and exact outside"""
        self.assertEqual(dist_to_union(self.union, [1.2, 0.5]), 0.0)
        self.assertAlmostEqual(dist_to_union(self.union, [4.2, 0.0]), 2.0)

    def test_gap_width(self):
        """Surface-to-surface gap of the two balls"""
        self.assertAlmostEqual(minimum_gap_width(self.union), 0.4)
        self.assertEqual(minimum_gap_width(BallUnion(np.zeros((1, 2)), np.ones(1))), float("inf"))

    def test_dilation(self):
        """Dilation adds to every radius"""
        np.testing.assert_allclose(self.union.dilated(0.5).radii, [1.5, 1.5])

    def test_nonpositive_radius(self):
        """Zero radii are rejected"""
        with self.assertRaises(ConfigurationError):
            BallUnion(np.zeros((1, 2)), np.zeros(1))


class TestMorphology(unittest.TestCase):
    """Test closings, openings and the region map"""

    def test_closing_extensive_opening_antiextensive(self):
        """mask is inside its closing, its opening is inside mask"""
        rng = np.random.default_rng(42)
        mask = rng.random((40, 40)) > 0.6
        closed = close_mask(mask, 2.0, 1.0)
        opened = open_mask(mask, 2.0, 1.0)
        self.assertTrue(np.all(closed[mask]))
        self.assertFalse(np.any(opened[~mask]))

    def test_opening_removes_small_features(self):
        """A single cell does not contain a probe ball"""
        mask = np.zeros((21, 21), dtype=bool)
        mask[10, 10] = True
        self.assertFalse(open_mask(mask, 2.0, 1.0).any())

    def test_single_ball_regions(self):
        """One ball: molecule inside, IEL in the shell, ions outside"""
        union = BallUnion(np.zeros((1, 2)), np.ones(1))
        grid = VoxelGrid.covering(union, 1.2, 0.1)
        regions = build_region_map(union, 0.5, 1.0, grid)
        tags = regions.classify([[0.0, 0.0], [1.7, 0.0], [5.0, 0.0]])
        np.testing.assert_array_equal(
            tags, [RegionTag.MOLECULE, RegionTag.IEL, RegionTag.IONS])
        self.assertEqual(regions.provenance, "grid")

    def test_gap_is_closed(self):
        """A gap narrower than the probe diameter belongs to the molecule"""
        union = BallUnion(np.array([[-1.2, 0.0], [1.2, 0.0]]), np.array([1.0, 1.0]))
        grid = VoxelGrid.covering(union, 2.5, 0.1)
        regions = build_region_map(union, 1.0, 2.0, grid)
        self.assertEqual(regions.classify([[0.0, 0.0]])[0], RegionTag.MOLECULE)
        areas = regions.region_areas()
        self.assertGreater(areas[RegionTag.MOLECULE], 2 * np.pi * 0.9)

    def test_radius_ordering(self):
        """r_I must exceed r_p"""
        union = BallUnion(np.zeros((1, 2)), np.ones(1))
        grid = VoxelGrid.covering(union, 1.0, 0.1)
        with self.assertRaises(ConfigurationError):
            build_region_map(union, 1.0, 1.0, grid)

    def test_resolution(self):
        """The grid must resolve the probe"""
        union = BallUnion(np.zeros((1, 2)), np.ones(1))
        grid = VoxelGrid.covering(union, 3.0, 0.5)
        with self.assertRaises(ResolutionError):
            build_region_map(union, 1.0, 2.0, grid)

    def test_analytic_disk(self):
        """Concentric classification by radius"""
        regions = analytic_disk_regions(1.0, 1.5, 3.0)
        tags = regions.classify([[0.5, 0.0], [0.0, 1.2], [2.0, 2.0]])
        np.testing.assert_array_equal(
            tags, [RegionTag.MOLECULE, RegionTag.IEL, RegionTag.IONS])
        with self.assertRaises(ConfigurationError):
            analytic_disk_regions(1.5, 1.0, 3.0)


def brute_force_closing(union: BallUnion, r_p: float, grid: VoxelGrid) -> np.ndarray:
    """A cell is open when a probe centre on a fine grid, at least r_p from the union, is closer than r_p"""
    fine = VoxelGrid(grid.origin - r_p, grid.spacing / 4.0,
                     tuple(4 * (e - 1) + int(np.ceil(8 * r_p / grid.spacing)) + 1 for e in grid.extents))
    centres = fine.points()
    centres = centres[dist_to_union(union, centres) >= r_p]
    nearest, _ = cKDTree(centres).query(grid.points())
    return (nearest >= r_p).reshape(grid.extents)


class TestRollingBallClose(unittest.TestCase):
    """Test the solvent-excluded region of ball unions"""

    def assert_within_cells(self, mask, reference, cells):
        """Cells where mask and reference differ lie near the reference boundary"""
        depth = np.where(reference, ndimage.distance_transform_edt(reference),
                         ndimage.distance_transform_edt(~reference))
        self.assertTrue(np.all(depth[mask != reference] <= cells),
                        f"{np.count_nonzero(mask != reference)} cells differ")

    def test_single_ball(self):
        """A ball is its own closing up to one cell"""
        union = BallUnion(np.zeros((1, 2)), np.ones(1))
        grid = VoxelGrid.covering(union, 1.1, 0.05)
        dist = dist_to_union(union, grid.points()).reshape(grid.extents)
        sizes = []
        for r_p in (0.2, 0.4, 0.8):
            mask = rolling_ball_close(union, r_p, grid)
            self.assertTrue(np.all(mask[dist <= 0.0]), r_p)
            self.assertTrue(np.all(dist[mask] <= grid.spacing), r_p)
            sizes.append(np.count_nonzero(mask))
        self.assertEqual(sorted(sizes), sizes)

    def test_narrow_gap_is_filled(self):
        """Balls 2.5 apart with r_p = 1 enclose their gap, as the probe oracle says"""
        union = BallUnion(np.array([[-1.25, 0.0], [1.25, 0.0]]), np.array([1.0, 1.0]))
        grid = VoxelGrid.covering(union, 1.5, 0.1)
        mask = rolling_ball_close(union, 1.0, grid)
        points = grid.points().reshape(grid.extents + (2,))
        core = (np.abs(points[..., 0]) < 0.2) & (np.abs(points[..., 1]) < 0.2)
        self.assertTrue(core.any())
        self.assertTrue(np.all(mask[core]))
        self.assert_within_cells(mask, brute_force_closing(union, 1.0, grid), 2)

    def test_distant_balls_stay_separate(self):
        """Balls 10 apart with r_p = 0.5 close to their union up to one cell"""
        union = BallUnion(np.array([[-5.0, 0.0], [5.0, 0.0]]), np.array([1.0, 1.0]))
        grid = VoxelGrid.covering(union, 0.8, 0.1)
        dist = dist_to_union(union, grid.points()).reshape(grid.extents)
        mask = rolling_ball_close(union, 0.5, grid)
        self.assertTrue(np.all(mask[dist <= 0.0]))
        self.assertTrue(np.all(dist[mask] <= grid.spacing))
        self.assert_within_cells(mask, brute_force_closing(union, 0.5, grid), 2)

    def test_random_unions(self):
        """Closings contain the union, grow with r_p and are idempotent"""
        rng = np.random.default_rng(7)
        grid = VoxelGrid(np.zeros(2), 0.05, (128, 128))
        for trial in range(20):
            n = int(rng.integers(2, 4))
            union = BallUnion(rng.uniform(2.2, 4.2, size=(n, 2)), rng.uniform(0.3, 0.7, size=n))
            inside = dist_to_union(union, grid.points()).reshape(grid.extents) <= 0.0
            previous = inside
            for r_p in (0.2, 0.4, 0.8):
                mask = rolling_ball_close(union, r_p, grid)
                self.assertTrue(np.all(mask[inside]), (trial, r_p))
                self.assertTrue(np.all(mask[previous]), (trial, r_p))
                np.testing.assert_array_equal(close_mask(mask, r_p, grid.spacing), mask)
                previous = mask

    def test_invalid_radius(self):
        """Probe radii must be positive"""
        union = BallUnion(np.zeros((1, 2)), np.ones(1))
        grid = VoxelGrid.covering(union, 1.0, 0.1)
        with self.assertRaises(ConfigurationError):
            rolling_ball_close(union, 0.0, grid)


if __name__ == '__main__':
    unittest.main(verbosity=2)
