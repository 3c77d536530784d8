"""
Tests for mesh generation, refinement and the text format
"""

import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core_model import ChargeSystem, RegionTag
from src.exceptions import ConfigurationError, MeshError, MeshParseError
from src.mesh import (
    DiscreteField,
    Mesh,
    extract_submesh,
    generate_disk_mesh,
    interpolate,
    load_mesh,
    read_mesh_file,
    refine_uniform,
    save_mesh,
    write_mesh_file,
)


def unit_square():
    nodes = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    return Mesh(nodes, [[0, 1, 2], [0, 2, 3]], [2, 2], boundary_nodes=[0, 1, 2, 3])


class TestDiskMesh(unittest.TestCase):
    """Test the interface-fitted disk generator"""

    @classmethod
    def setUpClass(cls):
        cls.mesh = generate_disk_mesh(1.0, 1.5, 3.0, 8)

    def test_covers_square(self):
        """Triangles tile the square exactly"""
        self.assertAlmostEqual(self.mesh.total_area, 36.0, places=10)
        for corner in ([3.0, 3.0], [-3.0, 3.0], [-3.0, -3.0], [3.0, -3.0]):
            d = np.linalg.norm(self.mesh.nodes - corner, axis=1)
            self.assertAlmostEqual(d.min(), 0.0, places=12)

    def test_topology(self):
        """A triangulated disk has Euler characteristic one"""
        self.assertEqual(self.mesh.euler_characteristic(), 1)

    def test_all_regions_present(self):
        """Molecule, IEL and Ions triangles all exist"""
        for tag in RegionTag:
            self.assertGreater(np.count_nonzero(self.mesh.elem_region == tag), 0)

    def test_interface_nodes_on_circles(self):
        """Interface nodes lie on r_m or r_iel"""
        radius = np.linalg.norm(self.mesh.nodes[self.mesh.interface_nodes], axis=1)
        distance = np.minimum(np.abs(radius - 1.0), np.abs(radius - 1.5))
        self.assertLess(distance.max(), 1e-12)

    def test_origin_inside_triangle(self):
        """The origin is neither a node nor a centroid"""
        self.assertGreater(np.linalg.norm(self.mesh.nodes, axis=1).min(), 1e-3)
        self.assertGreater(np.linalg.norm(self.mesh.centroids, axis=1).min(), 1e-6)

    def test_charge_on_node_rejected(self):
        """Validation with charges rejects coinciding nodes"""
        node = self.mesh.nodes[self.mesh.interface_nodes[0]]
        charges = ChargeSystem.from_arrays([node], [1])
        with self.assertRaises(MeshError):
            self.mesh.validate(charges)

    def test_bad_parameters(self):
        """Resolution and radii are checked"""
        with self.assertRaises(ConfigurationError):
            generate_disk_mesh(1.0, 1.5, 3.0, 4)
        with self.assertRaises(ConfigurationError):
            generate_disk_mesh(1.5, 1.0, 3.0, 8)


class TestRefinement(unittest.TestCase):
    """Test red refinement with interface snapping"""

    def test_refine(self):
        """Refinement quadruples triangles and keeps interfaces on circles"""
        mesh = generate_disk_mesh(1.0, 1.5, 3.0, 8)
        fine = refine_uniform(mesh)
        self.assertEqual(fine.n_triangles, 4 * mesh.n_triangles)
        self.assertAlmostEqual(fine.total_area, 36.0, places=10)
        self.assertLess(fine.max_edge_length, mesh.max_edge_length)
        radius = np.linalg.norm(fine.nodes[fine.interface_nodes], axis=1)
        distance = np.minimum(np.abs(radius - 1.0), np.abs(radius - 1.5))
        self.assertLess(distance.max(), 1e-9)
        self.assertEqual(fine.euler_characteristic(), 1)

    def test_min_angle_preserved(self):
        """Each refinement keeps at least 0.8 of the parent's smallest angle"""
        mesh = generate_disk_mesh(1.0, 1.5, 3.0, 8)
        for level in range(3):
            fine = refine_uniform(mesh)
            self.assertGreaterEqual(fine.min_angles.min(), 0.8 * mesh.min_angles.min(), level)
            mesh = fine

    def test_region_measure_converges(self):
        """Molecule area approaches pi under refinement"""
        mesh = generate_disk_mesh(1.0, 1.5, 3.0, 8)
        errors = []
        for _ in range(3):
            area = mesh.areas[mesh.elem_region == RegionTag.MOLECULE].sum()
            errors.append(abs(area - np.pi))
            mesh = refine_uniform(mesh)
        self.assertLess(errors[2], errors[1])
        self.assertLess(errors[1], errors[0])

    def test_submesh(self):
        """The molecule submesh keeps only molecule triangles"""
        mesh = generate_disk_mesh(1.0, 1.5, 3.0, 8)
        sub, node_map = extract_submesh(mesh, RegionTag.MOLECULE)
        self.assertTrue(np.all(sub.elem_region == RegionTag.MOLECULE))
        np.testing.assert_array_equal(sub.nodes, mesh.nodes[node_map])
        radius = np.linalg.norm(sub.nodes[sub.boundary_nodes], axis=1)
        np.testing.assert_allclose(radius, 1.0, atol=1e-12)


class TestValidation(unittest.TestCase):
    """Test mesh invariants"""

    def test_inverted_triangle(self):
        """Clockwise triangles are rejected"""
        mesh = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]], [0], boundary_nodes=[0, 1, 2])
        with self.assertRaises(MeshError):
            mesh.validate()

    def test_hanging_edge(self):
        """An interior edge with one triangle is a hole or hanging node"""
        mesh = Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]], [2, 2],
                    boundary_nodes=[0, 1, 3])
        with self.assertRaises(MeshError):
            mesh.validate()

    def test_unmarked_interface(self):
        """Region changes need interface nodes"""
        square = unit_square()
        mesh = Mesh(square.nodes, square.triangles, [0, 2], boundary_nodes=[0, 1, 2, 3])
        with self.assertRaises(MeshError):
            mesh.validate()
        Mesh(square.nodes, square.triangles, [0, 2], boundary_nodes=[0, 1, 2, 3],
             interface_nodes=[0, 2]).validate()

    def test_discrete_field(self):
        """Fields must match the node count and be finite"""
        mesh = unit_square()
        with self.assertRaises(MeshError):
            DiscreteField(mesh, np.zeros(3))
        with self.assertRaises(MeshError):
            DiscreteField(mesh, [0.0, np.nan, 0.0, 0.0])
        field = interpolate(mesh, lambda p: p[:, 0] - 2 * p[:, 1])
        self.assertEqual(field.max_abs(), 2.0)


class TestMeshText(unittest.TestCase):
    """Test the plain-text mesh format"""

    def test_text_is_stable(self):
        """Saving a loaded mesh reproduces the text byte for byte"""
        text = save_mesh(refine_uniform(generate_disk_mesh(1.0, 1.5, 3.0, 8)))
        self.assertEqual(save_mesh(load_mesh(text)), text)

    def test_file_io(self):
        """Files round-trip through a directory that does not exist yet"""
        mesh = generate_disk_mesh(1.0, 1.5, 3.0, 8)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_mesh_file(mesh, Path(tmp) / "sub" / "mesh.txt")
            loaded = read_mesh_file(path)
        np.testing.assert_array_equal(loaded.nodes, mesh.nodes)
        np.testing.assert_array_equal(loaded.elem_region, mesh.elem_region)
        self.assertEqual(loaded.circles, mesh.circles)

    def test_unknown_section(self):
        """Unknown headers carry their line number"""
        with self.assertRaises(MeshParseError) as ctx:
            load_mesh("# mesh\nvertices 1\n0 0\n")
        self.assertEqual(ctx.exception.line, 2)

    def test_malformed_number(self):
        """Malformed coordinates are reported"""
        text = save_mesh(unit_square()).replace("1.0 1.0", "1.0 x", 1)
        with self.assertRaises(MeshParseError):
            load_mesh(text)

    def test_missing_section(self):
        """Every section is required"""
        text = save_mesh(unit_square())
        text = text[:text.index("circles")]
        with self.assertRaises(MeshParseError):
            load_mesh(text)

    def test_short_section(self):
        """A count larger than the entries is an error"""
        with self.assertRaises(MeshParseError):
            load_mesh("nodes 3\n0 0\n1 0\ntriangles 0\n")


if __name__ == '__main__':
    unittest.main(verbosity=2)
