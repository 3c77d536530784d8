"""
2-D triangle meshes with interface-fitted region tags.

The generator builds concentric node rings: a small off-centre triangle
around the origin, rings inside the molecule up to r_m, rings through the
ion exclusion layer up to r_iel, then curves blending the r_iel circle into
the square boundary [-L, L]^2. Adjacent rings are zipped into triangles by
sweeping their polar angles, so every region interface is a ring of edges.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.core_model import ChargeSystem, RegionTag
from src.exceptions import ConfigurationError, MeshError, RefinementError
from src.geometry import analytic_disk_regions

logger = logging.getLogger(__name__)

# Relative tolerance for "node lies on circle r".
CIRCLE_TOLERANCE = 1e-9


def _sorted_unique(indices) -> np.ndarray:
    return np.unique(np.asarray(indices, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Triangle mesh of a 2-D domain.

    Args:
        nodes: (N, 2) coordinates
        triangles: (F, 3) node indices, counterclockwise
        elem_region: (F,) RegionTag per triangle
        boundary_nodes: nodes on the outer boundary
        interface_nodes: nodes on region interfaces
        circles: radii of the circular interfaces (used when refining)
    """
    nodes: np.ndarray
    triangles: np.ndarray
    elem_region: np.ndarray
    boundary_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    interface_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    circles: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'nodes', np.asarray(self.nodes, dtype=float).reshape(-1, 2))
        object.__setattr__(self, 'triangles', np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        object.__setattr__(self, 'elem_region', np.asarray(self.elem_region, dtype=np.int64).ravel())
        object.__setattr__(self, 'boundary_nodes', _sorted_unique(self.boundary_nodes))
        object.__setattr__(self, 'interface_nodes', _sorted_unique(self.interface_nodes))
        object.__setattr__(self, 'circles', tuple(float(r) for r in self.circles))
        if len(self.elem_region) != len(self.triangles):
            raise MeshError("one region tag per triangle is required")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.nodes)):
            raise MeshError("triangle references a node that does not exist")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def corners(self) -> np.ndarray:
        """(F, 3, 2) vertex coordinates"""
        return self.nodes[self.triangles]

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.corners
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """(F, 3, 2) constant gradients of the three P1 hat functions per triangle"""
        p = self.corners
        det = 2.0 * self.signed_areas
        g1 = np.stack([p[:, 2, 1] - p[:, 0, 1], -(p[:, 2, 0] - p[:, 0, 0])], axis=1) / det[:, None]
        g2 = np.stack([-(p[:, 1, 1] - p[:, 0, 1]), p[:, 1, 0] - p[:, 0, 0]], axis=1) / det[:, None]
        return np.stack([-g1 - g2, g1, g2], axis=1)

    @cached_property
    def edge_data(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Unique edges and per-triangle edge ids.

        Returns:
            edges: (E, 2) sorted node pairs
            tri_edges: (F, 3) edge id of (v0 v1), (v1 v2), (v2 v0)
        """
        t = self.triangles
        local = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        local = np.sort(local, axis=1)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        tri_edges = inverse.reshape(3, -1).T
        return edges, tri_edges

    @property
    def edges(self) -> np.ndarray:
        return self.edge_data[0]

    @cached_property
    def edge_triangles(self) -> np.ndarray:
        """(E, 2) adjacent triangles per edge, -1 where absent"""
        edges, tri_edges = self.edge_data
        flat = tri_edges.ravel()
        owner = np.repeat(np.arange(self.n_triangles), 3)
        counts = np.bincount(flat, minlength=len(edges))
        if counts.max(initial=0) > 2:
            e = int(np.argmax(counts))
            raise MeshError(f"edge {tuple(edges[e])} is shared by more than two triangles")
        order = np.argsort(flat, kind="stable")
        first = np.searchsorted(flat[order], np.arange(len(edges)))
        adj = np.full((len(edges), 2), -1, dtype=np.int64)
        adj[:, 0] = owner[order][first]
        two = counts == 2
        adj[two, 1] = owner[order][first[two] + 1]
        return adj

    @cached_property
    def centroid_tree(self) -> cKDTree:
        """KD-tree over triangle centroids for point location"""
        return cKDTree(self.centroids)

    @cached_property
    def diameter(self) -> float:
        lo, hi = self.nodes.min(axis=0), self.nodes.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def max_edge_length(self) -> float:
        e = self.edges
        return float(np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1).max())

    @cached_property
    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of each triangle (radians)"""
        p = self.corners
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum('ij,ij->i', a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return np.min(angles, axis=0)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def region_nodes(self, tag: RegionTag) -> np.ndarray:
        """Nodes incident to at least one triangle with the given tag"""
        return np.unique(self.triangles[self.elem_region == int(tag)])

    def euler_characteristic(self) -> int:
        return self.n_nodes - len(self.edges) + self.n_triangles

    def validate(self, charges: Optional[ChargeSystem] = None) -> "Mesh":
        """
        Check orientation, nondegeneracy, conformity and interface alignment.

        Raises MeshError on the first violation; returns self otherwise.
        """
        if self.n_triangles == 0:
            raise MeshError("mesh has no triangles")
        min_area = 1e-14 * self.diameter ** 2
        bad = np.flatnonzero(self.signed_areas <= min_area)
        if bad.size:
            raise MeshError(f"triangle {bad[0]} is inverted or degenerate "
                            f"(signed area {self.signed_areas[bad[0]]:.3e})")
        if np.any(~np.isin(self.elem_region, [int(t) for t in RegionTag])):
            raise MeshError("unknown region tag")

        adj = self.edge_triangles
        edges = self.edges
        # conformity: an edge with a single triangle must lie on the outer boundary
        single = adj[:, 1] < 0
        on_boundary = np.isin(edges, self.boundary_nodes).all(axis=1)
        if np.any(single & ~on_boundary):
            e = edges[np.flatnonzero(single & ~on_boundary)[0]]
            raise MeshError(f"edge {tuple(e)} has one triangle but is not on the boundary "
                            "(hanging node or hole)")
        # alignment: region changes only across interface edges
        inner = ~single
        tags = self.elem_region[adj[inner]]
        crossing = edges[inner][tags[:, 0] != tags[:, 1]]
        if crossing.size and not np.isin(crossing, self.interface_nodes).all():
            raise MeshError("a region interface edge has a node that is not marked as interface")

        if charges is not None:
            tol = 1e-12 * self.diameter
            d = np.linalg.norm(self.nodes[:, None, :] - charges.positions[None, :, :2], axis=2)
            if np.any(d < tol):
                raise MeshError("a mesh node coincides with a charge position")
        return self


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """P1 nodal values bound to a mesh"""
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if len(values) != self.mesh.n_nodes:
            raise MeshError(f"field has {len(values)} values for {self.mesh.n_nodes} nodes")
        if not np.all(np.isfinite(values)):
            raise MeshError("field values must be finite")
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "DiscreteField":
        return cls(mesh, np.zeros(mesh.n_nodes))

    def with_values(self, values: np.ndarray) -> "DiscreteField":
        return DiscreteField(self.mesh, values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0


def interpolate(mesh: Mesh, function: Callable[[np.ndarray], np.ndarray]) -> DiscreteField:
    """Nodal interpolant of a vectorized function of (N, 2) points"""
    return DiscreteField(mesh, np.asarray(function(mesh.nodes), dtype=float))


# --------------------------------------------------------------------------
# generation


def _zip_rings(inner: np.ndarray, inner_angles: np.ndarray,
               outer: np.ndarray, outer_angles: np.ndarray) -> list:
    """
    Triangulate the band between two closed rings of node ids.

    Both rings are ordered by increasing angle; the sweep advances whichever
    ring has the smaller next angle.
    """
    a0 = inner_angles[0]
    inner_unwrapped = a0 + np.mod(inner_angles - a0, 2 * math.pi)
    outer_unwrapped = a0 + np.mod(outer_angles - a0, 2 * math.pi)
    order = np.argsort(outer_unwrapped, kind="stable")
    outer, outer_unwrapped = outer[order], outer_unwrapped[order]

    na, nb = len(inner), len(outer)
    a_ang = np.append(inner_unwrapped, inner_unwrapped[0] + 2 * math.pi)
    b_ang = np.append(outer_unwrapped, outer_unwrapped[0] + 2 * math.pi)
    triangles = []
    i = j = 0
    while i < na or j < nb:
        advance_inner = j == nb or (i < na and a_ang[i + 1] <= b_ang[j + 1])
        if advance_inner:
            triangles.append((inner[i % na], outer[j % nb], inner[(i + 1) % na]))
            i += 1
        else:
            triangles.append((inner[i % na], outer[j % nb], outer[(j + 1) % nb]))
            j += 1
    return triangles


def _ring_count(n: int, radius: float, r_m: float, minimum: int = 3) -> int:
    return max(minimum, int(round(n * radius / r_m)))


def generate_disk_mesh(r_m: float, r_iel: float, half_width: float, n: int) -> Mesh:
    """
    Interface-fitted mesh of the square [-L, L]^2 with circles r_m and r_iel.

    Args:
        r_m: molecule radius
        r_iel: outer radius of the ion exclusion layer
        half_width: L, half side length of the square domain
        n: number of nodes on the r_m circle (angular resolution)

    Returns:
        Validated Mesh whose nodes include exact points of both circles and
        the four corners of the square. The origin is strictly inside a
        triangle and is neither a node nor a centroid.
    """
    regions = analytic_disk_regions(r_m, r_iel, half_width)
    if n < 8:
        raise ConfigurationError(f"angular resolution n must be >= 8, got {n}")

    h = 2 * math.pi * r_m / n
    n_mol = max(1, int(round(r_m / h)))
    n_iel = max(1, int(round((r_iel - r_m) / h)))
    n_out = max(1, int(round((half_width - r_iel) / h)))

    nodes = []
    rings = []          # (node ids, angles, radius used for tagging)

    def add_ring(points: np.ndarray, angles: np.ndarray, radius: float):
        start = len(nodes)
        nodes.extend(points)
        rings.append((np.arange(start, start + len(points)), angles, radius))

    # innermost triangle, perturbed so its centroid is not the origin
    rho0 = r_m / (n_mol + 1)
    theta0 = 0.3 + 2 * math.pi * np.arange(3) / 3
    radii0 = rho0 * np.array([1.0, 0.85, 1.15])
    add_ring(np.stack([radii0 * np.cos(theta0), radii0 * np.sin(theta0)], axis=1), theta0, rho0)

    def circle_ring(radius: float, offset: float):
        count = _ring_count(n, radius, r_m)
        theta = offset + 2 * math.pi * np.arange(count) / count
        add_ring(np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1), theta, radius)

    for k in range(1, n_mol + 1):
        circle_ring(r_m * (k + 1) / (n_mol + 1), 0.5 * k)
    mol_ring = len(rings) - 1
    for k in range(1, n_iel + 1):
        circle_ring(r_m + (r_iel - r_m) * k / n_iel, 0.5 * (n_mol + k))
    iel_ring = len(rings) - 1

    square_radius = 4.0 * half_width / math.pi
    for k in range(1, n_out + 1):
        tau = k / n_out
        mean_radius = (1 - tau) * r_iel + tau * square_radius
        count = _ring_count(n, mean_radius, r_m, minimum=4)
        count = 4 * int(math.ceil(count / 4))
        theta = math.pi / 4 + 2 * math.pi * np.arange(count) / count
        c, s = np.cos(theta), np.sin(theta)
        square = half_width / np.maximum(np.abs(c), np.abs(s))
        radial = (1 - tau) * r_iel + tau * square
        points = np.stack([radial * c, radial * s], axis=1)
        if k == n_out:
            points = _square_points(theta, half_width)
        add_ring(points, theta, mean_radius)

    nodes = np.asarray(nodes, dtype=float)
    triangles = [tuple(rings[0][0])]
    band_radius = [rings[0][2] * 0.5]
    for (ia, aa, ra), (ib, ab, rb) in zip(rings[:-1], rings[1:]):
        band = _zip_rings(ia, aa, ib, ab)
        triangles.extend(band)
        band_radius.extend([0.5 * (ra + rb)] * len(band))
    triangles = np.asarray(triangles, dtype=np.int64)
    tags = regions.classify(np.stack([np.asarray(band_radius), np.zeros(len(band_radius))], axis=1))

    interface = np.concatenate([rings[mol_ring][0], rings[iel_ring][0]])
    mesh = Mesh(nodes, triangles, tags, rings[-1][0], interface, (r_m, r_iel)).validate()
    logger.info("Generated disk mesh: %d nodes, %d triangles, h = %.4g",
                mesh.n_nodes, mesh.n_triangles, mesh.max_edge_length)
    return mesh


def _square_points(theta: np.ndarray, half_width: float) -> np.ndarray:
    """Radial projection of directions theta onto the square boundary, exact on the sides"""
    c, s = np.cos(theta), np.sin(theta)
    points = np.empty((len(theta), 2))
    vertical = np.abs(c) >= np.abs(s)
    corner = np.isclose(np.abs(c), np.abs(s), rtol=0.0, atol=1e-12)
    points[vertical, 0] = half_width * np.sign(c[vertical])
    points[vertical, 1] = half_width * s[vertical] / np.abs(c[vertical])
    points[~vertical, 1] = half_width * np.sign(s[~vertical])
    points[~vertical, 0] = half_width * c[~vertical] / np.abs(s[~vertical])
    points[corner] = half_width * np.sign(np.stack([c[corner], s[corner]], axis=1))
    return points


# --------------------------------------------------------------------------
# refinement and submeshes


def _circle_of(mesh: Mesh, points: np.ndarray) -> np.ndarray:
    """Index into mesh.circles of the circle each point lies on, -1 if none"""
    out = np.full(len(points), -1, dtype=np.int64)
    radius = np.linalg.norm(points, axis=1)
    for c, r in enumerate(mesh.circles):
        out[np.abs(radius - r) <= CIRCLE_TOLERANCE * r] = c
    return out


def refine_uniform(mesh: Mesh) -> Mesh:
    """
    Red refinement: every triangle is split into four by its edge midpoints.

    Midpoints of region-interface edges whose endpoints lie on the same
    circle are moved radially back onto that circle. Tags are inherited.
    """
    edges, tri_edges = mesh.edge_data
    adj = mesh.edge_triangles
    n = mesh.n_nodes

    midpoints = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    inner = adj[:, 1] >= 0
    crossing = np.zeros(len(edges), dtype=bool)
    crossing[inner] = mesh.elem_region[adj[inner, 0]] != mesh.elem_region[adj[inner, 1]]
    circle_a = _circle_of(mesh, mesh.nodes[edges[:, 0]])
    circle_b = _circle_of(mesh, mesh.nodes[edges[:, 1]])
    snap = crossing & (circle_a >= 0) & (circle_a == circle_b)
    if np.any(snap):
        radii = np.asarray(mesh.circles)[circle_a[snap]]
        m = midpoints[snap]
        midpoints[snap] = m * (radii / np.linalg.norm(m, axis=1))[:, None]

    nodes = np.vstack([mesh.nodes, midpoints])
    t = mesh.triangles
    m01, m12, m20 = (tri_edges[:, k] + n for k in range(3))
    children = np.stack([
        np.stack([t[:, 0], m01, m20], axis=1),
        np.stack([m01, t[:, 1], m12], axis=1),
        np.stack([m20, m12, t[:, 2]], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ], axis=1).reshape(-1, 3)
    tags = np.repeat(mesh.elem_region, 4)

    boundary_edges = np.flatnonzero(~inner)
    boundary = np.concatenate([mesh.boundary_nodes, boundary_edges + n])
    interface = np.concatenate([mesh.interface_nodes, np.flatnonzero(crossing) + n])
    refined = Mesh(nodes, children, tags, boundary, interface, mesh.circles)

    bad = np.flatnonzero(refined.signed_areas <= 1e-14 * refined.diameter ** 2)
    if bad.size:
        parent = int(bad[0] // 4)
        raise RefinementError(f"snapping inverted a child of triangle {parent}", element=parent)
    refined.validate()
    logger.debug("Refined mesh to %d nodes, %d triangles", refined.n_nodes, refined.n_triangles)
    return refined


def refine_times(mesh: Mesh, levels: int) -> Mesh:
    for _ in range(levels):
        mesh = refine_uniform(mesh)
    return mesh


def extract_submesh(mesh: Mesh, tag: RegionTag) -> Tuple[Mesh, np.ndarray]:
    """
    Triangles with one region tag, renumbered.

    Returns:
        (submesh, node_map) where node_map[local] is the global node index.
        The submesh boundary consists of its single-triangle edges (the
        interface for the Molecule region).
    """
    selected = mesh.elem_region == int(tag)
    if not np.any(selected):
        raise MeshError(f"mesh has no triangles tagged {RegionTag(tag).name}")
    tri = mesh.triangles[selected]
    node_map, local = np.unique(tri, return_inverse=True)
    local = local.reshape(-1, 3)
    sub = Mesh(mesh.nodes[node_map], local, mesh.elem_region[selected], circles=mesh.circles)

    adj = sub.edge_triangles
    boundary = np.unique(sub.edges[adj[:, 1] < 0])
    interface = np.flatnonzero(np.isin(node_map, mesh.interface_nodes))
    sub = Mesh(sub.nodes, sub.triangles, sub.elem_region, boundary, interface, mesh.circles)
    return sub, node_map
