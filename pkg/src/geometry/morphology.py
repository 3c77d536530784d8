"""
Molecular region construction.

The molecule is the rolling-ball closing of the van der Waals ball union:
a point belongs to it unless some probe ball of radius r_p that avoids every
atom covers it. The ion exclusion layer (IEL) is the set of points closer
than r_I to the van der Waals union that are not in the molecule, and the
rest of the domain is accessible to ions.

Closings and openings are computed on voxel grids with two distance fields:
an analytic one to the ball union, and a Euclidean distance transform
(scipy.ndimage) from the set of admissible probe centres.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist, pdist, squareform

from src.core_model import ChargeSystem, RegionTag
from src.exceptions import ConfigurationError, ResolutionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BallUnion:
    """Union of balls B(c_i, R_i)"""
    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if len(centers) == 0:
            raise ConfigurationError("ball union must not be empty")
        if len(radii) != len(centers):
            raise ConfigurationError("one radius per ball center is required")
        if np.any(radii <= 0):
            raise ConfigurationError("ball radii must be positive")
        object.__setattr__(self, 'centers', centers)
        object.__setattr__(self, 'radii', radii)

    @classmethod
    def from_charges(cls, charges: ChargeSystem) -> "BallUnion":
        """van der Waals union of a charge system"""
        return cls(charges.positions, charges.radii)

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    def dilated(self, r: float) -> "BallUnion":
        """The r-dilation of a ball union is the union with radii R_i + r"""
        return BallUnion(self.centers, self.radii + r)


def _signed_ball_distances(u: BallUnion, points: np.ndarray) -> np.ndarray:
    return (cdist(points, u.centers) - u.radii[None, :]).min(axis=1)


def dist_to_union(u: BallUnion, x) -> Union[float, np.ndarray]:
    """Distance to the ball union (0 inside), for one point or an (N, d) array"""
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    values = np.maximum(0.0, _signed_ball_distances(u, np.atleast_2d(points)))
    return float(values[0]) if single else values


def minimum_gap_width(u: BallUnion) -> float:
    """Smallest surface-to-surface gap between two balls (negative if they overlap)"""
    if len(u.radii) < 2:
        return float("inf")
    gaps = squareform(pdist(u.centers)) - u.radii[:, None] - u.radii[None, :]
    np.fill_diagonal(gaps, np.inf)
    return float(gaps.min())


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """
    Uniform grid of sample points origin + index * spacing.

    Masks and value arrays on the grid have shape `extents` (C order,
    axis k is coordinate k).
    """
    origin: np.ndarray
    spacing: float
    extents: Tuple[int, ...]
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'origin', np.asarray(self.origin, dtype=float))
        object.__setattr__(self, 'extents', tuple(int(e) for e in self.extents))
        if not self.spacing > 0:
            raise ConfigurationError(f"grid spacing must be positive, got {self.spacing}")
        if len(self.extents) != len(self.origin) or min(self.extents) < 2:
            raise ConfigurationError("grid needs at least 2 points per axis")

    @classmethod
    def covering(cls, u: BallUnion, margin: float, spacing: float) -> "VoxelGrid":
        """Grid containing the margin-dilation of a ball union"""
        lo = (u.centers - u.radii[:, None]).min(axis=0) - margin
        hi = (u.centers + u.radii[:, None]).max(axis=0) + margin
        extents = np.ceil((hi - lo) / spacing).astype(int) + 1
        return cls(lo, spacing, tuple(extents))

    @property
    def dimension(self) -> int:
        return len(self.extents)

    def points(self) -> np.ndarray:
        axes = [self.origin[k] + self.spacing * np.arange(n) for k, n in enumerate(self.extents)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def nearest_index(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Multi-index of the nearest grid point, and a mask of points inside the grid"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.rint((points - self.origin) / self.spacing).astype(int)
        upper = np.asarray(self.extents) - 1
        inside = np.all((idx >= 0) & (idx <= upper), axis=1)
        return np.clip(idx, 0, upper), inside

    def with_values(self, values: np.ndarray) -> "VoxelGrid":
        return VoxelGrid(self.origin, self.spacing, self.extents, np.asarray(values))


def _pad_width(r: float, h: float) -> int:
    return int(np.ceil(r / h)) + 1


def close_mask(mask: np.ndarray, r: float, h: float) -> np.ndarray:
    """
    Rolling-ball closing [mask]^r of a boolean grid mask.

    A cell stays outside only if it is covered by a probe ball of radius r
    whose centre is at distance >= r from the mask.
    """
    w = _pad_width(r, h)
    padded = np.pad(np.asarray(mask, dtype=bool), w, constant_values=False)
    radius = r / h
    if not padded.any():
        return np.zeros(np.shape(mask), dtype=bool)
    probes = ndimage.distance_transform_edt(~padded) >= radius
    closed = ndimage.distance_transform_edt(~probes) >= radius
    return closed[tuple(slice(w, -w) for _ in closed.shape)]


def open_mask(mask: np.ndarray, r: float, h: float) -> np.ndarray:
    """Rolling-ball opening [mask]_r: union of probe balls of radius r inside the mask"""
    w = _pad_width(r, h)
    padded = np.pad(np.asarray(mask, dtype=bool), w, constant_values=False)
    radius = r / h
    centres = ndimage.distance_transform_edt(padded) >= radius
    if not centres.any():
        return np.zeros(np.shape(mask), dtype=bool)
    opened = ndimage.distance_transform_edt(~centres) < radius
    return opened[tuple(slice(w, -w) for _ in opened.shape)]


def _probe_centre_distance(u: BallUnion, r: float, points: np.ndarray) -> np.ndarray:
    """
    Distance from each point to S = {c : dist_to_union(c) >= r}.

    S is the complement of the open balls B(c_i, R_i + r), so its nearest point
    is the radial projection onto one dilated sphere or, in two dimensions, a
    corner where two dilated circles cross. Candidates inside another dilated
    ball are discarded. Three-dimensional unions only search the radial
    projections, which can overestimate the distance but never underestimate it.
    """
    centers, radii = u.centers, u.radii + r
    tol = 1e-12 * max(1.0, float(radii.max()))

    def admissible(candidates: np.ndarray) -> np.ndarray:
        return np.all(cdist(candidates, centers) >= radii[None, :] - tol, axis=1)

    best = np.full(len(points), np.inf)
    for center, radius in zip(centers, radii):
        offset = points - center
        norm = np.linalg.norm(offset, axis=1)
        offset[norm == 0.0, 0] = 1.0
        norm[norm == 0.0] = 1.0
        projection = center + radius * offset / norm[:, None]
        gap = np.where(admissible(projection), np.abs(norm - radius), np.inf)
        best = np.minimum(best, gap)

    if u.dimension == 2 and len(radii) > 1:
        i, j = np.triu_indices(len(radii), 1)
        axis = centers[j] - centers[i]
        D = np.linalg.norm(axis, axis=1)
        crossing = (D < radii[i] + radii[j]) & (D > np.abs(radii[i] - radii[j]))
        if crossing.any():
            i, j, axis, D = i[crossing], j[crossing], axis[crossing], D[crossing]
            a = (radii[i] ** 2 - radii[j] ** 2 + D ** 2) / (2.0 * D)
            height = np.sqrt(np.maximum(radii[i] ** 2 - a ** 2, 0.0))
            unit = axis / D[:, None]
            normal = np.stack([-unit[:, 1], unit[:, 0]], axis=1)
            base = centers[i] + a[:, None] * unit
            corners = np.vstack([base + height[:, None] * normal, base - height[:, None] * normal])
            corners = corners[admissible(corners)]
            if len(corners):
                best = np.minimum(best, cdist(points, corners).min(axis=1))
    return best


def rolling_ball_close(u: BallUnion, r_p: float, grid: VoxelGrid) -> np.ndarray:
    """
    Grid mask of the solvent-excluded region [V]^{r_p} of a ball union.

    Admissible probe centres S = {dist_to_union >= r_p} use the exact distance
    to the union; the closing is {grid distance to S >= r_p}. Cells outside the
    union but within two spacings of it are decided by the exact distance to S.
    The mask contains the union and is nested in r_p.
    """
    if not r_p > 0:
        raise ConfigurationError(f"probe radius must be positive, got {r_p}")
    if grid.spacing > r_p / 4.0:
        raise ResolutionError(
            f"grid spacing {grid.spacing:g} exceeds r_p/4 = {r_p / 4.0:g}; closing is not resolved"
        )
    points = grid.points()
    dist = _signed_ball_distances(u, points).reshape(grid.extents)
    w = _pad_width(r_p, grid.spacing)
    # outside the grid every point is an admissible probe centre
    probes = np.pad(dist >= r_p, w, constant_values=True)
    closed = ndimage.distance_transform_edt(~probes) >= r_p / grid.spacing
    closed = closed[tuple(slice(w, -w) for _ in closed.shape)]

    closed[dist <= 0.0] = True
    band = (dist > 0.0) & (dist <= 2.0 * grid.spacing)
    if band.any():
        closed[band] = _probe_centre_distance(u, r_p, points[band.ravel()]) >= r_p
    return closed


@dataclass(frozen=True, eq=False)
class RegionMap:
    """
    Total classification of points into RegionTag values.

    Args:
        classifier: maps an (N, d) array of points to integer tags
        provenance: 'grid' or 'analytic-disk'
        grid: sampling grid for grid-based maps
        tags: per-grid-point tags for grid-based maps
    """
    classifier: Callable[[np.ndarray], np.ndarray]
    provenance: str
    grid: Optional[VoxelGrid] = None
    tags: Optional[np.ndarray] = None
    radii: Tuple[float, ...] = field(default_factory=tuple)

    def classify(self, points) -> np.ndarray:
        return self.classifier(np.atleast_2d(np.asarray(points, dtype=float)))

    def region_areas(self) -> dict:
        """Measure of each region on the grid (cell count times h^d)"""
        if self.tags is None:
            raise ConfigurationError("region areas are only available for grid-based maps")
        cell = self.grid.spacing ** self.grid.dimension
        return {tag: float(np.count_nonzero(self.tags == tag) * cell) for tag in RegionTag}


def build_region_map(u: BallUnion, r_p: float, r_I: float, grid: VoxelGrid) -> RegionMap:
    """
    Partition the grid into Molecule, IEL and Ions.

    Args:
        u: van der Waals ball union
        r_p: probe radius
        r_I: ion exclusion radius, must exceed r_p
        grid: sampling grid; points outside it are classified as Ions
    """
    if not r_I > r_p > 0:
        raise ConfigurationError(
            f"region construction needs r_I > r_p > 0, got r_I={r_I:g}, r_p={r_p:g}"
        )
    molecule = rolling_ball_close(u, r_p, grid)
    dist = dist_to_union(u, grid.points()).reshape(grid.extents)
    tags = np.full(grid.extents, int(RegionTag.IONS), dtype=np.int8)
    tags[dist < r_I] = int(RegionTag.IEL)
    tags[molecule] = int(RegionTag.MOLECULE)
    logger.info(
        "Region map on %s grid: %d molecule, %d IEL, %d ion cells",
        "x".join(map(str, grid.extents)),
        np.count_nonzero(tags == RegionTag.MOLECULE),
        np.count_nonzero(tags == RegionTag.IEL),
        np.count_nonzero(tags == RegionTag.IONS),
    )

    def classify(points: np.ndarray) -> np.ndarray:
        idx, inside = grid.nearest_index(points)
        out = tags[tuple(idx.T)].astype(int)
        out[~inside] = int(RegionTag.IONS)
        return out

    return RegionMap(classify, "grid", grid=grid, tags=tags)


def analytic_disk_regions(r_m: float, r_iel: float, outer: float) -> RegionMap:
    """
    Concentric classification by |x|: Molecule below r_m, IEL below r_iel.

    Args:
        r_m: molecule radius
        r_iel: outer radius of the ion exclusion layer
        outer: half-width of the square domain (or radius of a disk domain)
    """
    if not 0 < r_m < r_iel < outer:
        raise ConfigurationError(
            f"disk geometry needs 0 < r_m < r_iel < outer, got {r_m:g}, {r_iel:g}, {outer:g}"
        )

    def classify(points: np.ndarray) -> np.ndarray:
        radius = np.linalg.norm(points, axis=1)
        tags = np.full(len(points), int(RegionTag.IONS))
        tags[radius < r_iel] = int(RegionTag.IEL)
        tags[radius < r_m] = int(RegionTag.MOLECULE)
        return tags

    return RegionMap(classify, "analytic-disk", radii=(r_m, r_iel))
