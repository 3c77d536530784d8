from .morphology import (
    BallUnion,
    RegionMap,
    VoxelGrid,
    analytic_disk_regions,
    build_region_map,
    close_mask,
    dist_to_union,
    minimum_gap_width,
    open_mask,
    rolling_ball_close,
)
from .pqr import ingest_pqr, load_pqr

__all__ = [
    'BallUnion', 'RegionMap', 'VoxelGrid', 'analytic_disk_regions', 'build_region_map',
    'close_mask', 'dist_to_union', 'minimum_gap_width', 'open_mask', 'rolling_ball_close',
    'ingest_pqr', 'load_pqr',
]
