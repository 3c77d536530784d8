from .disk_mesh import (
    DiscreteField,
    Mesh,
    extract_submesh,
    generate_disk_mesh,
    interpolate,
    refine_times,
    refine_uniform,
)
from .mesh_io import load_mesh, read_mesh_file, save_mesh, write_mesh_file

__all__ = [
    'DiscreteField', 'Mesh', 'extract_submesh', 'generate_disk_mesh', 'interpolate',
    'refine_times', 'refine_uniform', 'load_mesh', 'read_mesh_file', 'save_mesh',
    'write_mesh_file',
]
