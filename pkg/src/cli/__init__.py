from .app import RunResult, build_parser, main, run
from .config import RunConfig, echo_config, parse_config, read_config
from .writers import (
    read_csv,
    vtk_mask_text,
    vtk_mesh_text,
    write_csv,
    write_jsonl,
    write_vtk_mask,
    write_vtk_mesh,
)

__all__ = [
    'RunResult', 'build_parser', 'main', 'run',
    'RunConfig', 'echo_config', 'parse_config', 'read_config',
    'read_csv', 'vtk_mask_text', 'vtk_mesh_text', 'write_csv', 'write_jsonl',
    'write_vtk_mask', 'write_vtk_mesh',
]
