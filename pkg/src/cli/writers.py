"""
File emitters: legacy ASCII VTK, CSV and JSON lines.

Floats are written with 17 significant digits so that numeric data
round-trips bit for bit.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Union

import numpy as np
import pandas as pd

from src.geometry import VoxelGrid
from src.mesh import Mesh

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    return FLOAT_FORMAT % value


def _write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    logger.info("Wrote %s", path)
    return path


def vtk_mesh_text(mesh: Mesh, point_data: Optional[Mapping[str, np.ndarray]] = None,
                  title: str = "pbesolve field") -> str:
    """UNSTRUCTURED_GRID text with element region tags and nodal scalars"""
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines += ["5"] * mesh.n_triangles
    lines += [f"CELL_DATA {mesh.n_triangles}", "SCALARS region int 1", "LOOKUP_TABLE default"]
    lines += [str(int(t)) for t in mesh.elem_region]
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (mesh.n_nodes,):
                raise ValueError(f"point data '{name}' has shape {values.shape}, "
                                 f"expected ({mesh.n_nodes},)")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(v) for v in values]
    return "\n".join(lines) + "\n"


def write_vtk_mesh(mesh: Mesh, point_data: Optional[Mapping[str, np.ndarray]], path: PathLike) -> Path:
    return _write_text(path, vtk_mesh_text(mesh, point_data))


def vtk_mask_text(grid: VoxelGrid, tags: np.ndarray, name: str = "region") -> str:
    """STRUCTURED_POINTS text; x varies fastest"""
    tags = np.asarray(tags)
    if tags.shape != grid.extents:
        raise ValueError(f"mask shape {tags.shape} does not match grid extents {grid.extents}")
    dims = list(grid.extents) + [1] * (3 - grid.dimension)
    origin = list(grid.origin) + [0.0] * (3 - grid.dimension)
    lines = ["# vtk DataFile Version 3.0", "pbesolve region mask", "ASCII",
             "DATASET STRUCTURED_POINTS",
             "DIMENSIONS " + " ".join(str(d) for d in dims),
             "ORIGIN " + " ".join(_fmt(o) for o in origin),
             "SPACING " + " ".join([_fmt(grid.spacing)] * 3),
             f"POINT_DATA {tags.size}", f"SCALARS {name} int 1", "LOOKUP_TABLE default"]
    lines += [str(int(t)) for t in tags.ravel(order="F")]
    return "\n".join(lines) + "\n"


def write_vtk_mask(grid: VoxelGrid, tags: np.ndarray, path: PathLike) -> Path:
    return _write_text(path, vtk_mask_text(grid, tags))


def write_csv(table: pd.DataFrame, path: PathLike, footer: Optional[Dict[str, float]] = None) -> Path:
    """
    CSV with a header row and full precision; footer entries are appended as
    `# key = value` comment lines (read back with comment='#').
    """
    text = table.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if footer:
        text += "".join(f"# {key} = {_fmt(value)}\n" for key, value in footer.items())
    return _write_text(path, text)


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def write_jsonl(records: Iterable[dict], path: PathLike) -> Path:
    return _write_text(path, "".join(json.dumps(r, default=_json_default) + "\n" for r in records))


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")
