"""
Plain-text mesh format.

    # comment
    nodes <N>
    x y                (N lines)
    triangles <F>
    i j k tag          (F lines)
    boundary <B>
    i                  (B lines)
    interface <I>
    i                  (I lines)
    circles <C>
    r                  (C lines)

Floats are written with repr(), the shortest text that reads back to the
same double, so save(load(save(m))) == save(m) byte for byte.
"""

from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from src.exceptions import MeshParseError
from .disk_mesh import Mesh

SECTIONS = ("nodes", "triangles", "boundary", "interface", "circles")
_WIDTHS = {"nodes": 2, "triangles": 4, "boundary": 1, "interface": 1, "circles": 1}


def _fmt(value: float) -> str:
    return repr(float(value))


def save_mesh(mesh: Mesh) -> str:
    """Serialize a mesh to text"""
    lines = ["# pbesolve mesh", f"nodes {mesh.n_nodes}"]
    lines.extend(f"{_fmt(x)} {_fmt(y)}" for x, y in mesh.nodes)
    lines.append(f"triangles {mesh.n_triangles}")
    lines.extend(f"{i} {j} {k} {tag}" for (i, j, k), tag in zip(mesh.triangles, mesh.elem_region))
    lines.append(f"boundary {len(mesh.boundary_nodes)}")
    lines.extend(str(i) for i in mesh.boundary_nodes)
    lines.append(f"interface {len(mesh.interface_nodes)}")
    lines.extend(str(i) for i in mesh.interface_nodes)
    lines.append(f"circles {len(mesh.circles)}")
    lines.extend(_fmt(r) for r in mesh.circles)
    return "\n".join(lines) + "\n"


def _content_lines(text: str) -> List[Tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((lineno, line))
    return out


def load_mesh(text: str, validate: bool = True) -> Mesh:
    """
    Parse mesh text.

    Raises:
        MeshParseError: unknown or missing section, count mismatch or a
            malformed number, with the offending line number
    """
    lines = _content_lines(text)
    data: Dict[str, list] = {}
    pos = 0
    while pos < len(lines):
        lineno, header = lines[pos]
        tokens = header.split()
        name = tokens[0].lower()
        if name not in SECTIONS:
            raise MeshParseError(f"unknown section '{tokens[0]}'", line=lineno)
        if name in data:
            raise MeshParseError(f"duplicate section '{name}'", line=lineno)
        if len(tokens) != 2 or not tokens[1].isdigit():
            raise MeshParseError(f"section '{name}' needs a count", line=lineno)
        count = int(tokens[1])
        rows = lines[pos + 1:pos + 1 + count]
        if len(rows) < count or any(r[1].split()[0].lower() in SECTIONS for r in rows):
            raise MeshParseError(f"section '{name}' ends before its {count} entries", line=lineno)
        parsed = []
        for row_lineno, row in rows:
            fields = row.split()
            if len(fields) != _WIDTHS[name]:
                raise MeshParseError(
                    f"expected {_WIDTHS[name]} fields in section '{name}', got {len(fields)}",
                    line=row_lineno,
                )
            try:
                if name in ("nodes", "circles"):
                    parsed.append([float(f) for f in fields])
                else:
                    parsed.append([int(f) for f in fields])
            except ValueError:
                raise MeshParseError(f"malformed number in section '{name}'", line=row_lineno) from None
        data[name] = parsed
        pos += 1 + count

    last_line = lines[-1][0] if lines else 0
    for name in SECTIONS:
        if name not in data:
            raise MeshParseError(f"missing section '{name}'", line=last_line)

    triangles = np.asarray(data["triangles"], dtype=np.int64).reshape(-1, 4)
    mesh = Mesh(
        nodes=np.asarray(data["nodes"], dtype=float).reshape(-1, 2),
        triangles=triangles[:, :3],
        elem_region=triangles[:, 3],
        boundary_nodes=np.asarray(data["boundary"], dtype=np.int64).ravel(),
        interface_nodes=np.asarray(data["interface"], dtype=np.int64).ravel(),
        circles=tuple(r[0] for r in data["circles"]),
    )
    return mesh.validate() if validate else mesh


def write_mesh_file(mesh: Mesh, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(save_mesh(mesh), encoding="utf-8")
    return path


def read_mesh_file(path: Union[str, Path]) -> Mesh:
    return load_mesh(Path(path).read_text(encoding="utf-8"))
