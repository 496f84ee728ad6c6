"""
Wavefront OBJ I/O
Reads and writes v / vt / f records. A topology identifier is kept in a
``<name>.topology.json`` sidecar next to the OBJ file.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ..errors import GeometryError
from .mesh import Mesh

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".topology.json")


def load_obj(path: PathLike) -> Mesh:
    """
    Load a triangle mesh with per-vertex UVs

    Corners referencing the same position with different UVs (UV seams) are split
    into separate vertices. Polygons with more than three corners are fan-triangulated.

    Raises:
        GeometryError: missing file, missing UVs, or malformed records
    """
    path = Path(path)
    if not path.exists():
        raise GeometryError(f"Mesh file not found: {path}")

    positions: List[List[float]] = []
    texcoords: List[List[float]] = []
    faces: List[List[Tuple[int, int]]] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "v":
                positions.append([float(x) for x in parts[1:4]])
            elif parts[0] == "vt":
                texcoords.append([float(x) for x in parts[1:3]])
            elif parts[0] == "f":
                corners = []
                for token in parts[1:]:
                    fields = token.split("/")
                    if len(fields) < 2 or not fields[1]:
                        raise GeometryError(f"{path}:{lineno}: face corner without UV index")
                    corners.append((_resolve(int(fields[0]), len(positions)),
                                    _resolve(int(fields[1]), len(texcoords))))
                faces.append(corners)
        except ValueError as e:
            raise GeometryError(f"{path}:{lineno}: malformed record ({e})") from e

    if not faces:
        raise GeometryError(f"{path} has no faces")

    # Sorted (v, vt) keys keep the file's vertex order when there are no seams
    keys = sorted({key for corners in faces for key in corners})
    remap: Dict[Tuple[int, int], int] = {key: i for i, key in enumerate(keys)}
    vertices = [positions[v] for v, _ in keys]
    uvs = [texcoords[vt] for _, vt in keys]
    triangles = []
    for corners in faces:
        ids = [remap[key] for key in corners]
        for k in range(1, len(ids) - 1):
            triangles.append([ids[0], ids[k], ids[k + 1]])

    topology_id = "template"
    sidecar = _sidecar(path)
    if sidecar.exists():
        topology_id = json.loads(sidecar.read_text()).get("topology_id", topology_id)

    logger.info(f"Loaded {path.name}: {len(vertices)} vertices, {len(triangles)} triangles")
    return Mesh(
        vertices=np.array(vertices),
        triangles=np.array(triangles),
        uvs=np.clip(np.array(uvs), 0.0, 1.0),
        topology_id=topology_id,
    )


def _resolve(index: int, count: int) -> int:
    """OBJ indices are 1-based; negative indices count from the end"""
    resolved = index - 1 if index > 0 else count + index
    if not 0 <= resolved < count:
        raise GeometryError(f"OBJ index {index} out of range (have {count})")
    return resolved


def save_obj(mesh: Mesh, path: PathLike) -> Path:
    """Write a mesh with one vt per vertex and f v/vt records, plus the topology sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {mesh.n_vertices} vertices, {mesh.n_triangles} triangles"]
    lines += [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += [f"vt {u:.17g} {v:.17g}" for u, v in mesh.uvs]
    lines += [f"f {a}/{a} {b}/{b} {c}/{c}" for a, b, c in mesh.triangles + 1]
    path.write_text("\n".join(lines) + "\n")
    _sidecar(path).write_text(json.dumps({"topology_id": mesh.topology_id}, indent=2))
    return path
