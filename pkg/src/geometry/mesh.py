"""
Mesh Model
Fixed-topology triangle meshes with per-vertex UVs, shape normals, midpoint
subdivision and displacement embossing.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from ..errors import GeometryError
from ..raster.maps import RasterMap

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Triangle mesh on a fixed template topology

    Attributes:
        vertices: (n, 3) object-space positions
        triangles: (m, 3) vertex index triples
        uvs: (n, 2) per-vertex texture coordinates in [0, 1]^2, V axis up
        topology_id: Identifier of the template the mesh was registered to
    """

    vertices: np.ndarray
    triangles: np.ndarray
    uvs: np.ndarray
    topology_id: str = "template"

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64)
        triangles = np.array(self.triangles, dtype=np.int64)
        uvs = np.array(self.uvs, dtype=np.float64)
        for array in (vertices, triangles, uvs):
            array.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)
        object.__setattr__(self, "uvs", uvs)
        self._validate()

    def _validate(self):
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise GeometryError(f"Vertices must be (n, 3), got {self.vertices.shape}")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3 or len(self.triangles) == 0:
            raise GeometryError(f"Triangles must be a non-empty (m, 3) array, got {self.triangles.shape}")
        if self.uvs.shape != (len(self.vertices), 2):
            raise GeometryError(
                f"Expected one UV per vertex ({len(self.vertices)}, 2), got {self.uvs.shape}"
            )
        if not np.all(np.isfinite(self.vertices)) or not np.all(np.isfinite(self.uvs)):
            raise GeometryError("Mesh contains non-finite coordinates")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise GeometryError("Triangle index out of range")
        referenced = np.zeros(len(self.vertices), dtype=bool)
        referenced[self.triangles.ravel()] = True
        if not referenced.all():
            raise GeometryError(f"{int((~referenced).sum())} vertices are not referenced by any triangle")
        if self.uvs.min() < 0.0 or self.uvs.max() > 1.0:
            raise GeometryError("UV coordinates must lie in [0, 1]^2")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Positions of the three corners of every triangle"""
        tri = self.triangles
        return self.vertices[tri[:, 0]], self.vertices[tri[:, 1]], self.vertices[tri[:, 2]]

    def bounding_sphere(self) -> Tuple[np.ndarray, float]:
        """Centre of the axis-aligned bounds and the radius enclosing every vertex"""
        centre = 0.5 * (self.vertices.min(axis=0) + self.vertices.max(axis=0))
        radius = float(np.linalg.norm(self.vertices - centre, axis=1).max())
        return centre, radius

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(vertices=vertices, triangles=self.triangles, uvs=self.uvs, topology_id=self.topology_id)


def face_normals(mesh: Mesh) -> np.ndarray:
    """Un-normalized triangle normals; magnitude is twice the triangle area"""
    p0, p1, p2 = mesh.corners()
    return np.cross(p1 - p0, p2 - p0)


def shape_normals(mesh: Mesh) -> np.ndarray:
    """
    Area-weighted per-vertex unit normals

    Raises:
        GeometryError: a vertex whose incident triangles are all degenerate
    """
    weighted = face_normals(mesh)
    accum = np.zeros_like(mesh.vertices)
    for corner in range(3):
        np.add.at(accum, mesh.triangles[:, corner], weighted)
    norms = np.linalg.norm(accum, axis=1)
    degenerate = norms <= 1e-300
    if degenerate.any():
        first = int(np.flatnonzero(degenerate)[0])
        raise GeometryError(
            f"Vertex {first} has a zero-area star ({int(degenerate.sum())} such vertices)"
        )
    return accum / norms[:, None]


def subdivide(mesh: Mesh, levels: int) -> Mesh:
    """
    Midpoint (1:4) subdivision

    Original vertices keep their indices and positions; each edge gains one midpoint
    vertex with midpoint-interpolated UVs. Level 0 returns the mesh unchanged.
    """
    if levels < 0:
        raise GeometryError(f"Subdivision levels must be >= 0, got {levels}")

    vertices, triangles, uvs = mesh.vertices, mesh.triangles, mesh.uvs
    for _ in range(levels):
        n = len(vertices)
        edges = np.concatenate(
            [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=0
        )
        edges = np.sort(edges, axis=1)
        unique, inverse = np.unique(edges, axis=0, return_inverse=True)
        inverse = inverse.reshape(3, -1)
        ab, bc, ca = (n + inverse[0], n + inverse[1], n + inverse[2])
        a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]

        vertices = np.concatenate([vertices, 0.5 * (vertices[unique[:, 0]] + vertices[unique[:, 1]])])
        uvs = np.concatenate([uvs, 0.5 * (uvs[unique[:, 0]] + uvs[unique[:, 1]])])
        triangles = np.concatenate(
            [
                np.stack([a, ab, ca], axis=1),
                np.stack([ab, b, bc], axis=1),
                np.stack([ca, bc, c], axis=1),
                np.stack([ab, bc, ca], axis=1),
            ]
        )

    if levels:
        logger.debug(f"Subdivided {mesh.n_triangles} -> {len(triangles)} triangles")
    return Mesh(vertices=vertices, triangles=triangles, uvs=uvs, topology_id=mesh.topology_id)


def sample_bilinear(map_: RasterMap, uvs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bilinearly sample a map at UV coordinates

    Returns:
        (samples (n, C), valid (n,)) where validity is taken from the nearest texel
    """
    uvs = np.asarray(uvs, dtype=np.float64)
    cols = uvs[:, 0] * map_.width - 0.5
    rows = (1.0 - uvs[:, 1]) * map_.height - 0.5
    coords = np.stack([rows, cols])
    data = map_.data.astype(np.float64)
    samples = np.stack(
        [
            ndimage.map_coordinates(data[:, :, ch], coords, order=1, mode="nearest")
            for ch in range(map_.channels)
        ],
        axis=-1,
    )
    if map_.valid is None:
        return samples, np.ones(len(uvs), dtype=bool)
    r = np.clip(np.floor(rows + 0.5).astype(np.int64), 0, map_.height - 1)
    c = np.clip(np.floor(cols + 0.5).astype(np.int64), 0, map_.width - 1)
    return samples, map_.valid[r, c]


def emboss(mesh: Mesh, displacement: RasterMap, scale: float) -> Tuple[Mesh, int]:
    """
    Move every vertex along its shape normal by scale * d(uv)

    Args:
        mesh: Base (usually subdivided) mesh
        displacement: Single-channel displacement map
        scale: Model units per displacement unit

    Returns:
        (embossed mesh, number of vertices whose UV landed on an invalid texel and
        were left in place)
    """
    if displacement.channels != 1:
        raise GeometryError(f"Displacement must be single-channel, got {displacement.channels}")
    if scale == 0.0:
        return mesh, 0

    normals = shape_normals(mesh)
    samples, valid = sample_bilinear(displacement, mesh.uvs)
    offsets = np.where(valid, samples[:, 0], 0.0)
    fallbacks = int((~valid).sum())
    if fallbacks:
        logger.warning(f"Emboss: {fallbacks} vertices sampled invalid texels; left unmoved")

    moved = mesh.vertices.copy()
    live = offsets != 0.0
    moved[live] = mesh.vertices[live] + (scale * offsets[live])[:, None] * normals[live]
    return mesh.with_vertices(moved), fallbacks
