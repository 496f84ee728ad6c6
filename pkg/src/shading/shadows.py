"""
Shadow Rays
Point-light visibility by casting a segment from every surface point to every light
and intersecting it with the mesh triangles (Moller-Trumbore).

Triangles are binned on a grid in the light's image plane. A segment that ends at
the light projects to a single point of that plane, so only the triangles whose
projected bounds cover that cell can block it.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..geometry.mesh import Mesh
from .lighting import Camera, PointLight, ShadingParams

logger = logging.getLogger(__name__)

FOV_MARGIN = 1.05
MAX_FOV = math.radians(170.0)
PAIR_BUDGET = 1 << 21
DET_EPS = 1e-20


@dataclass(frozen=True, eq=False)
class TriangleGrid:
    """
    Triangles bucketed by the light-space cells their projected bounds overlap

    Attributes:
        camera: Light-space camera spanning the mesh's bounding sphere
        offsets: (G*G + 1,) CSR offsets into ``triangles`` per cell
        triangles: Triangle indices sorted by cell
    """

    camera: Camera
    offsets: np.ndarray
    triangles: np.ndarray

    @property
    def size(self) -> int:
        return self.camera.height

    def cells(self, points: np.ndarray) -> np.ndarray:
        """Flat cell index per point, -1 outside the grid"""
        pix, z = self.camera.project(points)
        cols = np.floor(pix[:, 0]).astype(np.int64)
        rows = np.floor(pix[:, 1]).astype(np.int64)
        inside = (cols >= 0) & (cols < self.size) & (rows >= 0) & (rows < self.size) & (z > 0)
        return np.where(inside, rows * self.size + cols, -1)


def light_camera(mesh: Mesh, light: PointLight, size: int) -> Optional[Camera]:
    """Camera at the light looking at the mesh; None when the light is inside its bounding sphere"""
    centre, radius = mesh.bounding_sphere()
    position = np.asarray(light.position, dtype=np.float64)
    distance = float(np.linalg.norm(position - centre))
    if distance <= radius * (1.0 + 1e-6):
        return None
    fov = min(2.0 * math.asin(radius / distance) * FOV_MARGIN, MAX_FOV)
    forward = centre - position
    up = (0.0, 1.0, 0.0)
    if abs(forward[1]) > 0.99 * np.linalg.norm(forward):
        up = (1.0, 0.0, 0.0)
    return Camera(
        position=tuple(position), look_at=tuple(centre), up=up, vertical_fov=fov, width=size, height=size
    )


def build_triangle_grid(mesh: Mesh, camera: Camera) -> TriangleGrid:
    """Bucket every triangle by the cells its projected bounding box touches"""
    size = camera.height
    pix, _ = camera.project(mesh.vertices)
    corners = pix[mesh.triangles]
    lo = np.floor(corners.min(axis=1) - 1e-6).astype(np.int64)
    hi = np.floor(corners.max(axis=1) + 1e-6).astype(np.int64)
    lo = np.clip(lo, 0, size - 1)
    hi = np.clip(hi, 0, size - 1)
    span_c = hi[:, 0] - lo[:, 0] + 1
    span_r = hi[:, 1] - lo[:, 1] + 1
    counts = span_c * span_r

    tri = np.repeat(np.arange(len(corners)), counts)
    local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    cols = lo[tri, 0] + local % span_c[tri]
    rows = lo[tri, 1] + local // span_c[tri]
    cell = rows * size + cols

    order = np.argsort(cell, kind="stable")
    offsets = np.zeros(size * size + 1, dtype=np.int64)
    np.add.at(offsets, cell + 1, 1)
    np.cumsum(offsets, out=offsets)
    logger.debug(f"Shadow grid {size}x{size}: {len(corners)} triangles, {len(cell)} cell entries")
    return TriangleGrid(camera=camera, offsets=offsets, triangles=tri[order])


def segment_hits(
    origins: np.ndarray,
    targets: np.ndarray,
    v0: np.ndarray,
    v1: np.ndarray,
    v2: np.ndarray,
) -> np.ndarray:
    """
    Row-wise Moller-Trumbore test of segment origin->target against one triangle per row

    Returns:
        (k,) True where the open segment crosses the triangle
    """
    d = targets - origins
    e1 = v1 - v0
    e2 = v2 - v0
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > DET_EPS
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origins - v0
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = np.einsum("ij,ij->i", d, q) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    return ok & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 1e-9) & (t < 1.0 - 1e-9)


def _offset_origins(points: np.ndarray, normals: np.ndarray, target: np.ndarray, eps: float) -> np.ndarray:
    n = normals / np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-12)
    side = np.where(np.sum(n * (target - points), axis=1) < 0.0, -1.0, 1.0)
    return points + eps * side[:, None] * n


def _occluded(
    mesh: Mesh, origins: np.ndarray, target: np.ndarray, candidates, n_points: int
) -> np.ndarray:
    """OR of segment hits over (point, triangle) candidate pairs, processed in bounded chunks"""
    p0, p1, p2 = mesh.corners()
    blocked = np.zeros(n_points, dtype=bool)
    for point_idx, tri_idx in candidates:
        if len(point_idx) == 0:
            continue
        origin = origins[point_idx]
        hits = segment_hits(origin, np.broadcast_to(target, origin.shape), p0[tri_idx], p1[tri_idx], p2[tri_idx])
        blocked[point_idx[hits]] = True
    return blocked


def _grid_candidates(grid: TriangleGrid, cells: np.ndarray):
    rows = np.flatnonzero(cells >= 0)
    counts = np.zeros(len(cells), dtype=np.int64)
    counts[rows] = grid.offsets[cells[rows] + 1] - grid.offsets[cells[rows]]
    start = 0
    while start < len(cells):
        total = np.cumsum(counts[start:])
        stop = start + max(int(np.searchsorted(total, PAIR_BUDGET, side="right")), 1)
        chunk = np.arange(start, stop)
        c = counts[chunk]
        point_idx = np.repeat(chunk, c)
        first = np.repeat(grid.offsets[np.maximum(cells[chunk], 0)], c)
        local = np.arange(c.sum()) - np.repeat(np.cumsum(c) - c, c)
        yield point_idx, grid.triangles[first + local]
        start = stop


def _all_candidates(n_points: int, n_triangles: int):
    step = max(PAIR_BUDGET // max(n_triangles, 1), 1)
    for start in range(0, n_points, step):
        chunk = np.arange(start, min(start + step, n_points))
        yield np.repeat(chunk, n_triangles), np.tile(np.arange(n_triangles), len(chunk))


def ray_visibility(
    mesh: Mesh,
    light: PointLight,
    points: np.ndarray,
    normals: np.ndarray,
    grid_size: int = 256,
    epsilon: float = 1e-4,
) -> np.ndarray:
    """
    1.0 where the segment from a point to the light is free of triangles, else 0.0

    Origins move ``epsilon`` times the mesh's bounding radius along the normal, on the
    light's side.
    """
    points = np.asarray(points, dtype=np.float64)
    target = np.asarray(light.position, dtype=np.float64)
    _, radius = mesh.bounding_sphere()
    origins = _offset_origins(points, np.asarray(normals, dtype=np.float64), target, epsilon * radius)

    camera = light_camera(mesh, light, grid_size)
    if camera is None:
        logger.debug(f"Light at {light.position} is inside the mesh bounds; testing every triangle")
        candidates = _all_candidates(len(points), mesh.n_triangles)
    else:
        grid = build_triangle_grid(mesh, camera)
        candidates = _grid_candidates(grid, grid.cells(origins))
    blocked = _occluded(mesh, origins, target, candidates, len(points))
    return np.where(blocked, 0.0, 1.0)


def light_visibility(
    mesh: Mesh,
    lights,
    points: np.ndarray,
    normals: np.ndarray,
    params: ShadingParams,
) -> Optional[np.ndarray]:
    """
    (k, n_lights) visibility of points from each light, or None when shadows are off
    """
    if not params.shadows or not lights:
        return None
    columns: List[np.ndarray] = [
        ray_visibility(mesh, light, points, normals, params.shadow_grid, params.shadow_epsilon)
        for light in lights
    ]
    return np.stack(columns, axis=1)
