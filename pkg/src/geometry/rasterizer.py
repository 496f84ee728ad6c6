"""
Triangle Rasterizer
Edge-function coverage over texel/pixel centres, shared by UV-space conditioning
and camera renders.

Continuous raster coordinates run x in [0, W] left to right and y in [0, H] top to
bottom; sample (col, row) sits at (col + 0.5, row + 0.5).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import GeometryError

logger = logging.getLogger(__name__)

# Shared-edge samples must be claimed by at least one triangle
EDGE_EPSILON = 1e-9


@dataclass(frozen=True, eq=False)
class Coverage:
    """
    Per-sample rasterization result

    Attributes:
        triangle: (H, W) int32 index of the covering triangle, -1 where uncovered
        bary: (H, W, 3) float64 barycentric weights of the covering triangle
    """

    triangle: np.ndarray
    bary: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        return self.triangle >= 0

    @property
    def height(self) -> int:
        return int(self.triangle.shape[0])

    @property
    def width(self) -> int:
        return int(self.triangle.shape[1])

    def interpolate(self, triangles: np.ndarray, values: np.ndarray) -> np.ndarray:
        """
        Interpolate per-vertex values over covered samples

        Evaluated as v0 + w1 (v1 - v0) + w2 (v2 - v0) so constant attributes are
        reproduced exactly. Uncovered samples are zero.

        Returns:
            (H, W, D) float64
        """
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        out = np.zeros((self.height, self.width, values.shape[1]), dtype=np.float64)
        mask = self.mask
        tri = triangles[self.triangle[mask]]
        w = self.bary[mask]
        v0, v1, v2 = values[tri[:, 0]], values[tri[:, 1]], values[tri[:, 2]]
        out[mask] = v0 + w[:, 1:2] * (v1 - v0) + w[:, 2:3] * (v2 - v0)
        return out


def edge_function(ax, ay, bx, by, px, py):
    """Twice the signed area of triangle (a, b, p)"""
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def rasterize(
    points: np.ndarray,
    triangles: np.ndarray,
    width: int,
    height: int,
    depth: Optional[np.ndarray] = None,
    skip: Optional[np.ndarray] = None,
) -> Coverage:
    """
    Rasterize 2D triangles onto a width x height sample grid

    Args:
        points: (n, 2) vertex positions in continuous raster coordinates
        triangles: (m, 3) vertex indices
        width, height: Grid size
        depth: Optional per-vertex depth; when given, the smallest interpolated
            depth wins at each sample. Without it the first covering triangle wins.
        skip: Optional (m,) boolean mask of triangles to ignore

    Returns:
        Coverage with triangle ids and barycentric weights
    """
    if width <= 0 or height <= 0:
        raise GeometryError(f"Invalid raster resolution {width}x{height}")

    points = np.asarray(points, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    tri_id = np.full((height, width), -1, dtype=np.int32)
    bary = np.zeros((height, width, 3), dtype=np.float64)
    zbuf = np.full((height, width), np.inf) if depth is not None else None

    corners = points[triangles]
    lo = np.floor(corners.min(axis=1) - 0.5).astype(np.int64)
    hi = np.ceil(corners.max(axis=1) - 0.5).astype(np.int64)

    for t in range(len(triangles)):
        if skip is not None and skip[t]:
            continue
        c0 = max(lo[t, 0], 0)
        c1 = min(hi[t, 0], width - 1)
        r0 = max(lo[t, 1], 0)
        r1 = min(hi[t, 1], height - 1)
        if c0 > c1 or r0 > r1:
            continue

        (ax, ay), (bx, by), (cx, cy) = corners[t]
        area = edge_function(ax, ay, bx, by, cx, cy)
        if abs(area) < 1e-14:
            continue

        px = np.arange(c0, c1 + 1, dtype=np.float64)[None, :] + 0.5
        py = np.arange(r0, r1 + 1, dtype=np.float64)[:, None] + 0.5
        w0 = edge_function(bx, by, cx, cy, px, py) / area
        w1 = edge_function(cx, cy, ax, ay, px, py) / area
        w2 = edge_function(ax, ay, bx, by, px, py) / area
        inside = (w0 >= -EDGE_EPSILON) & (w1 >= -EDGE_EPSILON) & (w2 >= -EDGE_EPSILON)
        if not inside.any():
            continue

        window = (slice(r0, r1 + 1), slice(c0, c1 + 1))
        if zbuf is None:
            claim = inside & (tri_id[window] < 0)
        else:
            d0, d1, d2 = depth[triangles[t]]
            z = d0 + w1 * (d1 - d0) + w2 * (d2 - d0)
            claim = inside & (z < zbuf[window])
            zbuf[window][claim] = z[claim]

        tri_id[window][claim] = t
        bary[window][claim] = np.stack([w0, w1, w2], axis=-1)[claim]

    return Coverage(triangle=tri_id, bary=bary)


def uv_points(uvs: np.ndarray, width: int, height: int) -> np.ndarray:
    """UV coordinates (V up) to continuous raster coordinates (rows down)"""
    uvs = np.asarray(uvs, dtype=np.float64)
    return np.stack([uvs[:, 0] * width, (1.0 - uvs[:, 1]) * height], axis=1)


def rasterize_uv(triangles: np.ndarray, uvs: np.ndarray, width: int, height: int) -> Coverage:
    """Rasterize a mesh's UV layout"""
    return rasterize(uv_points(uvs, width, height), triangles, width, height)


def overlapping_samples(triangles: np.ndarray, uvs: np.ndarray, width: int, height: int) -> int:
    """Count samples strictly inside more than one UV triangle"""
    points = uv_points(uvs, width, height)
    hits = np.zeros((height, width), dtype=np.int32)
    for tri in triangles:
        (ax, ay), (bx, by), (cx, cy) = points[tri]
        area = edge_function(ax, ay, bx, by, cx, cy)
        if abs(area) < 1e-14:
            continue
        c0 = max(int(np.floor(min(ax, bx, cx) - 0.5)), 0)
        c1 = min(int(np.ceil(max(ax, bx, cx) - 0.5)), width - 1)
        r0 = max(int(np.floor(min(ay, by, cy) - 0.5)), 0)
        r1 = min(int(np.ceil(max(ay, by, cy) - 0.5)), height - 1)
        if c0 > c1 or r0 > r1:
            continue
        px = np.arange(c0, c1 + 1, dtype=np.float64)[None, :] + 0.5
        py = np.arange(r0, r1 + 1, dtype=np.float64)[:, None] + 0.5
        strict = (
            (edge_function(bx, by, cx, cy, px, py) / area > 1e-6)
            & (edge_function(cx, cy, ax, ay, px, py) / area > 1e-6)
            & (edge_function(ax, ay, bx, by, px, py) / area > 1e-6)
        )
        hits[r0 : r1 + 1, c0 : c1 + 1] += strict
    return int((hits > 1).sum())
