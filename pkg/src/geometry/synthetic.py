"""
Synthetic Assets
Procedural meshes and albedo textures standing in for fitted faces in tests,
simulation and demos.
"""

import logging
from typing import Sequence, Tuple

import numpy as np

from ..raster.maps import ColorSpace, MapKind, RasterMap
from .mesh import Mesh, subdivide

logger = logging.getLogger(__name__)

# sRGB-encoded base skin tone
SKIN_TONE = (0.78, 0.57, 0.47)

# (longitude, latitude, amplitude, width) in radians: nose, brows, cheeks, chin
FACE_FEATURES: Tuple[Tuple[float, float, float, float], ...] = (
    (0.0, -0.05, 0.18, 0.16),
    (-0.35, 0.35, 0.05, 0.18),
    (0.35, 0.35, 0.05, 0.18),
    (-0.55, -0.25, 0.04, 0.3),
    (0.55, -0.25, 0.04, 0.3),
    (0.0, -0.75, 0.06, 0.22),
)


def icosphere(levels: int = 2, radius: float = 1.0) -> Mesh:
    """
    Icosahedron subdivided ``levels`` times with vertices projected to the sphere

    UVs are the equirectangular projection of each vertex direction; the UV layout
    wraps at the back seam, so it is meant for geometry tests, not texturing.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    triangles = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    mesh = Mesh(vertices=vertices, triangles=triangles, uvs=_spherical_uvs(vertices), topology_id="icosphere")
    for _ in range(levels):
        mesh = subdivide(mesh, 1)
        projected = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
        mesh = Mesh(
            vertices=projected, triangles=mesh.triangles, uvs=_spherical_uvs(projected),
            topology_id="icosphere",
        )
    return mesh.with_vertices(mesh.vertices * radius)


def _spherical_uvs(directions: np.ndarray) -> np.ndarray:
    u = 0.5 + np.arctan2(directions[:, 0], directions[:, 2]) / (2.0 * np.pi)
    v = 0.5 + np.arcsin(np.clip(directions[:, 1], -1.0, 1.0)) / np.pi
    return np.clip(np.stack([u, v], axis=1), 0.0, 1.0)


def _lat_long_grid(
    rows: int, cols: int, lon_range: Tuple[float, float], lat_range: Tuple[float, float]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Regular (rows + 1) x (cols + 1) grid; UVs span the full square"""
    j, i = np.meshgrid(np.arange(cols + 1), np.arange(rows + 1))
    u = j.ravel() / cols
    v = i.ravel() / rows
    lon = lon_range[0] + u * (lon_range[1] - lon_range[0])
    lat = lat_range[0] + v * (lat_range[1] - lat_range[0])

    quads = []
    for r in range(rows):
        for c in range(cols):
            a = r * (cols + 1) + c
            b, d = a + 1, a + cols + 1
            quads.append([a, b, d + 1])
            quads.append([a, d + 1, d])
    return lon, lat, np.stack([u, v], axis=1), np.array(quads)


def _direction(lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
    """Longitude 0 faces +Z, latitude up is +Y"""
    return np.stack([np.cos(lat) * np.sin(lon), np.sin(lat), np.cos(lat) * np.cos(lon)], axis=1)


def uv_sphere(rows: int = 32, cols: int = 64, lat_limit_deg: float = 85.0, radius: float = 1.0) -> Mesh:
    """Latitude/longitude sphere over the full longitude range, poles trimmed at ``lat_limit_deg``"""
    limit = np.radians(lat_limit_deg)
    lon, lat, uvs, triangles = _lat_long_grid(rows, cols, (-np.pi, np.pi), (-limit, limit))
    return Mesh(vertices=radius * _direction(lon, lat), triangles=triangles, uvs=uvs, topology_id="uv-sphere")


def sphere_face(
    rows: int = 48,
    cols: int = 64,
    features: bool = True,
    lon_span_deg: float = 80.0,
    lat_span_deg: float = 70.0,
) -> Mesh:
    """
    Front hemisphere patch shaped like a face, parameterized over the whole UV square

    The surface faces +Z. With ``features`` the radius carries smooth bumps for the
    nose, brows, cheeks and chin.
    """
    lon_max, lat_max = np.radians(lon_span_deg), np.radians(lat_span_deg)
    lon, lat, uvs, triangles = _lat_long_grid(rows, cols, (-lon_max, lon_max), (-lat_max, lat_max))
    radius = np.ones_like(lon)
    if features:
        for f_lon, f_lat, amplitude, width in FACE_FEATURES:
            dist2 = (lon - f_lon) ** 2 + (lat - f_lat) ** 2
            radius += amplitude * np.exp(-dist2 / (2.0 * width**2))
    vertices = radius[:, None] * _direction(lon, lat) * np.array([0.85, 1.1, 1.0])
    return Mesh(vertices=vertices, triangles=triangles, uvs=uvs, topology_id="sphere-face")


def smooth_albedo(
    width: int,
    height: int,
    seed: int = 0,
    pores: bool = False,
    tone: Sequence[float] = SKIN_TONE,
) -> RasterMap:
    """
    Skin-like sRGB albedo with low-frequency tone variation and optional pores

    Variation uses a few random-phase sinusoids of at most two cycles across the
    map, so the texture survives down/up-sampling round trips. Pores are small dark
    Gaussian dots whose count scales with the map area.
    """
    rng = np.random.default_rng(seed)
    y, x = np.meshgrid(
        (np.arange(height) + 0.5) / height, (np.arange(width) + 0.5) / width, indexing="ij"
    )
    variation = np.zeros((height, width))
    for _ in range(4):
        fx, fy = rng.uniform(0.3, 2.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        variation += np.sin(2 * np.pi * (fx * x + fy * y) + phase)
    variation /= 4.0

    tint = np.array([0.06, 0.05, 0.04])
    data = np.asarray(tone, dtype=np.float64)[None, None, :] + variation[:, :, None] * tint

    if pores:
        count = max(1, width * height // 400)
        px = rng.uniform(0, width, size=count)
        py = rng.uniform(0, height, size=count)
        depth = rng.uniform(0.15, 0.35, size=count)
        rows, cols = np.mgrid[0:height, 0:width] + 0.5
        darkening = np.zeros((height, width))
        for cx, cy, d in zip(px, py, depth):
            r0, r1 = int(max(cy - 3, 0)), int(min(cy + 4, height))
            c0, c1 = int(max(cx - 3, 0)), int(min(cx + 4, width))
            dist2 = (cols[r0:r1, c0:c1] - cx) ** 2 + (rows[r0:r1, c0:c1] - cy) ** 2
            darkening[r0:r1, c0:c1] += d * np.exp(-dist2 / (2 * 0.8**2))
        data *= (1.0 - np.clip(darkening, 0.0, 0.6))[:, :, None]

    return RasterMap(
        data=np.clip(data, 0.0, 1.0).astype(np.float32),
        colorspace=ColorSpace.SRGB,
        kind=MapKind.DIFFUSE_ALBEDO,
    )


def checker_albedo(
    width: int,
    height: int,
    squares: int = 8,
    colors: Tuple[Sequence[float], Sequence[float]] = ((0.8, 0.6, 0.5), (0.45, 0.3, 0.25)),
) -> RasterMap:
    """Two-tone sRGB checkerboard with ``squares`` cells along the width"""
    cell = max(1, width // squares)
    rows, cols = np.mgrid[0:height, 0:width]
    parity = ((rows // cell + cols // cell) % 2).astype(bool)
    data = np.where(parity[:, :, None], np.asarray(colors[1]), np.asarray(colors[0]))
    return RasterMap(data=data.astype(np.float32), colorspace=ColorSpace.SRGB, kind=MapKind.DIFFUSE_ALBEDO)


def face_asset(width: int, height: int, seed: int = 0, pores: bool = True) -> Tuple[Mesh, RasterMap]:
    """Sphere-face mesh and matching skin albedo"""
    return sphere_face(), smooth_albedo(width, height, seed=seed, pores=pores)
