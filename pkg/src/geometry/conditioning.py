"""
Geometry Conditioning
Rasterizes mesh attributes into UV space: object/tangent-space shape normals and
the normalized depth map D_O, plus the tangent frames that link the two spaces.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import GeometryError
from ..raster.maps import ColorSpace, MapKind, RasterMap
from .mesh import Mesh, shape_normals
from .rasterizer import Coverage, rasterize_uv

logger = logging.getLogger(__name__)

FRAME_TOLERANCE = 1e-4


@dataclass(frozen=True, eq=False)
class TangentFrame:
    """Per-vertex right-handed orthonormal (tangent, bitangent, normal) triples"""

    tangents: np.ndarray
    bitangents: np.ndarray
    normals: np.ndarray

    def check(self, tolerance: float = FRAME_TOLERANCE):
        """Raise if any triple is not orthonormal and right-handed"""
        t, b, n = self.tangents, self.bitangents, self.normals
        deviation = max(
            np.abs(np.linalg.norm(t, axis=1) - 1).max(),
            np.abs(np.linalg.norm(b, axis=1) - 1).max(),
            np.abs(np.linalg.norm(n, axis=1) - 1).max(),
            np.abs(np.sum(t * b, axis=1)).max(),
            np.abs(np.sum(t * n, axis=1)).max(),
            np.abs(np.sum(b * n, axis=1)).max(),
            np.abs(np.cross(t, b) - n).max(),
        )
        if deviation > tolerance:
            raise GeometryError(f"Tangent frames deviate from orthonormal by {deviation:.2e}")


def _normalize(v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(norms, 1e-300), norms[..., 0]


def orthonormalize(tangents: np.ndarray, normals: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gram-Schmidt a tangent field against unit normals

    Where the tangent is (nearly) parallel to the normal, an arbitrary perpendicular
    axis is used instead.

    Returns:
        (t, b, n) with b = n x t
    """
    n, _ = _normalize(normals)
    t = tangents - np.sum(tangents * n, axis=-1, keepdims=True) * n
    t, lengths = _normalize(t)
    bad = lengths < 1e-8
    if bad.any():
        axis = np.where(np.abs(n[bad][:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
        fallback = axis - np.sum(axis * n[bad], axis=-1, keepdims=True) * n[bad]
        t[bad], _ = _normalize(fallback)
    b = np.cross(n, t)
    return t, b, n


def tangent_frames(mesh: Mesh, normals: Optional[np.ndarray] = None) -> TangentFrame:
    """
    Per-vertex tangent frames from UV gradients

    Each triangle contributes T = (e1 dv2 - e2 dv1) / det, weighted by its area;
    the accumulated tangent is orthogonalized against the shape normal.
    """
    if normals is None:
        normals = shape_normals(mesh)
    p0, p1, p2 = mesh.corners()
    tri = mesh.triangles
    uv0, uv1, uv2 = mesh.uvs[tri[:, 0]], mesh.uvs[tri[:, 1]], mesh.uvs[tri[:, 2]]
    e1, e2 = p1 - p0, p2 - p0
    du1, dv1 = (uv1 - uv0).T
    du2, dv2 = (uv2 - uv0).T
    det = du1 * dv2 - du2 * dv1
    usable = np.abs(det) > 1e-14
    inv = np.where(usable, 1.0 / np.where(usable, det, 1.0), 0.0)
    per_tri, _ = _normalize((e1 * dv2[:, None] - e2 * dv1[:, None]) * inv[:, None])
    area = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
    per_tri *= (area * usable)[:, None]

    accum = np.zeros_like(mesh.vertices)
    for corner in range(3):
        np.add.at(accum, tri[:, corner], per_tri)
    t, b, n = orthonormalize(accum, normals)
    return TangentFrame(tangents=t, bitangents=b, normals=n)


def uv_coverage(mesh: Mesh, width: int, height: int) -> Coverage:
    if width <= 0 or height <= 0:
        raise GeometryError(f"Invalid raster resolution {width}x{height}")
    return rasterize_uv(mesh.triangles, mesh.uvs, width, height)


def interpolate_attribute(
    mesh: Mesh, attribute: np.ndarray, width: int, height: int, coverage: Optional[Coverage] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Barycentric interpolation of a per-vertex attribute; returns (H, W, D) float64 and mask"""
    coverage = coverage or uv_coverage(mesh, width, height)
    attribute = np.asarray(attribute, dtype=np.float64)
    if len(attribute) != mesh.n_vertices:
        raise GeometryError(
            f"Attribute has {len(attribute)} entries for {mesh.n_vertices} vertices"
        )
    return coverage.interpolate(mesh.triangles, attribute), coverage.mask


def rasterize_attribute(
    mesh: Mesh,
    attribute: np.ndarray,
    width: int,
    height: int,
    kind: MapKind = MapKind.GRAY,
    colorspace: Optional[ColorSpace] = None,
    coverage: Optional[Coverage] = None,
) -> RasterMap:
    """
    Rasterize a per-vertex 1- or 3-dimensional attribute into UV space

    Uncovered texels are zero and invalid. Normal-kind outputs are renormalized per
    texel.
    """
    attribute = np.asarray(attribute, dtype=np.float64)
    dims = 1 if attribute.ndim == 1 else attribute.shape[1]
    if dims not in (1, 3):
        raise GeometryError(f"Attribute dimension must be 1 or 3, got {dims}")
    data, mask = interpolate_attribute(mesh, attribute, width, height, coverage)
    if kind.is_normals:
        data, norms = _normalize(data)
        data[~mask] = 0.0
        mask = mask & (norms > 1e-12)
    if colorspace is None:
        colorspace = ColorSpace.SIGNED_UNIT if kind.is_normals else ColorSpace.RAW
    return RasterMap(data=data.astype(np.float32), colorspace=colorspace, kind=kind, valid=mask)


def depth_map(mesh: Mesh, width: int, height: int, coverage: Optional[Coverage] = None) -> RasterMap:
    """
    D_O: per-vertex Z mapped affinely to [-1, 1] over this mesh, then rasterized

    Raises:
        GeometryError: all vertices share one Z value
    """
    z = mesh.vertices[:, 2]
    zmin, zmax = float(z.min()), float(z.max())
    if zmax == zmin:
        raise GeometryError("degenerate depth range")
    depth = 2.0 * (z - zmin) / (zmax - zmin) - 1.0
    out = rasterize_attribute(
        mesh, depth, width, height, kind=MapKind.DEPTH, colorspace=ColorSpace.SIGNED_UNIT,
        coverage=coverage,
    )
    return out.with_data(np.clip(out.data, -1.0, 1.0))


def object_normal_map(mesh: Mesh, width: int, height: int, coverage: Optional[Coverage] = None) -> RasterMap:
    """N_O: shape normals rasterized into UV space"""
    return rasterize_attribute(
        mesh, shape_normals(mesh), width, height, kind=MapKind.NORMALS_OBJECT, coverage=coverage
    )


def frame_maps(
    mesh: Mesh, frames: TangentFrame, width: int, height: int, coverage: Optional[Coverage] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-texel (t, b, n) frames re-orthonormalized after interpolation, plus coverage mask"""
    coverage = coverage or uv_coverage(mesh, width, height)
    t = coverage.interpolate(mesh.triangles, frames.tangents)
    n = coverage.interpolate(mesh.triangles, frames.normals)
    mask = coverage.mask & (np.linalg.norm(n, axis=2) > 1e-12)
    t, b, n = orthonormalize(t, n)
    return t, b, n, mask


def _check_inputs(normal_map: RasterMap, mask: np.ndarray, expected: Tuple[MapKind, ...]):
    if not normal_map.kind.is_normals:
        raise GeometryError(f"Expected a normal map, got kind '{normal_map.kind.value}'")
    if normal_map.kind not in expected:
        raise GeometryError(
            f"Expected one of {[k.value for k in expected]}, got '{normal_map.kind.value}'"
        )
    missing = mask & ~normal_map.validity()
    if missing.any():
        raise GeometryError(f"invalid texel in input ({int(missing.sum())} covered texels)")


def object_to_tangent(
    normal_map: RasterMap,
    frames: TangentFrame,
    mesh: Mesh,
    coverage: Optional[Coverage] = None,
    kind: MapKind = MapKind.NORMALS_TANGENT,
) -> RasterMap:
    """
    Express an object-space normal map in the mesh's tangent frames

    n_t = [t . n, b . n, nrm . n] with frames interpolated into UV space at the map's
    resolution.
    """
    t, b, n, mask = frame_maps(mesh, frames, normal_map.width, normal_map.height, coverage)
    _check_inputs(normal_map, mask, (MapKind.NORMALS_OBJECT, MapKind.NORMALS_DIFFUSE))
    obj = normal_map.data.astype(np.float64)
    out = np.stack(
        [np.sum(t * obj, axis=2), np.sum(b * obj, axis=2), np.sum(n * obj, axis=2)], axis=2
    )
    out, _ = _normalize(out)
    out[~mask] = 0.0
    return RasterMap(data=out.astype(np.float32), colorspace=ColorSpace.SIGNED_UNIT, kind=kind, valid=mask)


def tangent_to_object(
    normal_map: RasterMap,
    frames: TangentFrame,
    mesh: Mesh,
    coverage: Optional[Coverage] = None,
    kind: MapKind = MapKind.NORMALS_OBJECT,
) -> RasterMap:
    """Inverse of object_to_tangent: n = x t + y b + z nrm"""
    t, b, n, mask = frame_maps(mesh, frames, normal_map.width, normal_map.height, coverage)
    _check_inputs(
        normal_map, mask,
        (MapKind.NORMALS_TANGENT, MapKind.NORMALS_SPECULAR, MapKind.NORMALS_DIFFUSE),
    )
    local = normal_map.data.astype(np.float64)
    out = local[:, :, 0:1] * t + local[:, :, 1:2] * b + local[:, :, 2:3] * n
    out, _ = _normalize(out)
    out[~mask] = 0.0
    return RasterMap(data=out.astype(np.float32), colorspace=ColorSpace.SIGNED_UNIT, kind=kind, valid=mask)


def tangent_normal_map(
    mesh: Mesh, width: int, height: int, coverage: Optional[Coverage] = None
) -> RasterMap:
    """N_T: shape normals expressed in their own tangent frames, (0, 0, 1) on covered texels"""
    coverage = coverage or uv_coverage(mesh, width, height)
    normals = shape_normals(mesh)
    frames = tangent_frames(mesh, normals)
    n_o = object_normal_map(mesh, width, height, coverage)
    return object_to_tangent(n_o, frames, mesh, coverage)


@dataclass(frozen=True, eq=False)
class SurfaceRaster:
    """World-space position and frame of every covered texel"""

    positions: np.ndarray
    tangents: np.ndarray
    bitangents: np.ndarray
    normals: np.ndarray
    mask: np.ndarray
    coverage: Coverage


def surface_raster(mesh: Mesh, width: int, height: int) -> SurfaceRaster:
    """Positions and interpolated shading frames for every texel of a UV raster"""
    coverage = uv_coverage(mesh, width, height)
    frames = tangent_frames(mesh)
    positions = coverage.interpolate(mesh.triangles, mesh.vertices)
    t, b, n, mask = frame_maps(mesh, frames, width, height, coverage)
    logger.debug(f"UV raster {width}x{height}: {int(mask.sum())} covered texels")
    return SurfaceRaster(
        positions=positions, tangents=t, bitangents=b, normals=n, mask=mask, coverage=coverage
    )
