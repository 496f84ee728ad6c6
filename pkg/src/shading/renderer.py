"""
Renderer
Rasterizes a mesh through a pinhole camera and shades every covered pixel with a
ReflectanceSet.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from ..color.colorspace import srgb_decode, srgb_encode
from ..errors import ShadingError
from ..geometry.conditioning import orthonormalize, tangent_frames
from ..geometry.mesh import Mesh, sample_bilinear
from ..geometry.rasterizer import Coverage, rasterize
from ..raster.maps import ColorSpace
from .lighting import Camera, LightingRig, ReflectanceSet, ShadingParams
from .shader import shading_components
from .shadows import light_visibility

logger = logging.getLogger(__name__)

VIEW_AZIMUTHS: Dict[str, float] = {"frontal": 0.0, "left": -35.0, "right": 35.0}


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """k x m x 3 linear RGB image plus coverage mask"""

    radiance: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.radiance.ndim != 3 or self.radiance.shape[2] != 3:
            raise ShadingError(f"Image must be (k, m, 3), got {self.radiance.shape}")
        if self.mask.shape != self.radiance.shape[:2]:
            raise ShadingError("Mask and image sizes differ")
        if not np.all(np.isfinite(self.radiance)):
            raise ShadingError("Image contains non-finite samples")

    @property
    def height(self) -> int:
        return int(self.radiance.shape[0])

    @property
    def width(self) -> int:
        return int(self.radiance.shape[1])


@dataclass(frozen=True, eq=False)
class RenderResult:
    """
    Render output

    Attributes:
        image: Radiance and mask
        positions: (k, m, 3) object-space surface points, zero off the mask
        normals: (k, m, 3) interpolated shape normals, zero off the mask
        clipped: Triangles dropped because a vertex lay behind the near plane
    """

    image: ImageBuffer
    positions: np.ndarray
    normals: np.ndarray
    clipped: int


def _perspective_bary(coverage: Coverage, triangles: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Screen-space barycentrics converted to surface barycentrics"""
    mask = coverage.mask
    tri = triangles[coverage.triangle[mask]]
    w = coverage.bary[mask] / depth[tri]
    return w / w.sum(axis=1, keepdims=True)


def _interpolate(triangles: np.ndarray, tri_ids: np.ndarray, bary: np.ndarray, values: np.ndarray) -> np.ndarray:
    tri = triangles[tri_ids]
    v0, v1, v2 = values[tri[:, 0]], values[tri[:, 1]], values[tri[:, 2]]
    return v0 + bary[:, 1:2] * (v1 - v0) + bary[:, 2:3] * (v2 - v0)


def _unit(v: np.ndarray):
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return v / np.maximum(norms, 1e-12), norms[:, 0] > 1e-6


def render(
    mesh: Mesh,
    refl: ReflectanceSet,
    camera: Camera,
    rig: LightingRig,
    params: Optional[ShadingParams] = None,
    seed: int = 0,
) -> RenderResult:
    """
    Render a mesh with its reflectance maps

    Tangent-space normal maps are decoded through per-pixel tangent frames. Pixels
    whose UV lands on an invalid texel are left out of the mask.
    """
    params = params or ShadingParams()
    w, h = camera.width, camera.height
    points, z = camera.project(mesh.vertices)
    behind = np.any(z[mesh.triangles] <= camera.near, axis=1)
    clipped = int(behind.sum())
    if clipped:
        logger.warning(f"{clipped} triangles cross the camera near plane and were skipped")

    safe_z = np.where(z > camera.near, z, 1.0)
    coverage = rasterize(points, mesh.triangles, w, h, depth=-1.0 / safe_z, skip=behind)
    covered = coverage.mask
    radiance = np.zeros((h, w, 3), dtype=np.float64)
    positions_img = np.zeros((h, w, 3))
    normals_img = np.zeros((h, w, 3))
    if not covered.any():
        return RenderResult(ImageBuffer(radiance.astype(np.float32), covered), positions_img, normals_img, clipped)

    tri_ids = coverage.triangle[covered]
    bary = _perspective_bary(coverage, mesh.triangles, safe_z)
    frames = tangent_frames(mesh)
    positions = _interpolate(mesh.triangles, tri_ids, bary, mesh.vertices)
    uvs = np.clip(_interpolate(mesh.triangles, tri_ids, bary, mesh.uvs), 0.0, 1.0)
    t, b, n = orthonormalize(
        _interpolate(mesh.triangles, tri_ids, bary, frames.tangents),
        _interpolate(mesh.triangles, tri_ids, bary, frames.normals),
    )

    albedo, ok_a = sample_bilinear(refl.diffuse_albedo, uvs)
    if refl.diffuse_albedo.colorspace == ColorSpace.SRGB:
        albedo = srgb_decode(np.clip(albedo, 0.0, 1.0))
    spec_albedo, ok_s = sample_bilinear(refl.specular_albedo, uvs)
    nd_raw, ok_nd = sample_bilinear(refl.diffuse_normals, uvs)
    ns_raw, ok_ns = sample_bilinear(refl.specular_normals, uvs)
    if refl.diffuse_space == "tangent":
        nd_raw = nd_raw[:, 0:1] * t + nd_raw[:, 1:2] * b + nd_raw[:, 2:3] * n
    ns_raw = ns_raw[:, 0:1] * t + ns_raw[:, 1:2] * b + ns_raw[:, 2:3] * n
    n_d, ok_dn = _unit(nd_raw)
    n_s, ok_sn = _unit(ns_raw)
    valid = ok_a & ok_s & ok_nd & ok_ns & ok_dn & ok_sn

    view = np.asarray(camera.position) - positions
    view /= np.maximum(np.linalg.norm(view, axis=1, keepdims=True), 1e-12)
    flat_index = np.flatnonzero(covered.ravel())
    visibility = light_visibility(mesh, rig.point_lights, positions, n, params)
    e, s = shading_components(
        positions[valid], view[valid], n_d[valid], n_s[valid], spec_albedo[valid], rig, params, seed,
        flat_index[valid], None if visibility is None else visibility[valid],
    )

    pixels = np.zeros((len(positions), 3))
    pixels[valid] = albedo[valid] * e + s
    radiance[covered] = pixels
    positions_img[covered] = positions
    normals_img[covered] = n
    mask = covered.copy()
    mask[covered] = valid
    logger.debug(f"Rendered {w}x{h}: {int(mask.sum())} shaded pixels")
    return RenderResult(
        image=ImageBuffer(radiance.astype(np.float32), mask),
        positions=positions_img,
        normals=normals_img,
        clipped=clipped,
    )


def orbit_cameras(
    mesh: Mesh,
    width: int,
    height: int,
    views: Sequence[str] = ("frontal", "left", "right"),
    vertical_fov: float = math.radians(30.0),
) -> Dict[str, Camera]:
    """Cameras around the mesh that frame its bounding sphere"""
    centre, radius = mesh.bounding_sphere()
    distance = 1.15 * radius / math.sin(0.5 * vertical_fov)
    cameras = {}
    for name in views:
        if name not in VIEW_AZIMUTHS:
            raise ShadingError(f"Unknown view '{name}'; choose from {sorted(VIEW_AZIMUTHS)}")
        cameras[name] = Camera.orbit(
            centre, distance, azimuth_deg=VIEW_AZIMUTHS[name], vertical_fov=vertical_fov,
            width=width, height=height,
        )
    return cameras


def render_views(
    mesh: Mesh,
    refl: ReflectanceSet,
    rig: LightingRig,
    cameras: Dict[str, Camera],
    params: Optional[ShadingParams] = None,
    seed: int = 0,
) -> Dict[str, RenderResult]:
    """Render every named camera; views keep their input order"""
    results: Dict[str, RenderResult] = {}
    for name, camera in cameras.items():
        results[name] = render(mesh, refl, camera, rig, params, seed)
        logger.info(f"Rendered view '{name}' ({camera.width}x{camera.height})")
    return results


def to_display(image: ImageBuffer, exposure: float = 1.0) -> np.ndarray:
    """Clip and sRGB-encode radiance for saving; background stays black"""
    out = srgb_encode(np.clip(image.radiance * exposure, 0.0, 1.0))
    out[~image.mask] = 0.0
    return out.astype(np.float32)
