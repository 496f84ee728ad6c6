"""
Shader
Point-light plus environment shading of surface samples. Every evaluation is split
into a diffuse irradiance E and a specular addend S so that radiance = A_D * E + S;
the bake, its analytic inverse and the renderer share this code path.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..errors import ShadingError
from ..raster.maps import NORMAL_TOLERANCE
from .brdf import specular_lobe
from .lighting import LightingRig, PointLight, ShadingParams
from .sampling import (
    BLOCK_SIZE,
    STREAM_ENVIRONMENT,
    block_uniforms,
    iter_blocks,
    stratified_cosine,
    to_world,
)

logger = logging.getLogger(__name__)

OcclusionQuery = Callable[[np.ndarray, PointLight], float]


@dataclass(frozen=True)
class SurfaceSample:
    """Reflectance at one surface point; albedo is linear RGB"""

    diffuse_albedo: Tuple[float, float, float]
    specular_albedo: float
    diffuse_normal: Tuple[float, float, float]
    specular_normal: Tuple[float, float, float]


def check_unit(normals: np.ndarray, name: str, tolerance: float = NORMAL_TOLERANCE):
    if normals.size == 0:
        return
    deviation = float(np.abs(np.linalg.norm(normals, axis=-1) - 1.0).max())
    if deviation > tolerance:
        raise ShadingError(f"non-unit {name} normal (|n| off by {deviation:.2e})")


def _as_rows(value: np.ndarray, count: int) -> np.ndarray:
    """(n,) or (1, n) broadcast to (count, n); (count, n) passes through"""
    arr = np.atleast_2d(np.asarray(value, dtype=np.float64))
    if arr.shape[0] == 1 and count != 1:
        arr = np.broadcast_to(arr, (count, arr.shape[1]))
    if arr.shape[0] != count:
        raise ShadingError(f"Expected {count} rows, got {arr.shape[0]}")
    return arr


def shading_components(
    positions: np.ndarray,
    view_dirs: np.ndarray,
    diffuse_normals: np.ndarray,
    specular_normals: np.ndarray,
    specular_albedo: np.ndarray,
    rig: LightingRig,
    params: ShadingParams,
    seed: int,
    flat_index: np.ndarray,
    visibility: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Diffuse irradiance and specular radiance for k surface samples

    Args:
        positions: (k, 3) object-space points
        view_dirs: (k, 3) or (3,) unit directions towards the viewer
        diffuse_normals, specular_normals: (k, 3) unit normals
        specular_albedo: (k, 1), (k, 3) or scalar A_S
        rig: Lights and environment
        params: Sample count, roughness and worker count
        seed: Environment sampling seed
        flat_index: (k,) raster index of each sample; keys the sampling stream
        visibility: Optional (k, n_lights) light visibility in [0, 1]

    Returns:
        (E, S) as (k, 3) float64 arrays; radiance is A_D * E + S
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    k = len(positions)
    n_d = np.asarray(diffuse_normals, dtype=np.float64).reshape(-1, 3)
    n_s = np.asarray(specular_normals, dtype=np.float64).reshape(-1, 3)
    check_unit(n_d, "diffuse")
    check_unit(n_s, "specular")
    view = _as_rows(view_dirs, k)
    a_s = _as_rows(np.atleast_1d(specular_albedo), k)
    flat_index = np.asarray(flat_index, dtype=np.int64).reshape(-1)
    if visibility is not None and visibility.shape != (k, len(rig.point_lights)):
        raise ShadingError(
            f"Visibility must be ({k}, {len(rig.point_lights)}), got {visibility.shape}"
        )

    irradiance = np.zeros((k, 3))
    specular = np.zeros((k, 3))
    alpha = params.brdf.roughness
    for i, light in enumerate(rig.point_lights):
        offset = np.asarray(light.position) - positions
        dist2 = np.maximum(np.sum(offset * offset, axis=1), 1e-12)
        l = offset / np.sqrt(dist2)[:, None]
        scale = (1.0 / dist2) if visibility is None else visibility[:, i] / dist2
        radiance = scale[:, None] * np.asarray(light.intensity)
        cos_d = np.maximum(np.sum(n_d * l, axis=1), 0.0)
        cos_s = np.maximum(np.sum(n_s * l, axis=1), 0.0)
        irradiance += radiance * (cos_d / np.pi)[:, None]
        lobe = specular_lobe(n_s, l, view, alpha) * cos_s
        specular += radiance * lobe[:, None]

    if rig.has_environment and k:
        env_e, env_s = _environment(positions, view, n_d, n_s, rig, params, seed, flat_index)
        irradiance += env_e
        specular += env_s

    return irradiance, a_s * specular


def _environment(
    positions: np.ndarray,
    view: np.ndarray,
    n_d: np.ndarray,
    n_s: np.ndarray,
    rig: LightingRig,
    params: ShadingParams,
    seed: int,
    flat_index: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Stratified cosine-weighted estimates of the environment terms"""
    strata = params.strata
    alpha = params.brdf.roughness

    def block(item):
        block_id, where = item
        uniforms = block_uniforms(
            seed, STREAM_ENVIRONMENT, block_id, flat_index[where] % BLOCK_SIZE, params.env_samples
        )
        local = stratified_cosine(uniforms, strata)
        dirs_d = to_world(local, n_d[where])
        e = rig.environment_radiance(dirs_d).mean(axis=1)
        dirs_s = to_world(local, n_s[where])
        lobe = specular_lobe(n_s[where][:, None, :], dirs_s, view[where][:, None, :], alpha)
        s = (np.pi * lobe[..., None] * rig.environment_radiance(dirs_s)).mean(axis=1)
        return where, e, s

    items = list(iter_blocks(flat_index))
    e_out = np.zeros((len(positions), 3))
    s_out = np.zeros((len(positions), 3))
    if params.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            results = list(pool.map(block, items))
    else:
        results = [block(item) for item in items]
    for where, e, s in results:
        e_out[where] = e
        s_out[where] = s
    return e_out, s_out


def shade(
    point,
    view_dir,
    sample: SurfaceSample,
    rig: LightingRig,
    params: Optional[ShadingParams] = None,
    occlusion: Optional[OcclusionQuery] = None,
    seed: int = 0,
    index: int = 0,
) -> np.ndarray:
    """
    Outgoing linear RGB radiance at one point

    Args:
        point: Object-space position
        view_dir: Unit direction towards the viewer
        sample: Reflectance at the point
        occlusion: Optional query returning light visibility in [0, 1]; 1 when omitted
        index: Sampling-stream index of the point

    Returns:
        (3,) radiance
    """
    params = params or ShadingParams()
    point = np.asarray(point, dtype=np.float64).reshape(1, 3)
    visibility = None
    if occlusion is not None:
        visibility = np.array([[float(occlusion(point[0], light)) for light in rig.point_lights]])
    e, s = shading_components(
        point,
        np.asarray(view_dir, dtype=np.float64).reshape(1, 3),
        np.asarray(sample.diffuse_normal).reshape(1, 3),
        np.asarray(sample.specular_normal).reshape(1, 3),
        np.array([[sample.specular_albedo]]),
        rig,
        params,
        seed,
        np.array([index]),
        visibility,
    )
    return np.asarray(sample.diffuse_albedo) * e[0] + s[0]
