"""
Texture Baking
Bakes illumination into the UV layout from a fixed frontal viewpoint, and exposes
the irradiance components that let the bake be inverted exactly.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..color.colorspace import srgb_decode, srgb_encode
from ..errors import ShadingError
from ..geometry.conditioning import surface_raster
from ..geometry.mesh import Mesh
from ..raster.maps import ColorSpace, MapKind, RasterMap
from .lighting import LightingRig, ShadingParams
from .shader import shading_components
from .shadows import light_visibility

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BakeComponents:
    """
    Irradiance split of one bake

    Attributes:
        irradiance: E_diffuse, kind shading
        specular: S_specular, kind shading
        rig: The jittered rig the components were computed under
    """

    irradiance: RasterMap
    specular: RasterMap
    rig: LightingRig

    @property
    def mask(self) -> np.ndarray:
        return self.irradiance.validity()


def _components(
    mesh: Mesh, rig: LightingRig, params: ShadingParams, seed: int, width: int, height: int
) -> BakeComponents:
    if not rig.xi_compatible:
        logger.warning(f"Baking with {len(rig.point_lights)} point lights; simulation rigs use 3")
    jittered = rig.jittered(seed)
    surface = surface_raster(mesh, width, height)
    mask = surface.mask
    if not mask.any():
        raise ShadingError(f"Mesh covers no texel of a {width}x{height} UV raster")

    positions = surface.positions[mask]
    normals = surface.normals[mask]
    flat_index = np.flatnonzero(mask.ravel())
    visibility = light_visibility(mesh, jittered.point_lights, positions, normals, params)
    e, s = shading_components(
        positions,
        np.asarray(params.bake_view, dtype=np.float64),
        normals,
        normals,
        np.array([params.bake_specular_albedo]),
        jittered,
        params,
        seed,
        flat_index,
        visibility,
    )

    def to_map(values: np.ndarray) -> RasterMap:
        data = np.zeros((height, width, 3), dtype=np.float32)
        data[mask] = values
        return RasterMap(data=data, colorspace=ColorSpace.RAW, kind=MapKind.SHADING, valid=mask)

    logger.info(
        f"Baked components {width}x{height}: {int(mask.sum())} texels, "
        f"mean E {float(e.mean()):.4f}, mean S {float(s.mean()):.4f}"
    )
    return BakeComponents(irradiance=to_map(e), specular=to_map(s), rig=jittered)


def irradiance_components(
    mesh: Mesh,
    rig: LightingRig,
    params: ShadingParams,
    seed: int,
    width: int,
    height: int,
) -> BakeComponents:
    """
    E_diffuse and S_specular of the bake with the same rig, params and seed

    srgb_encode(A_D * E + S) reproduces bake_texture on covered texels.
    """
    return _components(mesh, rig, params, seed, width, height)


def compose_bake(albedo_linear: np.ndarray, components: BakeComponents) -> np.ndarray:
    """Linear radiance A_D * E + S clipped to [0, 1]"""
    return np.clip(
        albedo_linear * components.irradiance.data + components.specular.data, 0.0, 1.0
    )


def bake_texture(
    albedo: RasterMap,
    mesh: Mesh,
    rig: LightingRig,
    params: Optional[ShadingParams] = None,
    seed: int = 0,
) -> RasterMap:
    """
    Simulate a texture with baked illumination from a diffuse albedo

    Lights are jittered once per bake from ``seed``; A_S is the constant
    ``params.bake_specular_albedo`` and N_S equals the shape normal.

    Returns:
        srgb-tagged baked-texture map, valid on texels covered by the mesh
    """
    params = params or ShadingParams()
    if albedo.channels != 3:
        raise ShadingError(f"Albedo must have 3 channels, got {albedo.channels}")
    if albedo.colorspace == ColorSpace.SRGB:
        linear = srgb_decode(albedo.data.astype(np.float64))
    elif albedo.colorspace == ColorSpace.LINEAR:
        linear = albedo.data.astype(np.float64)
    else:
        raise ShadingError(f"Albedo must be srgb or linear, got '{albedo.colorspace.value}'")

    components = _components(mesh, rig, params, seed, albedo.width, albedo.height)
    mask = components.mask
    invalid = mask & ~albedo.validity()
    if invalid.any():
        raise ShadingError(f"texel invalid: {int(invalid.sum())} covered texels lack albedo")

    baked = srgb_encode(compose_bake(linear, components))
    baked[~mask] = 0.0
    return RasterMap(
        data=baked.astype(np.float32), colorspace=ColorSpace.SRGB, kind=MapKind.BAKED_TEXTURE, valid=mask
    )


def shadow_mask(
    mesh: Mesh,
    rig: LightingRig,
    width: int,
    height: int,
    params: Optional[ShadingParams] = None,
    seed: int = 0,
) -> np.ndarray:
    """
    (H, W) True on covered texels that face a light yet are occluded from it

    Uses the same jittered light positions as the bake with ``seed``.
    """
    params = params or ShadingParams()
    jittered = rig.jittered(seed)
    surface = surface_raster(mesh, width, height)
    mask = surface.mask
    out = np.zeros((height, width), dtype=bool)
    if not jittered.point_lights or not mask.any():
        return out
    positions = surface.positions[mask]
    normals = surface.normals[mask]
    forced = replace(params, shadows=True)
    visibility = light_visibility(mesh, jittered.point_lights, positions, normals, forced)
    facing = np.stack(
        [
            np.sum(normals * (np.asarray(light.position) - positions), axis=1) > 0
            for light in jittered.point_lights
        ],
        axis=1,
    )
    out[mask] = np.any(facing & (visibility < 0.5), axis=1)
    return out
