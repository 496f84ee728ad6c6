"""
Reference Operators
Analytic stand-ins for the five translation maps. Each keeps its stage's channel
contract so the pipeline runs end to end without trained networks:

- zeta: Lanczos-3 super-resolution by the contract scale
- delta: exact inverse of the bake given its irradiance components
- psi: specular albedo lowered where the albedo luma has high-frequency detail
- rho: tangent normals tilted by the albedo luma gradient
- sigma: blurred shape normals plus a weak low-frequency luma term
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from ..color.colorspace import luma_array, srgb_decode, srgb_encode
from ..config import ReferenceOperatorParams
from ..errors import OperatorError
from ..geometry.mesh import Mesh
from ..raster.maps import ColorSpace, MapKind, RasterMap, stack
from ..raster.resample import remap_uv, resample_array
from ..shading.bake import BakeComponents, irradiance_components
from ..shading.lighting import LightingRig, ShadingParams
from .base import CONTRACTS, Origin, OperatorContract, TranslationOperator

logger = logging.getLogger(__name__)

GAUSS_TRUNCATE = 3.0
SR_SCALE = 8
SR_INPUT_SIZE = (576, 384)


# ==================== Filters ====================


def _gauss(data: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur over the two spatial axes only"""
    if sigma <= 0:
        return np.asarray(data, dtype=np.float64)
    data = np.asarray(data, dtype=np.float64)
    sigmas = (sigma, sigma) + (0,) * (data.ndim - 2)
    return ndimage.gaussian_filter(data, sigma=sigmas, mode="reflect", truncate=GAUSS_TRUNCATE)


def _gradient(g: np.ndarray):
    """(d/dx, d/dy) per texel with y pointing up the UV square (rows run down)"""
    if min(g.shape) < 2:
        return np.zeros_like(g), np.zeros_like(g)
    d_row, d_col = np.gradient(g)
    return d_col, -d_row


def _normalize(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(norms > 1e-12, v / np.maximum(norms, 1e-12), 0.0)


def _unsigned(data: np.ndarray) -> np.ndarray:
    return (np.asarray(data, dtype=np.float64) + 1.0) * 0.5


# ==================== Array kernels ====================


def psi_array(rgb_signed: np.ndarray, params: ReferenceOperatorParams) -> np.ndarray:
    """(h, w, 3) signed sRGB albedo -> (h, w, 1) signed specular albedo"""
    g = luma_array(_unsigned(rgb_signed))
    high = np.abs(g - _gauss(g, params.sigma_b))
    h = np.clip(high / params.highpass_scale, 0.0, 1.0)
    a_s = np.clip(params.s0 * (1.0 - params.kappa * h), 0.0, 1.0)
    return (2.0 * a_s - 1.0)[:, :, None]


def rho_array(data: np.ndarray, params: ReferenceOperatorParams) -> np.ndarray:
    """(h, w, [G, X, Y, Z]) signed gray + tangent normals -> (h, w, 3) specular normals"""
    g = _gauss(_unsigned(data[:, :, 0]), params.rho_sigma)
    gx, gy = _gradient(g)
    tilt = np.stack([-gx, -gy, np.zeros_like(gx)], axis=2)
    return _normalize(np.asarray(data[:, :, 1:4], dtype=np.float64) + params.beta * tilt)


def sigma_array(data: np.ndarray, params: ReferenceOperatorParams) -> np.ndarray:
    """(h, w, [G, X, Y, Z]) signed gray + object normals -> (h, w, 3) diffuse normals"""
    n = _normalize(_gauss(data[:, :, 1:4], params.sigma_d))
    g = _gauss(_unsigned(data[:, :, 0]), params.sigma_d)
    gx, gy = _gradient(g)

    # Frame from the object x (or y) axis projected onto the blurred tangent plane
    axis = np.zeros_like(n)
    near_x = np.abs(n[:, :, 0]) > 0.9
    axis[:, :, 0] = ~near_x
    axis[:, :, 1] = near_x
    t = _normalize(axis - np.sum(axis * n, axis=2, keepdims=True) * n)
    b = np.cross(n, t)
    detail = -gx[:, :, None] * t - gy[:, :, None] * b
    return _normalize(n + params.gamma * detail)


def zeta_array(rgb_signed: np.ndarray, scale: int = SR_SCALE) -> np.ndarray:
    h, w = rgb_signed.shape[:2]
    return np.clip(resample_array(rgb_signed, w * scale, h * scale), -1.0, 1.0)


# ==================== Operator classes ====================


class ReferenceOperator(TranslationOperator):
    """Pure reference backend; safe to call from several threads"""

    def __init__(self, contract: OperatorContract, params: Optional[ReferenceOperatorParams] = None):
        super().__init__(contract)
        self.params = params or ReferenceOperatorParams()


class ReferencePsi(ReferenceOperator):
    def __init__(self, params: Optional[ReferenceOperatorParams] = None):
        super().__init__(CONTRACTS["psi"], params)

    def apply_array(self, data: np.ndarray, origin: Origin = None) -> np.ndarray:
        return psi_array(data, self.params)


class ReferenceRho(ReferenceOperator):
    def __init__(self, params: Optional[ReferenceOperatorParams] = None):
        super().__init__(CONTRACTS["rho"], params)

    def apply_array(self, data: np.ndarray, origin: Origin = None) -> np.ndarray:
        return rho_array(data, self.params)


class ReferenceSigma(ReferenceOperator):
    def __init__(self, params: Optional[ReferenceOperatorParams] = None):
        super().__init__(CONTRACTS["sigma"], params)

    def apply_array(self, data: np.ndarray, origin: Origin = None) -> np.ndarray:
        return sigma_array(data, self.params)


class ReferenceZeta(ReferenceOperator):
    """Lanczos-3 upscaling; runs whole-image only"""

    tileable = False

    def __init__(self, params: Optional[ReferenceOperatorParams] = None, scale: int = SR_SCALE):
        if scale < 1:
            raise OperatorError(f"zeta scale must be >= 1, got {scale}")
        super().__init__(replace(CONTRACTS["zeta"], scale=scale), params)

    def apply_array(self, data: np.ndarray, origin: Origin = None) -> np.ndarray:
        return zeta_array(data, self.scale)


def reference_operator(name: str, params: Optional[ReferenceOperatorParams] = None) -> TranslationOperator:
    """Reference backend for a tileable stage (zeta, psi, rho, sigma)"""
    classes = {"zeta": ReferenceZeta, "psi": ReferencePsi, "rho": ReferenceRho, "sigma": ReferenceSigma}
    if name not in classes:
        raise OperatorError(
            f"No stand-alone reference operator for '{name}'; delta needs its lighting side channel"
        )
    return classes[name](params)


# ==================== Stage entry points ====================


def _run(op: TranslationOperator, maps, tiling: Optional[dict]) -> RasterMap:
    from ..patches.tiling import apply_tiled, apply_whole

    map_stack = stack(maps)
    if tiling is not None and op.tileable:
        return apply_tiled(op, map_stack, **tiling)
    return apply_whole(op, map_stack)


def sr_zeta(
    texture: RasterMap,
    any_size: bool = False,
    remap_size: Optional[tuple] = None,
    remap_table: Optional[np.ndarray] = None,
    operator: Optional[TranslationOperator] = None,
    tiling: Optional[dict] = None,
) -> RasterMap:
    """
    Super-resolve a texture by 8x

    Args:
        texture: 576x384 sRGB texture (any size when ``any_size``)
        remap_size: Optional (width, height) of the retopologized UV layout
        remap_table: Optional per-texel source UVs for the remap step
        operator: Backend; reference Lanczos when omitted
        tiling: apply_tiled keyword arguments (patch in input texels) for tileable backends

    Raises:
        OperatorError: wrong input size or channel layout
    """
    if texture.kind not in (MapKind.TEXTURE, MapKind.BAKED_TEXTURE):
        raise OperatorError(f"zeta expects a texture, got kind '{texture.kind.value}'")
    if not any_size and texture.resolution != SR_INPUT_SIZE:
        raise OperatorError(
            f"zeta expects a {SR_INPUT_SIZE[0]}x{SR_INPUT_SIZE[1]} texture, got "
            f"{texture.width}x{texture.height} (allow any size to override)"
        )
    op = operator or ReferenceZeta()
    out = _run(op, [texture.with_data(texture.data, kind=MapKind.TEXTURE)], tiling)
    if remap_size is not None:
        out = remap_uv(out, remap_size[0], remap_size[1], remap_table)
    logger.info(f"zeta: {texture.width}x{texture.height} -> {out.width}x{out.height}")
    return out


def spec_albedo_psi(
    albedo: RasterMap,
    params: Optional[ReferenceOperatorParams] = None,
    operator: Optional[TranslationOperator] = None,
    tiling: Optional[dict] = None,
) -> RasterMap:
    """A_S from the diffuse albedo; lower where pores and hair break up the luma"""
    if albedo.colorspace != ColorSpace.SRGB or albedo.channels != 3:
        raise OperatorError("psi expects a 3-channel sRGB diffuse albedo")
    return _run(operator or ReferencePsi(params), [albedo], tiling)


def spec_normals_rho(
    gray: RasterMap,
    tangent_normals: RasterMap,
    params: Optional[ReferenceOperatorParams] = None,
    operator: Optional[TranslationOperator] = None,
    tiling: Optional[dict] = None,
) -> RasterMap:
    """N_S in tangent space from the albedo luma and N_T"""
    if tangent_normals.kind != MapKind.NORMALS_TANGENT:
        raise OperatorError(f"rho expects tangent normals, got '{tangent_normals.kind.value}'")
    if gray.channels != 1:
        raise OperatorError(f"rho expects a 1-channel gray map, got {gray.channels} channels")
    return _run(operator or ReferenceRho(params), [gray, tangent_normals], tiling)


def diff_normals_sigma(
    gray: RasterMap,
    object_normals: RasterMap,
    params: Optional[ReferenceOperatorParams] = None,
    operator: Optional[TranslationOperator] = None,
    tiling: Optional[dict] = None,
) -> RasterMap:
    """N_D in object space from the albedo luma and N_O"""
    if object_normals.kind != MapKind.NORMALS_OBJECT:
        raise OperatorError(f"sigma expects object normals, got '{object_normals.kind.value}'")
    if gray.channels != 1:
        raise OperatorError(f"sigma expects a 1-channel gray map, got {gray.channels} channels")
    return _run(operator or ReferenceSigma(params), [gray, object_normals], tiling)


# ==================== De-lighting ====================


@dataclass(frozen=True)
class LightingSideChannel:
    """Known capture conditions handed to the reference de-lighter"""

    rig: LightingRig
    mesh: Mesh
    params: ShadingParams
    seed: int

    def components(self, width: int, height: int) -> BakeComponents:
        return irradiance_components(self.mesh, self.rig, self.params, self.seed, width, height)


@dataclass(frozen=True, eq=False)
class DelightResult:
    """
    De-lit albedo plus bookkeeping

    Attributes:
        albedo: sRGB diffuse albedo
        low_irradiance: (H, W) texels whose irradiance fell below epsilon
        filled: Covered texels copied from their nearest reliable neighbour
    """

    albedo: RasterMap
    low_irradiance: np.ndarray
    filled: int


def delight_reference(
    texture_hat: RasterMap, components: BakeComponents, epsilon: float = 0.02
) -> DelightResult:
    """
    Invert a bake: A_D = (srgb_decode(T) - S) / E

    Texels with min-channel irradiance below ``epsilon`` or a saturated texture
    sample cannot be inverted; they take the value of the nearest good texel.
    """
    if components.irradiance.resolution != texture_hat.resolution:
        raise OperatorError(
            f"Irradiance components are {components.irradiance.width}x{components.irradiance.height}, "
            f"texture is {texture_hat.width}x{texture_hat.height}"
        )
    encoded = texture_hat.data.astype(np.float64)
    radiance = srgb_decode(np.clip(encoded, 0.0, 1.0))
    e = components.irradiance.data.astype(np.float64)
    s = components.specular.data.astype(np.float64)

    covered = components.mask & texture_hat.validity()
    low = covered & (e.min(axis=2) < epsilon)
    saturated = covered & np.any(encoded >= 1.0 - 1e-6, axis=2)
    good = covered & ~low & ~saturated

    albedo = np.zeros_like(radiance)
    albedo[good] = np.clip((radiance[good] - s[good]) / e[good], 0.0, 1.0)

    fill = covered & ~good
    if fill.any():
        if good.any():
            _, (rows, cols) = ndimage.distance_transform_edt(~good, return_indices=True)
            albedo[fill] = albedo[rows[fill], cols[fill]]
        else:
            logger.warning("No texel received enough light to de-light; albedo left at zero")
        logger.warning(
            f"delta: filled {int(fill.sum())} texels ({int(low.sum())} low irradiance, "
            f"{int(saturated.sum())} saturated)"
        )

    data = srgb_encode(albedo)
    data[~covered] = 0.0
    out = RasterMap(
        data=data.astype(np.float32), colorspace=ColorSpace.SRGB, kind=MapKind.DIFFUSE_ALBEDO, valid=covered
    )
    return DelightResult(albedo=out, low_irradiance=low, filled=int(fill.sum()))


def delight_delta(
    texture_hat: RasterMap,
    conditioning: RasterMap,
    side_channel: Optional[Union[BakeComponents, LightingSideChannel]] = None,
    params: Optional[ReferenceOperatorParams] = None,
    operator: Optional[TranslationOperator] = None,
    tiling: Optional[dict] = None,
) -> DelightResult:
    """
    Extract the diffuse albedo from a super-resolved texture

    Args:
        texture_hat: sRGB texture with baked illumination
        conditioning: D_O (depth) or N_O (object normals) at the same resolution
        side_channel: Lighting the texture was captured under; required by the
            reference backend
        operator: External backend; tiled over [R, G, B, D] or [R, G, B, X, Y, Z]

    Raises:
        OperatorError: missing side channel, or mismatched inputs
    """
    params = params or ReferenceOperatorParams()
    if conditioning.resolution != texture_hat.resolution:
        raise OperatorError(
            f"delta inputs differ in resolution: {texture_hat.resolution} vs {conditioning.resolution}"
        )
    if conditioning.kind not in (MapKind.DEPTH, MapKind.NORMALS_OBJECT):
        raise OperatorError(f"delta conditioning must be depth or object normals, got '{conditioning.kind.value}'")
    if conditioning.colorspace != ColorSpace.SIGNED_UNIT:
        raise OperatorError("delta conditioning must be signed-unit")

    if operator is not None:
        out = _run(operator, [texture_hat, conditioning], tiling)
        return DelightResult(albedo=out, low_irradiance=np.zeros((out.height, out.width), dtype=bool), filled=0)

    if side_channel is None:
        raise OperatorError("Reference delta needs the lighting rig and mesh of the capture")
    components = side_channel
    if isinstance(side_channel, LightingSideChannel):
        components = side_channel.components(texture_hat.width, texture_hat.height)
    return delight_reference(texture_hat, components, params.epsilon)
