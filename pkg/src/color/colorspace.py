"""
Color Science
sRGB transfer functions and the luma transform used to build grayscale conditioning.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ColorError
from ..raster.maps import ColorSpace, MapKind, RasterMap

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColorConstants:
    """Luma weights and sRGB transfer-curve parameters"""

    # Rec.709 primaries, the companion standard of sRGB
    luma_r: float = 0.2126
    luma_g: float = 0.7152
    luma_b: float = 0.0722

    srgb_threshold: float = 0.04045
    linear_threshold: float = 0.0031308
    linear_slope: float = 12.92
    offset: float = 0.055
    gamma: float = 2.4

    def __post_init__(self):
        weights = (self.luma_r, self.luma_g, self.luma_b)
        if min(weights) <= 0:
            raise ColorError(f"Luma weights must be positive, got {weights}")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ColorError(f"Luma weights must sum to 1, got {sum(weights):.12f}")

    @property
    def luma_weights(self) -> np.ndarray:
        return np.array([self.luma_r, self.luma_g, self.luma_b], dtype=np.float64)


REC709 = ColorConstants()


def srgb_decode(x: np.ndarray, constants: ColorConstants = REC709) -> np.ndarray:
    """sRGB-encoded values to linear light (piecewise EOTF)"""
    x = np.asarray(x, dtype=np.float64)
    c = constants
    return np.where(
        x <= c.srgb_threshold,
        x / c.linear_slope,
        np.power((np.maximum(x, c.srgb_threshold) + c.offset) / (1.0 + c.offset), c.gamma),
    )


def srgb_encode(x: np.ndarray, constants: ColorConstants = REC709) -> np.ndarray:
    """Linear light to sRGB-encoded values (piecewise OETF)"""
    x = np.asarray(x, dtype=np.float64)
    c = constants
    return np.where(
        x <= c.linear_threshold,
        x * c.linear_slope,
        (1.0 + c.offset) * np.power(np.maximum(x, c.linear_threshold), 1.0 / c.gamma) - c.offset,
    )


def srgb_to_linear(map_: RasterMap, constants: ColorConstants = REC709) -> RasterMap:
    """
    Decode an sRGB-tagged map to linear light

    Raises:
        ColorError: input is not tagged srgb
    """
    if map_.colorspace != ColorSpace.SRGB:
        raise ColorError(f"srgb_to_linear expects an srgb map, got '{map_.colorspace.value}'")
    out = np.clip(srgb_decode(map_.data, constants), 0.0, 1.0)
    return map_.with_data(out.astype(np.float32), colorspace=ColorSpace.LINEAR)


def linear_to_srgb(map_: RasterMap, constants: ColorConstants = REC709) -> RasterMap:
    """
    Encode a linear-tagged map to sRGB

    Raises:
        ColorError: input is not tagged linear
    """
    if map_.colorspace != ColorSpace.LINEAR:
        raise ColorError(f"linear_to_srgb expects a linear map, got '{map_.colorspace.value}'")
    out = np.clip(srgb_encode(map_.data, constants), 0.0, 1.0)
    return map_.with_data(out.astype(np.float32), colorspace=ColorSpace.SRGB)


def luma_array(rgb: np.ndarray, constants: ColorConstants = REC709) -> np.ndarray:
    """Weighted sum over the last axis of gamma-encoded RGB values"""
    return np.asarray(rgb, dtype=np.float64) @ constants.luma_weights


def luma_gray(map_: RasterMap, constants: ColorConstants = REC709) -> RasterMap:
    """
    Grayscale luma of an sRGB-encoded color map

    Computed on the encoded values (luma, not luminance), so the output stays
    sRGB-tagged.

    Args:
        map_: 3-channel srgb map

    Returns:
        1-channel map of kind gray
    """
    if map_.channels != 3:
        raise ColorError(f"luma_gray expects 3 channels, got {map_.channels}")
    if map_.colorspace != ColorSpace.SRGB:
        raise ColorError(f"luma_gray expects an srgb map, got '{map_.colorspace.value}'")
    gray = np.clip(luma_array(map_.data, constants), 0.0, 1.0)
    return map_.with_data(gray[:, :, None].astype(np.float32), kind=MapKind.GRAY)
