"""
PSNR
Masked mean squared error and peak signal-to-noise ratio over unit-range maps.
Normal maps are compared in their [0, 1] encoding (n / 2 + 0.5).
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import MetricError
from ..raster.maps import ColorSpace, RasterMap, encode_unsigned

logger = logging.getLogger(__name__)

PEAK = 1.0
PSNR_INF = math.inf

MapOrArray = Union[RasterMap, np.ndarray]


def unit_range(map_: RasterMap) -> np.ndarray:
    """Map samples as float64 in [0, 1]"""
    if map_.colorspace == ColorSpace.RAW:
        raise MetricError(f"Raw map '{map_.kind.value}' has no unit-range encoding for PSNR")
    return encode_unsigned(map_.data.astype(np.float64), map_.colorspace)


def _prepare(a: MapOrArray, b: MapOrArray, mask: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(a, RasterMap) and isinstance(b, RasterMap):
        if a.colorspace != b.colorspace:
            raise MetricError(
                f"Cannot compare '{a.colorspace.value}' with '{b.colorspace.value}' samples"
            )
        common = a.validity() & b.validity()
        a_data, b_data = unit_range(a), unit_range(b)
    else:
        a_data = unit_range(a) if isinstance(a, RasterMap) else np.asarray(a, dtype=np.float64)
        b_data = unit_range(b) if isinstance(b, RasterMap) else np.asarray(b, dtype=np.float64)
        common = None

    if a_data.ndim == 2:
        a_data = a_data[:, :, None]
    if b_data.ndim == 2:
        b_data = b_data[:, :, None]
    if a_data.shape != b_data.shape:
        raise MetricError(f"Shape mismatch: {a_data.shape} vs {b_data.shape}")

    selected = np.ones(a_data.shape[:2], dtype=bool) if common is None else common
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a_data.shape[:2]:
            raise MetricError(f"Mask shape {mask.shape} does not match {a_data.shape[:2]}")
        selected = selected & mask
    if not selected.any():
        raise MetricError("empty mask: no mutually valid texels to compare")
    return a_data, b_data, selected


def mse(a: MapOrArray, b: MapOrArray, mask: Optional[np.ndarray] = None) -> Tuple[float, int]:
    """
    Mean squared error over selected texels and all channels

    Returns:
        (mse, texel count)
    """
    a_data, b_data, selected = _prepare(a, b, mask)
    diff = a_data[selected] - b_data[selected]
    return float(np.mean(diff * diff)), int(selected.sum())


def psnr_from_mse(value: float, peak: float = PEAK) -> float:
    if value == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(peak * peak / value)


def psnr(a: MapOrArray, b: MapOrArray, mask: Optional[np.ndarray] = None) -> float:
    """
    10 log10(1 / MSE) in dB with a peak of 1.0

    Maps are compared over mutually valid texels (intersected with ``mask``).
    Identical inputs return +inf.

    Raises:
        MetricError: shape or colorspace mismatch, empty selection
    """
    value, _ = mse(a, b, mask)
    return psnr_from_mse(value)
