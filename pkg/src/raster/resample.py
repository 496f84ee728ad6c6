"""
Resampling
Separable Lanczos-3 resizing, box downsampling and the optional UV remap step.
"""

import logging
from typing import Optional

import numpy as np
from scipy import ndimage

from ..errors import RasterError
from .maps import ColorSpace, RasterMap

logger = logging.getLogger(__name__)

LANCZOS_LOBES = 3


def _lanczos(x: np.ndarray, lobes: int = LANCZOS_LOBES) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.sinc(x) * np.sinc(x / lobes)
    out[np.abs(x) >= lobes] = 0.0
    return out


def lanczos_weights(size_in: int, size_out: int, lobes: int = LANCZOS_LOBES) -> np.ndarray:
    """
    Dense (size_out, size_in) resampling matrix with rows summing to one

    Output sample i is centred at input coordinate (i + 0.5) * size_in / size_out - 0.5.
    Taps falling outside the source are clamped to the border texel. When shrinking,
    the kernel is stretched by the reduction factor.
    """
    scale = size_in / size_out
    support = lobes * max(scale, 1.0)
    stretch = max(scale, 1.0)
    centres = (np.arange(size_out) + 0.5) * scale - 0.5
    first = np.floor(centres - support).astype(np.int64) + 1
    taps = int(np.ceil(2 * support)) + 1

    weights = np.zeros((size_out, size_in), dtype=np.float64)
    offsets = first[:, None] + np.arange(taps)[None, :]
    kernel = _lanczos((offsets - centres[:, None]) / stretch, lobes)
    clamped = np.clip(offsets, 0, size_in - 1)
    rows = np.repeat(np.arange(size_out), taps)
    np.add.at(weights, (rows, clamped.ravel()), kernel.ravel())
    weights /= weights.sum(axis=1, keepdims=True)
    return weights


def resample_array(data: np.ndarray, width: int, height: int) -> np.ndarray:
    """Lanczos-3 resize of an (H, W, C) array; returns float64"""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    wy = lanczos_weights(data.shape[0], height)
    wx = lanczos_weights(data.shape[1], width)
    out = np.einsum("yh,hwc->ywc", wy, data, optimize=True)
    return np.einsum("xw,ywc->yxc", wx, out, optimize=True)


def resample(map_: RasterMap, width: int, height: int) -> RasterMap:
    """
    Resize a map with separable Lanczos-3 filtering

    Bounded colorspaces are clamped back to their range after filtering (ringing);
    normal maps are re-normalized. The validity mask is resized nearest-neighbour.
    """
    if width <= 0 or height <= 0:
        raise RasterError(f"Invalid target resolution {width}x{height}")
    out = resample_array(map_.data, width, height)
    if map_.colorspace in (ColorSpace.SRGB, ColorSpace.LINEAR):
        out = np.clip(out, 0.0, 1.0)
    elif map_.colorspace == ColorSpace.SIGNED_UNIT:
        out = np.clip(out, -1.0, 1.0)

    valid = None
    if map_.valid is not None:
        rows = np.minimum((np.arange(height) + 0.5) * map_.height / height, map_.height - 1)
        cols = np.minimum((np.arange(width) + 0.5) * map_.width / width, map_.width - 1)
        valid = map_.valid[rows.astype(np.int64)][:, cols.astype(np.int64)]

    if map_.kind.is_normals:
        norms = np.linalg.norm(out, axis=2, keepdims=True)
        out = np.where(norms > 1e-12, out / np.maximum(norms, 1e-12), 0.0)
        live = norms[:, :, 0] > 1e-12
        valid = live if valid is None else valid & live
    return map_.with_data(out.astype(np.float32), valid=valid)


def box_downsample(map_: RasterMap, factor: int) -> RasterMap:
    """
    Average non-overlapping factor x factor blocks

    The map dimensions must be divisible by ``factor``. A block is valid when all of
    its texels are valid.
    """
    if factor < 1 or map_.width % factor or map_.height % factor:
        raise RasterError(
            f"Cannot box-downsample {map_.width}x{map_.height} by a factor of {factor}"
        )
    h, w, c = map_.height // factor, map_.width // factor, map_.channels
    blocks = map_.data.astype(np.float64).reshape(h, factor, w, factor, c)
    out = blocks.mean(axis=(1, 3))
    valid = None
    if map_.valid is not None:
        valid = map_.valid.reshape(h, factor, w, factor).all(axis=(1, 3))
    if map_.kind.is_normals:
        norms = np.linalg.norm(out, axis=2, keepdims=True)
        out = out / np.maximum(norms, 1e-12)
    return map_.with_data(out.astype(np.float32), valid=valid)


def remap_uv(
    map_: RasterMap,
    width: int,
    height: int,
    table: Optional[np.ndarray] = None,
) -> RasterMap:
    """
    Move a map onto a target UV layout

    Args:
        map_: Source map
        width, height: Target resolution
        table: Optional (height, width, 2) array of source (u, v) coordinates per target
            texel; NaN entries mark texels with no source. Without a table the step is
            plain Lanczos resampling.

    Returns:
        Map at the target resolution
    """
    if table is None:
        return resample(map_, width, height)

    table = np.asarray(table, dtype=np.float64)
    if table.shape != (height, width, 2):
        raise RasterError(f"UV remap table must be ({height}, {width}, 2), got {table.shape}")

    known = np.all(np.isfinite(table), axis=2)
    u = np.where(known, table[:, :, 0], 0.0)
    v = np.where(known, table[:, :, 1], 0.0)
    cols = u * map_.width - 0.5
    rows = (1.0 - v) * map_.height - 0.5
    coords = np.stack([rows.ravel(), cols.ravel()])

    source = map_.data.astype(np.float64)
    out = np.stack(
        [
            ndimage.map_coordinates(source[:, :, ch], coords, order=1, mode="nearest")
            for ch in range(map_.channels)
        ],
        axis=-1,
    ).reshape(height, width, map_.channels)
    out[~known] = 0.0

    valid = known
    if map_.valid is not None:
        sampled = ndimage.map_coordinates(
            map_.valid.astype(np.float64), coords, order=0, mode="nearest"
        ).reshape(height, width)
        valid = valid & (sampled > 0.5)
    if map_.kind.is_normals:
        norms = np.linalg.norm(out, axis=2, keepdims=True)
        out = np.where(norms > 1e-12, out / np.maximum(norms, 1e-12), 0.0)
        valid = valid & (norms[:, :, 0] > 1e-12)
    logger.info(f"Remapped {map_.kind.value} {map_.width}x{map_.height} -> {width}x{height}")
    return map_.with_data(out.astype(np.float32), valid=valid)
