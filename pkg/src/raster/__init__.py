"""UV-space raster data model, I/O and resampling"""

from .io import (
    decode_frame,
    encode_frame,
    load_raster,
    read_exact,
    read_frame,
    save_raster,
)
from .maps import (
    ColorSpace,
    MapKind,
    MapStack,
    RasterMap,
    denormalize_unsigned,
    normalize_signed,
    signed_array,
    stack,
    unstack,
)
from .resample import box_downsample, remap_uv, resample

__all__ = [
    "ColorSpace",
    "MapKind",
    "MapStack",
    "RasterMap",
    "box_downsample",
    "decode_frame",
    "denormalize_unsigned",
    "encode_frame",
    "load_raster",
    "normalize_signed",
    "read_exact",
    "read_frame",
    "remap_uv",
    "resample",
    "save_raster",
    "signed_array",
    "stack",
    "unstack",
]
