"""Color-space conversions and luma"""

from .colorspace import (
    REC709,
    ColorConstants,
    linear_to_srgb,
    luma_gray,
    srgb_decode,
    srgb_encode,
    srgb_to_linear,
)

__all__ = [
    "REC709",
    "ColorConstants",
    "linear_to_srgb",
    "luma_gray",
    "srgb_decode",
    "srgb_encode",
    "srgb_to_linear",
]
