"""Overlapping patch grids, seamless stitching and tiled operator inference"""

from .grid import PatchGrid, blend_weights, extract, pad_source, patch_window, plan_grid, stitch
from .tiling import apply_tiled, apply_whole, stack_array

__all__ = [
    "PatchGrid",
    "apply_tiled",
    "apply_whole",
    "blend_weights",
    "extract",
    "pad_source",
    "patch_window",
    "plan_grid",
    "stack_array",
    "stitch",
]
