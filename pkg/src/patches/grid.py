"""
Patch Grid
Lattice planning, reflect-padded extraction and raised-cosine stitching for
overlapping square patches.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from ..errors import PatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatchGrid:
    """
    Patch bookkeeping for one source resolution

    Origins are expressed in padded coordinates and ordered row-major (y, then x).
    """

    patch: int
    stride: int
    source_w: int
    source_h: int
    pad_left: int
    pad_right: int
    pad_top: int
    pad_bottom: int
    origins: Tuple[Tuple[int, int], ...]

    @property
    def padded_w(self) -> int:
        return self.source_w + self.pad_left + self.pad_right

    @property
    def padded_h(self) -> int:
        return self.source_h + self.pad_top + self.pad_bottom

    @property
    def count(self) -> int:
        return len(self.origins)

    @property
    def shape(self) -> Tuple[int, int]:
        """(columns, rows) of the origin lattice"""
        xs = {x for x, _ in self.origins}
        ys = {y for _, y in self.origins}
        return len(xs), len(ys)

    @property
    def default_margin(self) -> int:
        return max((self.patch - self.stride) // 2, 0)

    def borders(self, axis: str = "x", scale: int = 1) -> List[int]:
        """Source-space coordinates where a patch edge falls strictly inside the image"""
        if axis == "x":
            starts, pad, size = {x for x, _ in self.origins}, self.pad_left, self.source_w
        else:
            starts, pad, size = {y for _, y in self.origins}, self.pad_top, self.source_h
        edges = set()
        for s in starts:
            for e in (s - pad, s + self.patch - pad):
                if 0 < e < size:
                    edges.add(e * scale)
        return sorted(edges)


def _axis_padding(size: int, patch: int, stride: int) -> Tuple[int, int, int]:
    if size <= patch:
        padded = patch
    else:
        padded = patch + math.ceil((size - patch) / stride) * stride
    total = padded - size
    before = total // 2
    return padded, before, total - before


def plan_grid(width: int, height: int, patch: int, stride: Optional[int] = None) -> PatchGrid:
    """
    Plan a patch lattice covering a width x height source

    Padding is the minimum that makes (padded - patch) a multiple of the stride,
    split between both sides. Reflection cannot exceed the source size minus one.

    Args:
        width, height: Source resolution
        patch: Square patch size
        stride: Lattice step; defaults to patch // 2

    Returns:
        PatchGrid with (padded - patch) / stride + 1 origins per axis
    """
    stride = stride if stride is not None else max(patch // 2, 1)
    if not patch >= stride >= 1:
        raise PatchError(f"Need patch >= stride >= 1, got patch={patch}, stride={stride}")
    if width < 1 or height < 1:
        raise PatchError(f"Invalid source resolution {width}x{height}")

    padded_w, left, right = _axis_padding(width, patch, stride)
    padded_h, top, bottom = _axis_padding(height, patch, stride)
    for size, pads, name in ((width, (left, right), "width"), (height, (top, bottom), "height")):
        if max(pads) > size - 1:
            raise PatchError(
                f"Source {name} {size} too small for patch {patch}: reflect padding of "
                f"{max(pads)} exceeds the cap of {size - 1}"
            )

    xs = range(0, padded_w - patch + 1, stride)
    ys = range(0, padded_h - patch + 1, stride)
    origins = tuple((x, y) for y in ys for x in xs)
    logger.debug(
        f"Grid {width}x{height} patch={patch} stride={stride}: "
        f"{len(xs)}x{len(ys)} origins, padded {padded_w}x{padded_h}"
    )
    return PatchGrid(
        patch=patch,
        stride=stride,
        source_w=width,
        source_h=height,
        pad_left=left,
        pad_right=right,
        pad_top=top,
        pad_bottom=bottom,
        origins=origins,
    )


def pad_source(data: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Reflect-pad an (H, W, C) array to the grid's padded size"""
    if data.shape[:2] != (grid.source_h, grid.source_w):
        raise PatchError(
            f"Source is {data.shape[1]}x{data.shape[0]}, grid expects "
            f"{grid.source_w}x{grid.source_h}"
        )
    widths = ((grid.pad_top, grid.pad_bottom), (grid.pad_left, grid.pad_right), (0, 0))
    if not any(sum(w) for w in widths):
        return data
    return np.pad(data, widths, mode="reflect")


def extract(data: np.ndarray, grid: PatchGrid) -> List[np.ndarray]:
    """
    Crop every patch of the padded source

    Args:
        data: (H, W, C) stack data at the grid's source resolution

    Returns:
        One (patch, patch, C) array per origin, in origin order
    """
    padded = pad_source(data, grid)
    p = grid.patch
    return [padded[y : y + p, x : x + p].copy() for x, y in grid.origins]


def window_1d(length: int, margin: int) -> np.ndarray:
    """Raised-cosine ramps of width ``margin`` at both ends of a flat window"""
    if margin < 0 or 2 * margin > length:
        raise PatchError(f"Blend margin {margin} must lie in [0, {length // 2}]")
    w = np.ones(length, dtype=np.float64)
    if margin:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(margin) + 0.5) / margin)
        w[:margin] = ramp
        w[length - margin :] = ramp[::-1]
    return w


def patch_window(patch: int, margin: int) -> np.ndarray:
    """Separable 2D blend window"""
    w = window_1d(patch, margin)
    return np.outer(w, w)


def stitch(
    patches: Iterable[np.ndarray],
    grid: PatchGrid,
    blend_margin: Optional[int] = None,
    scale: int = 1,
) -> np.ndarray:
    """
    Blend overlapping patches back into one image

    Weights come from the raised-cosine window and are normalized per texel, so
    they sum to one everywhere. Accumulation runs in origin order in float64.

    Args:
        patches: One (patch*scale, patch*scale, C) array per origin, in origin order
        grid: Grid the patches were extracted with
        blend_margin: Ramp width in source texels; defaults to (patch - stride) // 2
        scale: Output/input size ratio of the operator that produced the patches

    Returns:
        (source_h*scale, source_w*scale, C) float64 array with padding cropped off
    """
    margin = grid.default_margin if blend_margin is None else blend_margin
    size = grid.patch * scale
    window = patch_window(size, margin * scale)[:, :, None]

    accum: Optional[np.ndarray] = None
    weight = np.zeros((grid.padded_h * scale, grid.padded_w * scale, 1), dtype=np.float64)
    count = 0
    for (x, y), patch in zip(grid.origins, patches):
        patch = np.asarray(patch, dtype=np.float64)
        if patch.ndim == 2:
            patch = patch[:, :, None]
        if patch.shape[:2] != (size, size):
            raise PatchError(f"Patch at {(x, y)} is {patch.shape[:2]}, expected {(size, size)}")
        if accum is None:
            accum = np.zeros(weight.shape[:2] + (patch.shape[2],), dtype=np.float64)
        elif patch.shape[2] != accum.shape[2]:
            raise PatchError(f"Patch at {(x, y)} has {patch.shape[2]} channels, expected {accum.shape[2]}")
        sy, sx = y * scale, x * scale
        accum[sy : sy + size, sx : sx + size] += window * patch
        weight[sy : sy + size, sx : sx + size] += window
        count += 1

    if count != grid.count:
        raise PatchError(f"Got {count} patches for a grid of {grid.count}")
    assert np.all(weight > 0), "texel with zero blend weight"

    out = accum / weight
    top, left = grid.pad_top * scale, grid.pad_left * scale
    return out[top : top + grid.source_h * scale, left : left + grid.source_w * scale]


def blend_weights(grid: PatchGrid, blend_margin: Optional[int] = None) -> np.ndarray:
    """Normalized per-patch weights summed over the padded image (all ones by construction)"""
    margin = grid.default_margin if blend_margin is None else blend_margin
    window = patch_window(grid.patch, margin)
    total = np.zeros((grid.padded_h, grid.padded_w), dtype=np.float64)
    for x, y in grid.origins:
        total[y : y + grid.patch, x : x + grid.patch] += window
    normalized = np.zeros_like(total)
    for x, y in grid.origins:
        normalized[y : y + grid.patch, x : x + grid.patch] += (
            window / total[y : y + grid.patch, x : x + grid.patch]
        )
    return normalized