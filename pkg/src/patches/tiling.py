"""
Tiled Inference
Runs a translation operator over a map stack patch by patch and stitches the
results, or over the whole image in one call.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np

from ..errors import OperatorError
from ..operators.base import TranslationOperator, decode_output
from ..raster.maps import MapStack, RasterMap, signed_array
from .grid import PatchGrid, extract, plan_grid, stitch

logger = logging.getLogger(__name__)


def stack_array(map_stack: MapStack) -> np.ndarray:
    """Signed (H, W, C) float64 view of every layer, in stack order"""
    return np.concatenate([signed_array(layer) for layer in map_stack.layers], axis=2)


def _upscale_mask(mask: np.ndarray, scale: int) -> np.ndarray:
    if scale == 1:
        return mask
    return np.repeat(np.repeat(mask, scale, axis=0), scale, axis=1)


def _run_patch(op: TranslationOperator, data: np.ndarray, origin: Tuple[int, int], size: int) -> np.ndarray:
    try:
        out = op.apply_array(data, origin)
    except OperatorError as e:
        if e.origin is not None:
            raise
        raise type(e)(str(e), origin) from e
    except Exception as e:
        raise OperatorError(f"Operator '{op.name}' failed: {e}", origin) from e

    out = np.asarray(out)
    if out.ndim == 2:
        out = out[:, :, None]
    expected = (size, size, len(op.output_layout))
    if out.shape != expected:
        raise OperatorError(
            f"Operator '{op.name}' returned shape {out.shape}, expected {expected}", origin
        )
    return out


def apply_tiled(
    op: TranslationOperator,
    map_stack: MapStack,
    patch: int = 1536,
    stride: Optional[int] = None,
    blend_margin: Optional[int] = None,
    workers: int = 1,
    grid: Optional[PatchGrid] = None,
) -> RasterMap:
    """
    Extract patches, run the operator on each and stitch the outputs

    Patches may run on several threads; outputs are collected in origin order and
    accumulated by ``stitch`` in that order, so the result does not depend on the
    worker count.

    Args:
        op: Operator whose input layout matches the stack
        map_stack: Input channels
        patch: Square patch size in input texels
        stride: Lattice step; defaults to patch // 2
        blend_margin: Raised-cosine ramp width in input texels
        workers: Thread count for patch dispatch
        grid: Precomputed grid; planned from the stack size when omitted

    Returns:
        Stitched output tagged with the operator contract

    Raises:
        OperatorError: the operator failed; ``origin`` names the failing patch
    """
    op.check_layout(map_stack.layout)
    if not op.tileable:
        raise OperatorError(f"Operator '{op.name}' ({op.backend}) does not support tiled inference")

    grid = grid or plan_grid(map_stack.width, map_stack.height, patch, stride)
    inputs = extract(stack_array(map_stack), grid)
    size = grid.patch * op.scale
    logger.info(
        f"Tiled '{op.name}' ({op.backend}): {grid.count} patches of {grid.patch} texels, "
        f"stride {grid.stride}, {workers} worker(s)"
    )

    def run(item):
        origin, data = item
        return _run_patch(op, data, origin, size)

    items = list(zip(grid.origins, inputs))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run, items))
    else:
        outputs = [run(item) for item in items]

    data = stitch(outputs, grid, blend_margin=blend_margin, scale=op.scale)
    return decode_output(op.contract, data, _upscale_mask(map_stack.valid, op.scale))


def apply_whole(op: TranslationOperator, map_stack: MapStack) -> RasterMap:
    """Run the operator once over the full stack (origin None)"""
    op.check_layout(map_stack.layout)
    data = stack_array(map_stack)
    expected = (map_stack.height * op.scale, map_stack.width * op.scale, len(op.output_layout))
    try:
        out = np.asarray(op.apply_array(data, None))
    except OperatorError:
        raise
    except Exception as e:
        raise OperatorError(f"Operator '{op.name}' failed: {e}") from e
    if out.ndim == 2:
        out = out[:, :, None]
    if out.shape != expected:
        raise OperatorError(f"Operator '{op.name}' returned shape {out.shape}, expected {expected}")
    logger.info(f"Whole-image '{op.name}' ({op.backend}) on {map_stack.width}x{map_stack.height}")
    return decode_output(op.contract, out, _upscale_mask(map_stack.valid, op.scale))
