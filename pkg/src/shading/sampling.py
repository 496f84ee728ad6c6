"""
Counter-Based Sampling
Every random draw is keyed by (seed, stream, block) through Philox, so results do
not depend on evaluation order or worker count.
"""

import logging
from typing import Iterator, Tuple

import numpy as np

logger = logging.getLogger(__name__)

STREAM_LIGHT_JITTER = 1
STREAM_ENVIRONMENT = 2

# Flat raster indices are grouped in fixed blocks that share one generator
BLOCK_SIZE = 1024


def generator(seed: int, stream: int, block: int = 0) -> np.random.Generator:
    """Independent Philox generator for one (seed, stream, block) key"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, block])))


def iter_blocks(flat_indices: np.ndarray) -> Iterator[Tuple[int, np.ndarray]]:
    """
    Group positions of ``flat_indices`` by block

    Yields:
        (block id, positions into flat_indices belonging to that block), ascending block id
    """
    blocks = flat_indices // BLOCK_SIZE
    order = np.argsort(blocks, kind="stable")
    sorted_blocks = blocks[order]
    starts = np.flatnonzero(np.r_[True, sorted_blocks[1:] != sorted_blocks[:-1]])
    ends = np.r_[starts[1:], len(order)]
    for s, e in zip(starts, ends):
        yield int(sorted_blocks[s]), order[s:e]


def block_uniforms(seed: int, stream: int, block: int, offsets: np.ndarray, n_samples: int) -> np.ndarray:
    """
    Uniform pairs for selected texels of one block

    Args:
        offsets: Positions within the block (flat index % BLOCK_SIZE)

    Returns:
        (len(offsets), n_samples, 2) uniforms in [0, 1)
    """
    rng = generator(seed, stream, block)
    table = rng.random((BLOCK_SIZE, n_samples, 2))
    return table[offsets]


def stratified_cosine(uniforms: np.ndarray, strata: int) -> np.ndarray:
    """
    Cosine-weighted hemisphere directions around +Z, one per stratum

    Args:
        uniforms: (..., strata*strata, 2) jitter within each cell

    Returns:
        (..., strata*strata, 3) local unit directions
    """
    cells = np.arange(strata * strata)
    i = (cells // strata).astype(np.float64)
    j = (cells % strata).astype(np.float64)
    u1 = (i + uniforms[..., 0]) / strata
    u2 = (j + uniforms[..., 1]) / strata
    r = np.sqrt(u1)
    phi = 2.0 * np.pi * u2
    return np.stack([r * np.cos(phi), r * np.sin(phi), np.sqrt(np.maximum(1.0 - u1, 0.0))], axis=-1)


def local_frame(normals: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Arbitrary orthonormal tangent pair around each normal"""
    helper = np.where(np.abs(normals[..., :1]) < 0.9, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    t = np.cross(helper, normals)
    t /= np.linalg.norm(t, axis=-1, keepdims=True)
    return t, np.cross(normals, t)


def to_world(local: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Rotate (k, s, 3) local hemisphere directions into the frames of (k, 3) normals"""
    t, b = local_frame(normals)
    return (
        local[..., 0:1] * t[:, None, :]
        + local[..., 1:2] * b[:, None, :]
        + local[..., 2:3] * normals[:, None, :]
    )


