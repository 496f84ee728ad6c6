"""
Raster I/O
PNG (8/16-bit) and float raster (.rmap) readers and writers, plus the framed
raster encoding shared with external operator processes.

Float raster layout (little-endian):
    magic "RMAP", u32 width, u32 height, u32 channels, u32 colorspace code,
    followed by row-major float32 samples (rows top to bottom, channels interleaved).
"""

import logging
import struct
from pathlib import Path
from typing import BinaryIO, Optional, Tuple, Union

import cv2
import numpy as np

from ..errors import RasterError
from .maps import KIND_SPECS, ColorSpace, MapKind, RasterMap, encode_unsigned

logger = logging.getLogger(__name__)

RMAP_MAGIC = b"RMAP"
RMAP_HEADER = struct.Struct("<4sIIII")
FLOAT_SUFFIXES = (".rmap",)
MASK_SUFFIX = ".mask.png"

PathLike = Union[str, Path]


# ==================== Float raster framing ====================


def encode_frame(data: np.ndarray, colorspace: ColorSpace) -> bytes:
    """Serialize an (H, W, C) array as one float raster frame"""
    if data.ndim == 2:
        data = data[:, :, None]
    height, width, channels = data.shape
    header = RMAP_HEADER.pack(RMAP_MAGIC, width, height, channels, colorspace.code)
    return header + np.ascontiguousarray(data, dtype="<f4").tobytes()


def decode_header(header: bytes) -> Tuple[int, int, int, ColorSpace]:
    """Parse a float raster header into (width, height, channels, colorspace)"""
    if len(header) != RMAP_HEADER.size:
        raise RasterError(f"Truncated float raster header ({len(header)} bytes)")
    magic, width, height, channels, code = RMAP_HEADER.unpack(header)
    if magic != RMAP_MAGIC:
        raise RasterError(f"Bad float raster magic {magic!r}")
    return width, height, channels, ColorSpace.from_code(code)


def decode_frame(buffer: bytes) -> Tuple[np.ndarray, ColorSpace]:
    """Inverse of encode_frame; the buffer must hold exactly one frame"""
    width, height, channels, colorspace = decode_header(buffer[: RMAP_HEADER.size])
    expected = width * height * channels * 4
    payload = buffer[RMAP_HEADER.size :]
    if len(payload) != expected:
        raise RasterError(f"Float raster payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width, channels)
    return data.astype(np.float32), colorspace


def read_exact(stream: BinaryIO, size: int) -> bytes:
    """Read exactly ``size`` bytes; shorter results mean the stream ended"""
    chunks = []
    remaining = size
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream: BinaryIO) -> Tuple[np.ndarray, ColorSpace]:
    """Read one frame from a binary stream"""
    header = read_exact(stream, RMAP_HEADER.size)
    width, height, channels, colorspace = decode_header(header)
    expected = width * height * channels * 4
    payload = read_exact(stream, expected)
    if len(payload) != expected:
        raise RasterError(f"Truncated float raster payload ({len(payload)} of {expected} bytes)")
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width, channels)
    return data.astype(np.float32), colorspace


# ==================== Loading ====================


def load_raster(path: PathLike, expected_kind: Union[MapKind, str]) -> RasterMap:
    """
    Load a PNG or float raster as a RasterMap of the expected kind

    Integer PNG data is mapped to [0, 1] by v / (2^bits - 1). Signed kinds (normals,
    depth) are decoded from n / 2 + 0.5; normal texels that decode to a near-zero vector
    are marked invalid. An RGBA PNG's alpha channel becomes the validity mask.

    Args:
        path: .png or .rmap file
        expected_kind: Kind the caller will use the map as

    Returns:
        RasterMap satisfying all map invariants

    Raises:
        RasterError: unreadable file, incompatible channels, or non-finite samples
    """
    path = Path(path)
    kind = MapKind(expected_kind)
    if not path.exists():
        raise RasterError(f"Raster file not found: {path}")

    if path.suffix.lower() in FLOAT_SUFFIXES:
        data, colorspace = decode_frame(path.read_bytes())
        valid = _load_mask(path)
        if not np.all(np.isfinite(data)):
            raise RasterError(f"non-finite sample in {path}")
        _check_channels(kind, data.shape[2], path)
        return RasterMap(data=data, colorspace=colorspace, kind=kind, valid=valid)

    if path.suffix.lower() != ".png":
        raise RasterError(f"Unsupported raster format: {path.suffix}")

    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise RasterError(f"Unreadable image: {path}")
    if raw.dtype == np.uint8:
        bits = 8
    elif raw.dtype == np.uint16:
        bits = 16
    else:
        raise RasterError(f"Unsupported PNG sample type {raw.dtype} in {path}")

    if raw.ndim == 2:
        raw = raw[:, :, None]
    elif raw.shape[2] == 3:
        raw = raw[:, :, ::-1]
    elif raw.shape[2] == 4:
        raw = raw[:, :, [2, 1, 0, 3]]

    data = raw.astype(np.float32) / np.float32(2**bits - 1)
    valid = None
    spec = KIND_SPECS[kind]
    if data.shape[2] == 4 and 4 not in spec.channels:
        valid = data[:, :, 3] > 0
        data = data[:, :, :3]
    _check_channels(kind, data.shape[2], path)

    sidecar = _load_mask(path)
    if sidecar is not None:
        valid = sidecar if valid is None else (valid & sidecar)

    colorspace = spec.default_space
    if colorspace == ColorSpace.RAW:
        raise RasterError(f"Kind '{kind.value}' must be stored as a float raster, not PNG")
    if colorspace == ColorSpace.SIGNED_UNIT:
        data = np.clip(data * 2.0 - 1.0, -1.0, 1.0)
        if kind.is_normals:
            data, valid = _renormalize(data, valid)

    logger.debug(f"Loaded {bits}-bit PNG {path} as {kind.value} ({data.shape[1]}x{data.shape[0]})")
    return RasterMap(data=data, colorspace=colorspace, kind=kind, valid=valid)


def _check_channels(kind: MapKind, channels: int, path: Path):
    allowed = KIND_SPECS[kind].channels
    if channels not in allowed:
        raise RasterError(
            f"{path} has {channels} channels, incompatible with kind '{kind.value}' "
            f"(expects {allowed})"
        )


def _renormalize(data: np.ndarray, valid: Optional[np.ndarray]):
    """Re-project quantized normals to unit length; near-zero vectors become invalid"""
    norms = np.linalg.norm(data.astype(np.float64), axis=2)
    nonzero = norms > 0.5
    valid = nonzero if valid is None else (valid & nonzero)
    out = np.zeros_like(data)
    out[valid] = (data[valid] / norms[valid][:, None]).astype(np.float32)
    return out, valid


def _mask_path(path: Path) -> Path:
    return path.with_name(path.name + MASK_SUFFIX)


def _load_mask(path: Path) -> Optional[np.ndarray]:
    mask_path = _mask_path(path)
    if not mask_path.exists():
        return None
    mask = cv2.imread(str(mask_path), cv2.IMREAD_UNCHANGED)
    if mask is None:
        raise RasterError(f"Unreadable validity mask: {mask_path}")
    if mask.ndim == 3:
        mask = mask[:, :, 0]
    return mask > 0


# ==================== Saving ====================


def save_raster(map_: RasterMap, path: PathLike, bits: int = 16) -> Path:
    """
    Write a map as PNG (8/16-bit) or float raster, chosen by file suffix

    The validity mask is stored as the PNG alpha channel for 3-channel maps and as a
    ``<name>.mask.png`` sidecar otherwise.

    Args:
        map_: Map to write
        path: Destination (.png or .rmap)
        bits: PNG bit depth (8 or 16)

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    if path.suffix.lower() in FLOAT_SUFFIXES:
        path.write_bytes(encode_frame(map_.data, map_.colorspace))
        _save_mask(map_, path)
        return path

    if path.suffix.lower() != ".png":
        raise RasterError(f"Unsupported raster format: {path.suffix}")
    if bits not in (8, 16):
        raise RasterError(f"PNG bit depth must be 8 or 16, got {bits}")

    encoded = encode_unsigned(map_.data.astype(np.float64), map_.colorspace)
    scale = 2**bits - 1
    dtype = np.uint8 if bits == 8 else np.uint16
    quantized = np.round(encoded * scale).astype(dtype)

    if map_.channels == 3 and map_.valid is not None:
        alpha = (map_.valid.astype(dtype) * scale).astype(dtype)
        quantized = np.concatenate([quantized, alpha[:, :, None]], axis=2)
        _mask_path(path).unlink(missing_ok=True)
    else:
        _save_mask(map_, path)

    if quantized.shape[2] == 1:
        image = quantized[:, :, 0]
    elif quantized.shape[2] == 3:
        image = quantized[:, :, ::-1]
    else:
        image = quantized[:, :, [2, 1, 0, 3]]

    if not cv2.imwrite(str(path), np.ascontiguousarray(image)):
        raise RasterError(f"Failed to write PNG: {path}")
    return path


def _save_mask(map_: RasterMap, path: Path):
    """Write the validity sidecar, or remove a stale one when the map carries no mask"""
    if map_.valid is None:
        _mask_path(path).unlink(missing_ok=True)
        return
    mask = (map_.valid.astype(np.uint8) * 255).astype(np.uint8)
    if not cv2.imwrite(str(_mask_path(path)), mask):
        raise RasterError(f"Failed to write validity mask for {path}")
