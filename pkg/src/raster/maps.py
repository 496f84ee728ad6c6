"""
Raster Data Model
UV-space maps and channel stacks shared by every pipeline stage.

Arrays are stored row-major as (height, width, channels) float32. Row 0 is the top
of the UV square: texel (col, row) samples u = (col + 0.5) / W, v = 1 - (row + 0.5) / H.
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import RasterError

logger = logging.getLogger(__name__)

NORMAL_TOLERANCE = 1e-3

_KEEP = object()


class ColorSpace(str, Enum):
    """Sample encoding of a map"""

    SRGB = "srgb"
    LINEAR = "linear"
    SIGNED_UNIT = "signed-unit"
    RAW = "raw"

    @property
    def code(self) -> int:
        """Integer code used by the float raster header"""
        return _COLORSPACE_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "ColorSpace":
        for space, value in _COLORSPACE_CODES.items():
            if value == code:
                return space
        raise RasterError(f"Unknown colorspace code {code}")


_COLORSPACE_CODES = {
    ColorSpace.SRGB: 0,
    ColorSpace.LINEAR: 1,
    ColorSpace.SIGNED_UNIT: 2,
    ColorSpace.RAW: 3,
}


class MapKind(str, Enum):
    """Semantic role of a map in the pipeline"""

    TEXTURE = "texture"
    DIFFUSE_ALBEDO = "diffuse-albedo"
    BAKED_TEXTURE = "baked-texture"
    SPECULAR_ALBEDO = "specular-albedo"
    NORMALS_OBJECT = "normals-object"
    NORMALS_TANGENT = "normals-tangent"
    NORMALS_DIFFUSE = "normals-diffuse"
    NORMALS_SPECULAR = "normals-specular"
    DEPTH = "depth"
    DISPLACEMENT = "displacement"
    GRAY = "gray"
    SHADING = "shading"

    @property
    def is_normals(self) -> bool:
        return self.value.startswith("normals-")


@dataclass(frozen=True)
class KindSpec:
    """Channel counts and file-boundary encoding for a map kind"""

    channels: Tuple[int, ...]
    default_space: ColorSpace
    layout: Tuple[str, ...]


# Layout names used when stacking; 1-channel specular albedo uses "S"
KIND_SPECS: Dict[MapKind, KindSpec] = {
    MapKind.TEXTURE: KindSpec((3,), ColorSpace.SRGB, ("R", "G", "B")),
    MapKind.DIFFUSE_ALBEDO: KindSpec((3,), ColorSpace.SRGB, ("R", "G", "B")),
    MapKind.BAKED_TEXTURE: KindSpec((3,), ColorSpace.SRGB, ("R", "G", "B")),
    MapKind.SPECULAR_ALBEDO: KindSpec((1, 3), ColorSpace.LINEAR, ("S",)),
    MapKind.NORMALS_OBJECT: KindSpec((3,), ColorSpace.SIGNED_UNIT, ("X", "Y", "Z")),
    MapKind.NORMALS_TANGENT: KindSpec((3,), ColorSpace.SIGNED_UNIT, ("X", "Y", "Z")),
    MapKind.NORMALS_DIFFUSE: KindSpec((3,), ColorSpace.SIGNED_UNIT, ("X", "Y", "Z")),
    MapKind.NORMALS_SPECULAR: KindSpec((3,), ColorSpace.SIGNED_UNIT, ("X", "Y", "Z")),
    MapKind.DEPTH: KindSpec((1,), ColorSpace.SIGNED_UNIT, ("D",)),
    MapKind.DISPLACEMENT: KindSpec((1,), ColorSpace.RAW, ("H",)),
    MapKind.GRAY: KindSpec((1,), ColorSpace.SRGB, ("G",)),
    MapKind.SHADING: KindSpec((3,), ColorSpace.RAW, ("R", "G", "B")),
}


def channel_names(kind: MapKind, channels: int) -> Tuple[str, ...]:
    """Layout names for a map of the given kind and channel count"""
    spec = KIND_SPECS[kind]
    if len(spec.layout) == channels:
        return spec.layout
    if channels == 3:
        return ("R", "G", "B")
    if channels == 4:
        return ("R", "G", "B", "A")
    return tuple(f"{spec.layout[0]}{i}" for i in range(channels))


@dataclass(frozen=True, eq=False)
class RasterMap:
    """
    A W x H x C floating-point UV-space raster with colorspace and kind tags

    The data array is made read-only on construction; every operation returns a new map.
    ``valid`` is an optional (H, W) boolean mask; None means every texel is valid.
    """

    data: np.ndarray
    colorspace: ColorSpace
    kind: MapKind
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise RasterError(f"Raster data must be (H, W, C), got shape {data.shape}")
        data = np.ascontiguousarray(data, dtype=np.float32)
        data = data.view()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "colorspace", ColorSpace(self.colorspace))
        object.__setattr__(self, "kind", MapKind(self.kind))

        if self.valid is not None:
            valid = np.asarray(self.valid, dtype=bool)
            if valid.shape != data.shape[:2]:
                raise RasterError(
                    f"Validity mask shape {valid.shape} does not match raster {data.shape[:2]}"
                )
            valid = valid.view()
            valid.flags.writeable = False
            object.__setattr__(self, "valid", valid)

        self._validate()

    # ==================== Invariants ====================

    def _validate(self):
        if self.channels not in (1, 3, 4):
            raise RasterError(f"Unsupported channel count {self.channels}")
        if self.width == 0 or self.height == 0:
            raise RasterError("Raster must have non-zero width and height")
        allowed = KIND_SPECS[self.kind].channels
        if self.channels not in allowed:
            raise RasterError(
                f"Kind '{self.kind.value}' expects {allowed} channels, got {self.channels}"
            )
        if not np.all(np.isfinite(self.data)):
            raise RasterError("Raster contains non-finite sample")

        if self.colorspace in (ColorSpace.SRGB, ColorSpace.LINEAR):
            lo, hi = 0.0, 1.0
        elif self.colorspace == ColorSpace.SIGNED_UNIT:
            lo, hi = -1.0, 1.0
        else:
            lo, hi = None, None
        if lo is not None:
            dmin, dmax = float(self.data.min()), float(self.data.max())
            if dmin < lo or dmax > hi:
                raise RasterError(
                    f"{self.colorspace.value} samples must lie in [{lo}, {hi}], "
                    f"got [{dmin:.6g}, {dmax:.6g}]"
                )

        if self.kind.is_normals:
            norms = np.linalg.norm(self.data.astype(np.float64), axis=2)
            if self.valid is not None:
                norms = norms[self.valid]
            if norms.size and np.max(np.abs(norms - 1.0)) > NORMAL_TOLERANCE:
                raise RasterError(
                    f"Normal map '{self.kind.value}' has non-unit texels "
                    f"(max deviation {np.max(np.abs(norms - 1.0)):.3e})"
                )

    # ==================== Properties ====================

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def resolution(self) -> Tuple[int, int]:
        """(width, height) in texels"""
        return self.width, self.height

    @property
    def layout(self) -> Tuple[str, ...]:
        return channel_names(self.kind, self.channels)

    def validity(self) -> np.ndarray:
        """Validity mask, materialized as all-True when the map carries none"""
        if self.valid is None:
            return np.ones((self.height, self.width), dtype=bool)
        return np.asarray(self.valid)

    def with_data(
        self,
        data: np.ndarray,
        colorspace: Optional[ColorSpace] = None,
        kind: Optional[MapKind] = None,
        valid: Any = _KEEP,
    ) -> "RasterMap":
        """Return a new map sharing this map's tags unless overridden"""
        return RasterMap(
            data=data,
            colorspace=colorspace or self.colorspace,
            kind=kind or self.kind,
            valid=self.valid if valid is _KEEP else valid,
        )

    def content_hash(self) -> str:
        """sha256 over the float raster header, payload and validity mask"""
        digest = hashlib.sha256()
        digest.update(self.kind.value.encode("utf8"))
        digest.update(
            struct.pack("<4sIIII", b"RMAP", self.width, self.height, self.channels,
                        self.colorspace.code)
        )
        digest.update(np.ascontiguousarray(self.data, dtype="<f4").tobytes())
        if self.valid is not None:
            digest.update(np.packbits(self.valid).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class MapStack:
    """Ordered channel-wise concatenation of equal-resolution maps"""

    layers: Tuple[RasterMap, ...]
    layout: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.layers:
            raise RasterError("A map stack needs at least one layer")
        width, height = self.layers[0].resolution
        for layer in self.layers[1:]:
            if layer.resolution != (width, height):
                raise RasterError(
                    f"Resolution mismatch in stack: {layer.resolution} vs {(width, height)}"
                )
        layout = self.layout or tuple(name for layer in self.layers for name in layer.layout)
        if len(layout) != sum(layer.channels for layer in self.layers):
            raise RasterError(
                f"Layout {layout} does not match total channel count "
                f"{sum(layer.channels for layer in self.layers)}"
            )
        object.__setattr__(self, "layout", tuple(layout))

    @property
    def width(self) -> int:
        return self.layers[0].width

    @property
    def height(self) -> int:
        return self.layers[0].height

    @property
    def channels(self) -> int:
        return len(self.layout)

    @property
    def data(self) -> np.ndarray:
        """(H, W, C) float32 concatenation of all layers"""
        return np.concatenate([layer.data for layer in self.layers], axis=2)

    @property
    def valid(self) -> np.ndarray:
        """Texels valid in every layer"""
        mask = np.ones((self.height, self.width), dtype=bool)
        for layer in self.layers:
            if layer.valid is not None:
                mask &= layer.valid
        return mask


def stack(maps: Sequence[RasterMap], layout: Optional[Sequence[str]] = None) -> MapStack:
    """
    Concatenate maps channel-wise

    Args:
        maps: Maps of identical resolution
        layout: Optional channel names; derived from map kinds when omitted

    Returns:
        MapStack recording the channel order
    """
    return MapStack(layers=tuple(maps), layout=tuple(layout) if layout else ())


def unstack(map_stack: MapStack) -> List[RasterMap]:
    """Return the original maps of a stack"""
    return list(map_stack.layers)


def signed_array(map_: RasterMap) -> np.ndarray:
    """Map samples expressed in [-1, 1] regardless of the map's encoding"""
    data = map_.data.astype(np.float64)
    if map_.colorspace in (ColorSpace.SRGB, ColorSpace.LINEAR):
        return 2.0 * data - 1.0
    return data


def normalize_signed(map_: RasterMap) -> RasterMap:
    """
    Affinely map a [0, 1] raster to [-1, 1]

    Args:
        map_: Map tagged srgb or linear

    Returns:
        Map tagged signed-unit with out = 2 * in - 1
    """
    if map_.colorspace == ColorSpace.SIGNED_UNIT:
        raise RasterError("Map is already signed-unit")
    if map_.colorspace not in (ColorSpace.SRGB, ColorSpace.LINEAR):
        raise RasterError(f"Cannot sign-normalize a '{map_.colorspace.value}' map")
    out = 2.0 * map_.data - np.float32(1.0)
    return map_.with_data(out, colorspace=ColorSpace.SIGNED_UNIT)


def denormalize_unsigned(
    map_: RasterMap, colorspace: ColorSpace = ColorSpace.SRGB
) -> RasterMap:
    """Inverse of normalize_signed: out = (in + 1) / 2 tagged with ``colorspace``"""
    if map_.colorspace != ColorSpace.SIGNED_UNIT:
        raise RasterError(f"Expected a signed-unit map, got '{map_.colorspace.value}'")
    out = (map_.data + np.float32(1.0)) / np.float32(2.0)
    return map_.with_data(np.clip(out, 0.0, 1.0), colorspace=colorspace)


def encode_unsigned(data: np.ndarray, colorspace: ColorSpace) -> np.ndarray:
    """Encode samples to [0, 1] for file boundaries (n / 2 + 0.5 for signed data)"""
    if colorspace == ColorSpace.SIGNED_UNIT:
        return np.clip(data * 0.5 + 0.5, 0.0, 1.0)
    if colorspace == ColorSpace.RAW:
        raise RasterError("Raw maps have no [0, 1] encoding; use the float raster format")
    return data
