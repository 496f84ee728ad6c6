"""
Translation Operators
The operator abstraction shared by the five translation stages (zeta, delta, psi,
rho, sigma) and the channel contracts each stage must honour.

Operators work on signed arrays: every input layer arrives as ``signed_array``
(2x - 1 for srgb/linear maps, unchanged otherwise) and outputs are returned in the
same signed domain. ``decode_output`` turns them back into tagged RasterMaps.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..errors import OperatorError
from ..raster.maps import ColorSpace, MapKind, RasterMap

logger = logging.getLogger(__name__)

Origin = Optional[Tuple[int, int]]

RGB = ("R", "G", "B")
XYZ = ("X", "Y", "Z")


@dataclass(frozen=True)
class OperatorContract:
    """Channel layouts and output tags of one translation stage"""

    name: str
    input_layout: Tuple[str, ...]
    output_layout: Tuple[str, ...]
    output_kind: MapKind
    output_space: ColorSpace
    scale: int = 1


CONTRACTS: Dict[str, OperatorContract] = {
    "zeta": OperatorContract("zeta", RGB, RGB, MapKind.TEXTURE, ColorSpace.SRGB, scale=8),
    "delta": OperatorContract(
        "delta", RGB + ("D",), RGB, MapKind.DIFFUSE_ALBEDO, ColorSpace.SRGB
    ),
    "delta-normals": OperatorContract(
        "delta-normals", RGB + XYZ, RGB, MapKind.DIFFUSE_ALBEDO, ColorSpace.SRGB
    ),
    "psi": OperatorContract("psi", RGB, ("S",), MapKind.SPECULAR_ALBEDO, ColorSpace.LINEAR),
    "rho": OperatorContract(
        "rho", ("G",) + XYZ, XYZ, MapKind.NORMALS_SPECULAR, ColorSpace.SIGNED_UNIT
    ),
    "sigma": OperatorContract(
        "sigma", ("G",) + XYZ, XYZ, MapKind.NORMALS_DIFFUSE, ColorSpace.SIGNED_UNIT
    ),
}


def contract_for(name: str) -> OperatorContract:
    try:
        return CONTRACTS[name]
    except KeyError:
        raise OperatorError(f"Unknown operator '{name}'; choose from {sorted(CONTRACTS)}") from None


class TranslationOperator(ABC):
    """
    One translation map behind a uniform interface

    Subclasses implement ``apply_array``. ``tileable`` operators may be run patch by
    patch; the others only see the whole image (origin None).
    """

    backend = "reference"
    deterministic = True
    tileable = True

    def __init__(self, contract: OperatorContract):
        self.contract = contract

    @property
    def name(self) -> str:
        return self.contract.name

    @property
    def input_layout(self) -> Tuple[str, ...]:
        return self.contract.input_layout

    @property
    def output_layout(self) -> Tuple[str, ...]:
        return self.contract.output_layout

    @property
    def scale(self) -> int:
        return self.contract.scale

    def check_layout(self, layout: Sequence[str]):
        """
        Raises:
            OperatorError: the stack layout differs from the contract
        """
        if tuple(layout) != self.input_layout:
            raise OperatorError(
                f"Operator '{self.name}' expects layout {list(self.input_layout)}, "
                f"got {list(layout)}"
            )

    @abstractmethod
    def apply_array(self, data: np.ndarray, origin: Origin = None) -> np.ndarray:
        """
        Map an (h, w, C_in) signed array to (h*scale, w*scale, C_out)

        Args:
            data: Input channels in the contract's input layout
            origin: Patch origin in padded coordinates, None for whole-image calls
        """

    def close(self):
        """Release backend resources"""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, backend={self.backend!r})"


def decode_output(
    contract: OperatorContract, data: np.ndarray, valid: Optional[np.ndarray] = None
) -> RasterMap:
    """
    Tag a signed operator output with the contract's kind and colorspace

    Normal outputs are renormalized; texels whose vector vanished (|n| < 1e-6)
    become invalid and are zeroed. srgb/linear outputs map back through
    clip((x + 1) / 2).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    if data.shape[2] != len(contract.output_layout):
        raise OperatorError(
            f"Operator '{contract.name}' produced {data.shape[2]} channels, "
            f"expected {len(contract.output_layout)}"
        )
    if not np.all(np.isfinite(data)):
        raise OperatorError(f"Operator '{contract.name}' produced non-finite samples")

    if contract.output_kind.is_normals:
        norms = np.linalg.norm(data, axis=2)
        live = norms > 1e-6
        data = np.where(live[:, :, None], data / np.maximum(norms, 1e-6)[:, :, None], 0.0)
        valid = live if valid is None else valid & live
        data[~valid] = 0.0
    elif contract.output_space in (ColorSpace.SRGB, ColorSpace.LINEAR):
        data = np.clip((data + 1.0) * 0.5, 0.0, 1.0)
    elif contract.output_space == ColorSpace.SIGNED_UNIT:
        data = np.clip(data, -1.0, 1.0)

    return RasterMap(
        data=data.astype(np.float32),
        colorspace=contract.output_space,
        kind=contract.output_kind,
        valid=valid,
    )
