"""
Metric Reports
Per-map PSNR reports, cross-rig consistency of de-lit albedos and the seam
diagnostic for stitched outputs.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import MetricError
from ..patches.grid import PatchGrid
from ..raster.maps import RasterMap
from .psnr import mse, psnr_from_mse

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricEntry:
    """PSNR of one map pair"""

    kind: str
    psnr_db: float
    texels: int


@dataclass
class MetricReport:
    """
    PSNR per map kind over mutually valid texels

    Attributes:
        entries: kind -> MetricEntry, in insertion order
        flags: Free-form run bookkeeping (fill counts, residuals)
    """

    entries: Dict[str, MetricEntry] = field(default_factory=dict)
    flags: Dict[str, Any] = field(default_factory=dict)

    def add(self, kind: str, a: RasterMap, b: RasterMap, mask: Optional[np.ndarray] = None) -> MetricEntry:
        value, texels = mse(a, b, mask)
        entry = MetricEntry(kind=kind, psnr_db=psnr_from_mse(value), texels=texels)
        self.entries[kind] = entry
        logger.debug(f"PSNR {kind}: {entry.psnr_db:.3f} dB over {texels} texels")
        return entry

    @classmethod
    def evaluate(
        cls,
        pairs: Dict[str, Tuple[RasterMap, RasterMap]],
        mask: Optional[np.ndarray] = None,
        flags: Optional[Dict[str, Any]] = None,
    ) -> "MetricReport":
        """Build a report from {kind: (estimate, reference)}"""
        report = cls(flags=dict(flags or {}))
        for kind, (a, b) in pairs.items():
            report.add(kind, a, b, mask)
        return report

    @property
    def min_psnr(self) -> float:
        if not self.entries:
            raise MetricError("Report has no entries")
        return min(e.psnr_db for e in self.entries.values())

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            kind: {"psnr_db": e.psnr_db, "texels": e.texels} for kind, e in self.entries.items()
        }
        if self.flags:
            data["flags"] = dict(self.flags)
        return data

    def to_frame(self) -> pd.DataFrame:
        """One row per map kind"""
        frame = pd.DataFrame(
            [{"psnr_db": e.psnr_db, "texels": e.texels} for e in self.entries.values()],
            index=list(self.entries),
        )
        frame.index.name = "map"
        return frame


# ==================== Consistency ====================


@dataclass(frozen=True)
class ConsistencyReport:
    """Pairwise PSNR between de-lit albedos of one asset under different rigs"""

    pairs: Tuple[Tuple[str, str, float, int], ...]

    @property
    def min_psnr(self) -> float:
        return min(p[2] for p in self.pairs)

    @property
    def mean_psnr(self) -> float:
        """Mean over finite pairs; +inf when every pair is identical"""
        finite = [p[2] for p in self.pairs if math.isfinite(p[2])]
        return float(np.mean(finite)) if finite else math.inf

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.pairs, columns=["a", "b", "psnr_db", "texels"])


def consistency_report(
    albedos: Union[Sequence[RasterMap], Dict[str, RasterMap]],
    mask: Optional[np.ndarray] = None,
) -> ConsistencyReport:
    """
    PSNR for every pair of albedos over their mutually valid texels

    Args:
        albedos: At least two maps, optionally keyed by rig name
        mask: Extra texel selection (for example unshadowed texels)
    """
    named = dict(albedos) if isinstance(albedos, dict) else {str(i): a for i, a in enumerate(albedos)}
    if len(named) < 2:
        raise MetricError("Consistency needs at least two albedos")
    pairs = []
    for (na, a), (nb, b) in itertools.combinations(named.items(), 2):
        value, texels = mse(a, b, mask)
        pairs.append((na, nb, psnr_from_mse(value), texels))
    report = ConsistencyReport(pairs=tuple(pairs))
    logger.info(f"Consistency over {len(pairs)} pair(s): min {report.min_psnr:.2f} dB")
    return report


# ==================== Seams ====================


@dataclass(frozen=True)
class SeamReport:
    """
    Largest neighbour difference across patch borders versus elsewhere

    A ratio well below 2 means borders are no rougher than the image itself.
    """

    border_max: float
    interior_max: float

    @property
    def ratio(self) -> float:
        if self.interior_max == 0.0:
            return 0.0 if self.border_max == 0.0 else math.inf
        return self.border_max / self.interior_max


def seam_metric(image: Union[RasterMap, np.ndarray], grid: PatchGrid, scale: int = 1) -> SeamReport:
    """
    Compare |difference| between neighbours straddling patch edges with all others

    Args:
        image: Stitched output, (H, W[, C])
        grid: Grid the output was stitched with
        scale: Output/input size ratio of the operator
    """
    data = image.data if isinstance(image, RasterMap) else np.asarray(image)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, :, None]
    if data.shape[:2] != (grid.source_h * scale, grid.source_w * scale):
        raise MetricError(f"Image {data.shape[:2]} does not match the grid at scale {scale}")

    dx = np.abs(np.diff(data, axis=1)).max(axis=2)  # dx[:, i] straddles columns i, i + 1
    dy = np.abs(np.diff(data, axis=0)).max(axis=2)
    border_x = np.zeros(dx.shape[1], dtype=bool)
    border_y = np.zeros(dy.shape[0], dtype=bool)
    for edge in grid.borders("x", scale):
        border_x[edge - 1] = True
    for edge in grid.borders("y", scale):
        border_y[edge - 1] = True

    border_values: List[float] = []
    interior_values: List[float] = []
    if dx.size:
        if border_x.any():
            border_values.append(float(dx[:, border_x].max()))
        if (~border_x).any():
            interior_values.append(float(dx[:, ~border_x].max()))
    if dy.size:
        if border_y.any():
            border_values.append(float(dy[border_y].max()))
        if (~border_y).any():
            interior_values.append(float(dy[~border_y].max()))
    return SeamReport(
        border_max=max(border_values, default=0.0), interior_max=max(interior_values, default=0.0)
    )
