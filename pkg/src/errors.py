"""
Error Types
Exception hierarchy shared by every stage of the reflectance pipeline
"""

from typing import Optional, Tuple


class PipelineError(Exception):
    """Base class for all pipeline errors"""


class RasterError(PipelineError):
    """Raster I/O failures and map invariant violations"""


class GeometryError(PipelineError):
    """Invalid meshes, degenerate geometry, rasterization failures"""


class ColorError(PipelineError):
    """Wrong colorspace tag or channel layout for a color conversion"""


class PatchError(PipelineError):
    """Patch grid planning, extraction or stitching failures"""


class ShadingError(PipelineError):
    """Invalid shading inputs (rigs, cameras, non-unit normals)"""


class OperatorError(PipelineError):
    """
    Failure inside a translation operator

    Carries the origin of the patch being processed when the operator ran tiled.
    """

    def __init__(self, message: str, origin: Optional[Tuple[int, int]] = None):
        self.origin = origin
        if origin is not None:
            message = f"{message} (patch origin x={origin[0]}, y={origin[1]})"
        super().__init__(message)


class ProtocolError(OperatorError):
    """External operator violated the framed raster wire protocol"""


class IntegrationError(PipelineError):
    """Normal integration did not reach the requested residual"""

    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")


class MetricError(PipelineError):
    """Invalid metric inputs (empty masks, mismatched maps)"""


class ConfigError(PipelineError):
    """Invalid or incomplete pipeline configuration"""


class StageError(PipelineError):
    """A pipeline stage failed; records where the last good artifact lives"""

    def __init__(self, stage: str, cause: Exception, last_good: Optional[str] = None):
        self.stage = stage
        self.cause = cause
        self.last_good = last_good
        where = f"; last good output: {last_good}" if last_good else ""
        super().__init__(f"Stage '{stage}' failed: {cause}{where}")
