"""PSNR evaluation, consistency and seam diagnostics"""

from .formatters import FORMATS, format_markdown, format_report, format_table
from .psnr import PSNR_INF, mse, psnr, psnr_from_mse, unit_range
from .report import (
    ConsistencyReport,
    MetricEntry,
    MetricReport,
    SeamReport,
    consistency_report,
    seam_metric,
)

__all__ = [
    "FORMATS",
    "PSNR_INF",
    "ConsistencyReport",
    "MetricEntry",
    "MetricReport",
    "SeamReport",
    "consistency_report",
    "format_markdown",
    "format_report",
    "format_table",
    "mse",
    "psnr",
    "psnr_from_mse",
    "seam_metric",
    "unit_range",
]
