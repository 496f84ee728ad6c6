"""Utility modules for JSON and TOON serialization of reports and manifests"""

from .serialization import clean_for_json, dataframe_to_records, to_json
from .toon_serializer import TOON_EXCLUDED_SECTIONS, report_to_toon

__all__ = [
    # Serialization utilities
    "clean_for_json",
    "dataframe_to_records",
    "to_json",
    # TOON serialization
    "TOON_EXCLUDED_SECTIONS",
    "report_to_toon",
]
