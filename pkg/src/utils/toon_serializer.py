"""
TOON Serialization Utilities
Converts metric reports and manifests to Token-Oriented Object Notation (TOON),
a compact, human-readable encoding optimized for LLM input.

TOON provides a lossless representation of JSON data. It uses YAML-style
indentation for objects and CSV-like tabular format for uniform arrays, which
suits per-map metric rows well.

Sections with deeply nested, non-uniform structures (the resolved configuration
echoed into a manifest) are excluded because they produce larger output than
compact JSON. The full data remains available in the JSON files.

See: https://github.com/toon-format/spec
"""

import json
import logging
from typing import Any, Dict, Sequence

from toon import encode as toon_encode

from .serialization import clean_for_json

logger = logging.getLogger(__name__)

TOON_EXCLUDED_SECTIONS: Sequence[str] = ("config",)


def report_to_toon(
    data: Dict[str, Any],
    excluded_sections: Sequence[str] = TOON_EXCLUDED_SECTIONS,
) -> str:
    """
    Convert a report dictionary to a TOON string

    Pre-cleans the data (numpy values → Python, +inf → "inf") via clean_for_json,
    then encodes to TOON.

    Args:
        data: Report data dictionary (MetricReport.to_dict(), a manifest, ...)
        excluded_sections: Top-level keys to omit from the TOON output

    Returns:
        TOON-formatted string

    Raises:
        TypeError: If data cannot be serialized
    """
    cleaned = clean_for_json(data)

    # Round trip through json guarantees plain JSON types for the encoder
    json_safe = json.loads(json.dumps(cleaned, default=str))

    if excluded_sections and isinstance(json_safe, dict):
        excluded = set(excluded_sections)
        json_safe = {k: v for k, v in json_safe.items() if k not in excluded}

    return toon_encode(json_safe)
