"""
Serialization Utilities
Provides consistent conversion of pipeline results to JSON with proper handling of:
- numpy scalars and arrays (→ Python numbers and lists)
- non-finite floats (+inf PSNR → "inf", NaN → None)
- DataFrames (→ list of records, index preserved)
- Paths and enums (→ strings)
"""

import json
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd


def dataframe_to_records(df: pd.DataFrame, preserve_index: bool = True) -> List[Dict[str, Any]]:
    """
    Convert DataFrame to list of records (dicts) with proper serialization

    Args:
        df: DataFrame to convert
        preserve_index: Whether to include a named or non-range index as a column

    Returns:
        List of dictionaries suitable for JSON serialization
    """
    if df.empty:
        return []

    if preserve_index and (df.index.name or not isinstance(df.index, pd.RangeIndex)):
        df_copy = df.reset_index()
    else:
        df_copy = df.copy()

    records: List[Dict[str, Any]] = df_copy.to_dict("records")  # type: ignore
    return [{str(k): clean_for_json(v) for k, v in record.items()} for record in records]


def _clean_float(value: float) -> Any:
    if math.isnan(value):
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def clean_for_json(data: Any) -> Any:
    """
    Recursively clean data structure for JSON serialization

    Args:
        data: Data to clean (dict, list, DataFrame, numpy values, dataclasses)

    Returns:
        JSON-serializable version of data
    """
    if isinstance(data, pd.DataFrame):
        return dataframe_to_records(data)
    elif isinstance(data, pd.Series):
        return [clean_for_json(v) for v in data.to_list()]
    elif isinstance(data, dict):
        return {str(k): clean_for_json(v) for k, v in data.items()}
    elif isinstance(data, (list, tuple)):
        return [clean_for_json(item) for item in data]
    elif isinstance(data, np.ndarray):
        return clean_for_json(data.tolist())
    elif isinstance(data, (bool, np.bool_)):
        return bool(data)
    elif isinstance(data, (int, np.integer)):
        return int(data)
    elif isinstance(data, (float, np.floating)):
        return _clean_float(float(data))
    elif isinstance(data, Enum):
        return data.value
    elif isinstance(data, Path):
        return data.as_posix()
    elif is_dataclass(data) and not isinstance(data, type):
        return clean_for_json(asdict(data))
    else:
        return data


def to_json(data: Any, indent: int = 2) -> str:
    """Deterministic JSON text (sorted keys) of cleaned data"""
    return json.dumps(clean_for_json(data), indent=indent, sort_keys=True)
