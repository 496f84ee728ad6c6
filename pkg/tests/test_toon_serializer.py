"""
Tests for TOON serialization of metric reports and run manifests.

Validates that report data can be losslessly converted to TOON format
and round-tripped back to equivalent Python data structures.

The config section is excluded from TOON output by default because the
resolved configuration is deeply nested and larger in TOON than compact JSON.
"""

import json
import math

import numpy as np
import pytest
from toon import DecodeOptions
from toon import decode as toon_decode

from src.utils.toon_serializer import TOON_EXCLUDED_SECTIONS, report_to_toon


def _sample_manifest() -> dict:
    """A manifest-shaped dictionary as written by a pipeline run."""
    return {
        "seed": 7,
        "profile": "desk",
        "outputs": [
            {"name": "albedo", "file": "albedo.png", "sha256": "ab" * 32},
            {"name": "specular_albedo", "file": "specular_albedo.png", "sha256": "cd" * 32},
            {"name": "normals_diffuse", "file": "normals_diffuse.png", "sha256": "ef" * 32},
        ],
        "metrics": {
            "albedo": {"psnr_db": 41.25, "texels": 13824},
            "specular_albedo": {"psnr_db": float("inf"), "texels": 13824},
        },
        "flags": {"delta_filled": np.int64(12), "integration_residual": np.float64(3.2e-9)},
        "config": {
            "patches": {"patch": 192, "stride": None},
            "operators": {s: {"backend": "reference", "command": None} for s in ("zeta", "psi")},
            "rig": {"lights": [{"pos": [1.6, 1.2, 3.2], "intensity": [5, 4.8, 4.5]}]},
        },
    }


def _values_equal(a, b, float_tolerance: float = 1e-9) -> bool:
    """
    Recursively compare two values for equality, with float tolerance.
    TOON may decode integers as floats in some edge cases, so we also
    compare int-to-float when the float has no fractional part.
    """
    if a is None and b is None:
        return True
    if type(a) != type(b):
        # Allow int/float comparison
        if isinstance(a, (int, float)) and isinstance(b, (int, float)):
            return abs(float(a) - float(b)) < float_tolerance
        return False
    if isinstance(a, dict):
        if set(a.keys()) != set(b.keys()):
            return False
        return all(_values_equal(a[k], b[k], float_tolerance) for k in a)
    if isinstance(a, list):
        if len(a) != len(b):
            return False
        return all(_values_equal(x, y, float_tolerance) for x, y in zip(a, b))
    if isinstance(a, float):
        if math.isnan(a) and math.isnan(b):
            return True
        return abs(a - b) < float_tolerance
    return a == b


class TestReportToToon:
    """Test the report_to_toon conversion function."""

    def test_encode_returns_string(self):
        result = report_to_toon({"stage": "psi", "texels": 42})
        assert isinstance(result, str)
        assert len(result) > 0

    def test_encode_simple_object(self):
        data = {"kind": "albedo", "psnr_db": 41.25, "valid": True}
        result = report_to_toon(data)
        assert "kind: albedo" in result
        assert "psnr_db: 41.25" in result
        assert "valid: true" in result

    def test_encode_nested_object(self):
        """Per-map metric entries should use indentation."""
        result = report_to_toon({"albedo": {"psnr_db": 40.5, "texels": 100}})
        assert "albedo:" in result
        assert "psnr_db: 40.5" in result
        assert "texels: 100" in result

    def test_encode_uniform_array(self):
        """Output listings should use the tabular format."""
        data = {
            "outputs": [
                {"name": "albedo", "file": "albedo.png"},
                {"name": "normals_specular", "file": "normals_specular.png"},
                {"name": "displacement", "file": "displacement.rmap"},
            ]
        }
        result = report_to_toon(data)
        assert "outputs[3" in result
        assert "name" in result
        assert "file" in result

    def test_infinite_psnr_becomes_string(self):
        result = report_to_toon({"psnr_db": float("inf")})
        assert "inf" in result
        decoded = toon_decode(result)
        assert decoded["psnr_db"] == "inf"

    def test_nan_values_cleaned(self):
        result = report_to_toon({"residual": float("nan")})
        assert "null" in result
        assert "nan" not in result.lower()

    def test_numpy_scalars(self):
        result = report_to_toon({"filled": np.int64(12), "mean_e": np.float32(0.5)})
        decoded = toon_decode(result)
        assert decoded["filled"] == 12
        assert decoded["mean_e"] == pytest.approx(0.5)

    def test_encode_empty_dict(self):
        assert isinstance(report_to_toon({}), str)

    def test_roundtrip_simple(self):
        data = {"stage": "sigma", "psnr_db": 38.75, "tiled": True, "command": None}
        decoded = toon_decode(report_to_toon(data))
        assert _values_equal(data, decoded)

    def test_roundtrip_with_arrays(self):
        data = {
            "timings": [
                {"stage": "zeta", "seconds": 1.5},
                {"stage": "delta", "seconds": 0.75},
            ]
        }
        decoded = toon_decode(report_to_toon(data))
        assert _values_equal(data, decoded)


class TestManifestToon:
    """Test TOON conversion of a full run manifest."""

    def test_config_excluded_by_default(self):
        assert "config" in TOON_EXCLUDED_SECTIONS
        result = report_to_toon(_sample_manifest())
        top_level = [line.split(":")[0].split("[")[0] for line in result.split("\n") if line and not line.startswith(" ")]
        assert "config" not in top_level
        assert "metrics" in top_level

    def test_config_included_when_not_excluded(self):
        result = report_to_toon(_sample_manifest(), excluded_sections=())
        assert "config:" in result

    def test_exclusion_reduces_size(self):
        data = _sample_manifest()
        assert len(report_to_toon(data)) < len(report_to_toon(data, excluded_sections=()))

    def test_manifest_roundtrip(self):
        data = _sample_manifest()
        decoded = toon_decode(report_to_toon(data), DecodeOptions(strict=False))
        assert set(decoded) == {k for k in data if k not in TOON_EXCLUDED_SECTIONS}
        assert decoded["seed"] == 7
        assert decoded["metrics"]["specular_albedo"]["psnr_db"] == "inf"
        assert decoded["flags"]["delta_filled"] == 12
        assert decoded["outputs"][1]["name"] == "specular_albedo"

    def test_smaller_than_pretty_json(self):
        data = _sample_manifest()
        cleaned = {k: v for k, v in data.items() if k not in TOON_EXCLUDED_SECTIONS}
        pretty = json.dumps(cleaned, indent=2, default=str)
        assert len(report_to_toon(data)) < len(pretty)


class TestEdgeCases:
    """Test edge cases for TOON serialization."""

    def test_deeply_nested_structure(self):
        data = {"a": {"b": {"c": {"d": {"e": {"f": "deep"}}}}}}
        assert "deep" in report_to_toon(data)

    def test_mixed_type_array(self):
        assert isinstance(report_to_toon({"items": [1, "two", True, None]}), str)

    def test_path_like_strings(self):
        result = report_to_toon({"mesh": "assets/face.obj"})
        assert "assets/face.obj" in result

    def test_large_numbers(self):
        result = report_to_toon({"texels": 14155776})
        assert "14155776" in result

    def test_boolean_values(self):
        result = report_to_toon({"shadows": True, "any_size": False})
        assert "true" in result
        assert "false" in result

    def test_section_with_none_value(self):
        data = {"seed": 1, "metrics": None, "flags": {"delta_filled": 0}}
        result = report_to_toon(data)
        assert "null" in result
        assert "seed: 1" in result
