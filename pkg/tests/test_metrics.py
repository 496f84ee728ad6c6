"""
Tests for the Metrics Module
Tests masked PSNR, report building, cross-rig consistency, the seam diagnostic
and report formatting.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.errors import MetricError
from src.metrics import (
    MetricReport,
    consistency_report,
    format_markdown,
    format_report,
    format_table,
    mse,
    psnr,
    psnr_from_mse,
    seam_metric,
    unit_range,
)
from src.patches import plan_grid
from src.raster import ColorSpace, MapKind, RasterMap


def _map(data, space=ColorSpace.SRGB, kind=MapKind.DIFFUSE_ALBEDO, valid=None) -> RasterMap:
    return RasterMap(np.asarray(data, dtype=np.float32), space, kind, valid)


def _normals(vector, height=4, width=4) -> RasterMap:
    n = np.broadcast_to(np.asarray(vector, dtype=np.float64), (height, width, 3)).copy()
    return RasterMap(n, ColorSpace.SIGNED_UNIT, MapKind.NORMALS_OBJECT)


# ============================================================
# Test PSNR
# ============================================================


class TestPSNR:
    """Tests for psnr and mse"""

    def test_identical_maps_are_infinite(self):
        a = _map(np.random.default_rng(0).random((8, 8, 3)))
        assert psnr(a, a) == math.inf

    def test_known_value(self):
        a = np.zeros((4, 4, 3))
        b = np.full((4, 4, 3), 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        a_data, b_data = rng.random((16, 12, 3)), rng.random((16, 12, 3))
        mask = rng.random((16, 12)) > 0.3
        a, b = _map(a_data), _map(b_data)

        expected_a = a.data.astype(np.float64)
        expected_b = b.data.astype(np.float64)
        total, count = 0.0, 0
        for i in range(16):
            for j in range(12):
                if mask[i, j]:
                    for c in range(3):
                        total += (expected_a[i, j, c] - expected_b[i, j, c]) ** 2
                        count += 1
        expected = 10.0 * math.log10(1.0 / (total / count))
        assert psnr(a, b, mask) == pytest.approx(expected, abs=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        a, b = _map(rng.random((8, 8, 3))), _map(rng.random((8, 8, 3)))
        assert psnr(a, b) == psnr(b, a)

    def test_larger_error_lower_psnr(self):
        base = np.full((8, 8, 3), 0.5)
        small = psnr(base, base + 0.01)
        large = psnr(base, base + 0.05)
        assert large < small

    def test_mse_reports_texel_count(self):
        mask = np.zeros((6, 5), dtype=bool)
        mask[:2] = True
        value, texels = mse(np.zeros((6, 5, 1)), np.full((6, 5, 1), 0.5), mask)
        assert texels == 10
        assert value == pytest.approx(0.25)

    def test_mutual_validity(self):
        valid_a = np.ones((4, 4), dtype=bool)
        valid_a[0] = False
        valid_b = np.ones((4, 4), dtype=bool)
        valid_b[:, 0] = False
        a_data = np.zeros((4, 4, 3))
        a_data[0] = 1.0
        a_data[:, 0] = 1.0
        a = _map(a_data, valid=valid_a)
        b = _map(np.zeros((4, 4, 3)), valid=valid_b)
        value, texels = mse(a, b)
        assert texels == 9
        assert value == 0.0

    def test_empty_mask(self):
        a = _map(np.zeros((4, 4, 3)))
        with pytest.raises(MetricError, match="empty mask"):
            psnr(a, a, np.zeros((4, 4), dtype=bool))

    def test_shape_mismatch(self):
        with pytest.raises(MetricError, match="Shape"):
            psnr(_map(np.zeros((4, 4, 3))), _map(np.zeros((4, 5, 3))))

    def test_colorspace_mismatch(self):
        a = _map(np.zeros((4, 4, 3)))
        b = _map(np.zeros((4, 4, 3)), space=ColorSpace.LINEAR)
        with pytest.raises(MetricError, match="Cannot compare"):
            psnr(a, b)

    def test_raw_maps_rejected(self):
        raw = _map(np.zeros((4, 4, 3)), space=ColorSpace.RAW, kind=MapKind.SHADING)
        with pytest.raises(MetricError, match="Raw"):
            unit_range(raw)

    def test_normals_compared_in_unit_encoding(self):
        up, down = _normals((0, 0, 1)), _normals((0, 0, -1))
        # z differs by 1 after n / 2 + 0.5, x and y agree
        assert psnr(up, down) == pytest.approx(10.0 * math.log10(3.0), abs=1e-6)

    def test_psnr_from_mse_zero(self):
        assert psnr_from_mse(0.0) == math.inf


# ============================================================
# Test Reports
# ============================================================


class TestMetricReport:
    """Tests for MetricReport"""

    @pytest.fixture
    def report(self):
        a = np.zeros((4, 4, 3))
        return MetricReport.evaluate(
            {
                "albedo": (_map(a), _map(a + 0.1)),
                "specular": (_map(a[:, :, :1], space=ColorSpace.LINEAR, kind=MapKind.SPECULAR_ALBEDO),) * 2,
            },
            flags={"filled": 3},
        )

    def test_entries(self, report):
        assert list(report.entries) == ["albedo", "specular"]
        assert report.entries["albedo"].psnr_db == pytest.approx(20.0, abs=1e-4)
        assert report.entries["specular"].texels == 16

    def test_min_psnr(self, report):
        assert report.min_psnr == pytest.approx(20.0, abs=1e-4)

    def test_empty_report(self):
        with pytest.raises(MetricError):
            MetricReport().min_psnr

    def test_to_dict(self, report):
        data = report.to_dict()
        assert data["specular"]["psnr_db"] == math.inf
        assert data["flags"] == {"filled": 3}

    def test_to_frame(self, report):
        frame = report.to_frame()
        assert frame.index.name == "map"
        assert list(frame.columns) == ["psnr_db", "texels"]


class TestConsistency:
    """Tests for consistency_report"""

    def test_identical_albedos(self):
        a = _map(np.full((4, 4, 3), 0.4))
        report = consistency_report({"studio": a, "uniform": a})
        assert report.pairs[0][:2] == ("studio", "uniform")
        assert report.min_psnr == math.inf
        assert report.mean_psnr == math.inf

    def test_all_pairs(self):
        maps = [_map(np.full((4, 4, 3), v)) for v in (0.4, 0.5, 0.6)]
        report = consistency_report(maps)
        assert len(report.pairs) == 3
        assert report.min_psnr == pytest.approx(10.0 * math.log10(1 / 0.04), abs=1e-4)
        assert len(report.to_frame()) == 3

    def test_needs_two(self):
        with pytest.raises(MetricError, match="two"):
            consistency_report([_map(np.zeros((2, 2, 3)))])


class TestSeamMetric:
    """Tests for seam_metric"""

    def test_constant_image(self):
        grid = plan_grid(128, 64, 64, 32)
        seams = seam_metric(np.full((64, 128), 0.3), grid)
        assert seams.border_max == 0.0
        assert seams.ratio == 0.0

    def test_step_on_patch_border(self):
        grid = plan_grid(128, 64, 64, 32)
        assert grid.borders("x") == [32, 64, 96]
        data = np.zeros((64, 128))
        data[:, 64:] = 1.0
        seams = seam_metric(data, grid)
        assert seams.border_max == 1.0
        assert seams.interior_max == 0.0
        assert seams.ratio == math.inf

    def test_step_off_patch_border(self):
        grid = plan_grid(128, 64, 64, 32)
        data = np.zeros((64, 128))
        data[:, 50:] = 1.0
        seams = seam_metric(data, grid)
        assert seams.border_max == 0.0
        assert seams.interior_max == 1.0

    def test_wrong_size(self):
        with pytest.raises(MetricError):
            seam_metric(np.zeros((64, 64)), plan_grid(128, 64, 64, 32))


# ============================================================
# Test Formatters
# ============================================================


class TestFormatters:
    """Tests for report rendering"""

    @pytest.fixture
    def report(self):
        a = np.zeros((4, 4, 3))
        return MetricReport.evaluate({"albedo": (_map(a), _map(a + 0.1)), "normals": (_map(a), _map(a))})

    def test_table(self, report):
        text = format_table(report.to_frame(), "PSNR REPORT")
        assert "PSNR REPORT" in text
        assert "Map" in text
        assert "20.00" in text
        assert "inf" in text

    def test_markdown(self, report):
        text = format_markdown(report.to_frame(), "PSNR")
        assert text.startswith("## PSNR")
        assert "| albedo |" in text

    def test_empty_frame(self):
        assert "no data" in format_table(MetricReport().to_frame())

    def test_json(self, report):
        data = json.loads(format_report(report, "json"))
        assert data["normals"]["psnr_db"] == "inf"
        assert data["albedo"]["texels"] == 16

    def test_toon(self, report):
        text = format_report(report, "toon")
        assert "albedo:" in text

    def test_unknown_format(self, report):
        with pytest.raises(ValueError, match="Unknown format"):
            format_report(report, "xml")
