"""
Tests for the Displacement Module
Tests slope extraction from specular normals and least-squares integration.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.displacement import (
    SlopeField,
    displacement_from_normals,
    gradient_field,
    integrate,
    normals_to_slopes,
    solve_displacement,
)
from src.errors import IntegrationError, RasterError
from src.geometry.mesh import emboss
from src.geometry.synthetic import uv_sphere
from src.raster import ColorSpace, MapKind, RasterMap


def _tangent_normals(vectors) -> RasterMap:
    v = np.asarray(vectors, dtype=np.float64)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return RasterMap(v, ColorSpace.SIGNED_UNIT, MapKind.NORMALS_SPECULAR)


def _grid(height, width):
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    # y grows up the UV square
    return cols, (height - 1) - rows


def _rmse(a, b, mask=None):
    if mask is not None:
        a, b = a[mask], b[mask]
    return float(np.sqrt(np.mean((a - b) ** 2)))


# ============================================================
# Test Slopes
# ============================================================


class TestNormalsToSlopes:
    """Tests for normals_to_slopes"""

    def test_flat(self):
        slopes = normals_to_slopes(_tangent_normals(np.broadcast_to([0, 0, 1.0], (4, 5, 3))))
        assert slopes.valid.all()
        assert np.all(slopes.p == 0.0) and np.all(slopes.q == 0.0)

    def test_tilted(self):
        slopes = normals_to_slopes(_tangent_normals(np.broadcast_to([1.0, 0, 1.0], (3, 3, 3))))
        np.testing.assert_allclose(slopes.p, -1.0, atol=1e-6)
        np.testing.assert_allclose(slopes.q, 0.0, atol=1e-12)

    def test_grazing_normal_is_invalid(self):
        vectors = np.zeros((2, 2, 3))
        vectors[...] = (0.0, 0.0, 1.0)
        vectors[0, 1] = (np.sqrt(1 - 0.05**2), 0.0, 0.05)
        slopes = normals_to_slopes(_tangent_normals(vectors))
        assert slopes.valid.tolist() == [[True, False], [True, True]]
        assert slopes.p[0, 1] == 0.0

    def test_threshold_is_configurable(self):
        vectors = np.broadcast_to([np.sqrt(1 - 0.2**2), 0.0, 0.2], (2, 2, 3))
        assert normals_to_slopes(_tangent_normals(vectors)).valid.all()
        assert not normals_to_slopes(_tangent_normals(vectors), nz_min=0.3).valid.any()

    def test_rejects_object_normals(self):
        n = RasterMap(np.broadcast_to([0, 0, 1.0], (2, 2, 3)), ColorSpace.SIGNED_UNIT, MapKind.NORMALS_OBJECT)
        with pytest.raises(RasterError, match="tangent"):
            normals_to_slopes(n)

    def test_invalid_input_texels_stay_invalid(self):
        valid = np.ones((3, 3), dtype=bool)
        valid[1, 1] = False
        data = np.broadcast_to([0, 0, 1.0], (3, 3, 3)).copy()
        data[1, 1] = 0.0
        n = RasterMap(data, ColorSpace.SIGNED_UNIT, MapKind.NORMALS_SPECULAR, valid)
        assert not normals_to_slopes(n).valid[1, 1]

    def test_shape_mismatch(self):
        with pytest.raises(RasterError):
            SlopeField(np.zeros((2, 2)), np.zeros((2, 3)), np.ones((2, 2), dtype=bool))


# ============================================================
# Test Integration
# ============================================================


class TestIntegrate:
    """Tests for integrate and solve_displacement"""

    def test_zero_slopes(self):
        slopes = SlopeField(np.zeros((6, 8)), np.zeros((6, 8)), np.ones((6, 8), dtype=bool))
        d = integrate(slopes)
        assert d.kind == MapKind.DISPLACEMENT
        assert d.colorspace == ColorSpace.RAW
        assert np.all(d.data == 0.0)

    def test_constant_slopes_give_plane(self):
        height, width = 12, 16
        x, y = _grid(height, width)
        p0, q0 = 0.05, -0.03
        slopes = SlopeField(np.full((height, width), p0), np.full((height, width), q0), np.ones((height, width), dtype=bool))
        result = solve_displacement(slopes)
        plane = p0 * x + q0 * y
        assert _rmse(result.height, plane - plane.mean()) <= 1e-6

    def test_recovers_sinusoid(self):
        height, width = 12, 16
        x, y = _grid(height, width)
        truth = np.sin(2 * np.pi * x / width) * np.sin(2 * np.pi * y / height)
        result = solve_displacement(gradient_field(truth))
        assert _rmse(result.height, truth - truth.mean()) <= 1e-3

    def test_gauge_and_certificate(self):
        rng = np.random.default_rng(0)
        slopes = SlopeField(rng.normal(size=(10, 14)), rng.normal(size=(10, 14)), np.ones((10, 14), dtype=bool))
        result = solve_displacement(slopes)
        assert abs(result.height.mean()) <= 1e-10
        assert result.residual <= 1e-8
        assert result.components == 1
        assert result.iterations > 0

    def test_gauge_holds_on_stored_map(self):
        rng = np.random.default_rng(2)
        valid = np.ones((10, 15), dtype=bool)
        valid[:, 7] = False
        slopes = SlopeField(rng.normal(size=(10, 15)), rng.normal(size=(10, 15)), valid)
        result = solve_displacement(slopes)
        stored = result.displacement.data[:, :, 0]
        assert stored.dtype == np.float32
        assert result.components == 2
        for cols in (slice(0, 7), slice(8, 15)):
            region = stored[:, cols].astype(np.float64)
            assert abs(region.mean()) <= 1e-6 * np.abs(region).max()
            assert abs(result.height[:, cols].mean()) <= 1e-10

    def test_linearity(self):
        rng = np.random.default_rng(1)
        slopes = SlopeField(rng.normal(size=(10, 12)), rng.normal(size=(10, 12)), np.ones((10, 12), dtype=bool))
        once = solve_displacement(slopes).height
        thrice = solve_displacement(slopes.scaled(3.0)).height
        assert np.max(np.abs(thrice - 3.0 * once)) <= 1e-6 * np.max(np.abs(3.0 * once))

    def test_components_are_gauge_fixed_separately(self):
        height, width = 8, 17
        x, y = _grid(height, width)
        valid = np.ones((height, width), dtype=bool)
        valid[:, 8] = False
        truth = 0.1 * x + np.where(x > 8, 5.0, 0.0)
        result = solve_displacement(gradient_field(truth, valid))
        assert result.components == 2
        left, right = valid & (x < 8), valid & (x > 8)
        assert abs(result.height[left].mean()) <= 1e-10
        assert abs(result.height[right].mean()) <= 1e-10
        expected = truth.copy()
        expected[left] -= truth[left].mean()
        expected[right] -= truth[right].mean()
        assert _rmse(result.height, expected, valid) <= 1e-6

    def test_invalid_texels_are_zero(self):
        valid = np.ones((6, 6), dtype=bool)
        valid[2, 3] = False
        slopes = SlopeField(np.full((6, 6), 0.2), np.zeros((6, 6)), valid)
        d = integrate(slopes)
        assert d.data[2, 3, 0] == 0.0
        assert not d.valid[2, 3]

    def test_isolated_texel(self):
        valid = np.zeros((5, 5), dtype=bool)
        valid[2, 2] = True
        result = solve_displacement(SlopeField(np.ones((5, 5)), np.ones((5, 5)), valid))
        assert result.components == 1
        assert result.height[2, 2] == 0.0

    def test_no_valid_texel(self):
        with pytest.raises(RasterError, match="no valid"):
            integrate(SlopeField(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 3), dtype=bool)))

    def test_iteration_cap_reports_residual(self):
        rng = np.random.default_rng(2)
        slopes = SlopeField(rng.normal(size=(40, 40)), rng.normal(size=(40, 40)), np.ones((40, 40), dtype=bool))
        with pytest.raises(IntegrationError) as exc:
            solve_displacement(slopes, rtol=1e-300)
        assert exc.value.iterations > 0
        assert "residual" in str(exc.value)

    def test_workers_do_not_change_result(self):
        rng = np.random.default_rng(3)
        valid = rng.random((20, 20)) > 0.2
        slopes = SlopeField(rng.normal(size=(20, 20)), rng.normal(size=(20, 20)), valid)
        one = solve_displacement(slopes, workers=1)
        many = solve_displacement(slopes, workers=4)
        assert np.array_equal(one.height, many.height)

    def test_normals_of_a_bump(self):
        height, width = 16, 16
        x, y = _grid(height, width)
        bump = 0.5 * np.exp(-((x - 7.5) ** 2 + (y - 7.5) ** 2) / 12.0)
        slopes = gradient_field(bump)
        normals = np.stack([-slopes.p, -slopes.q, np.ones_like(bump)], axis=2)
        result = displacement_from_normals(_tangent_normals(normals))
        centre = result.height[7:9, 7:9].mean()
        assert centre > result.height[0, 0]


# ============================================================
# Test Embossing
# ============================================================


class TestEmbossDisplacement:
    """Integrated displacement applied to a mesh"""

    def test_zero_displacement_keeps_vertices(self):
        mesh = uv_sphere(8, 12)
        flat = integrate(SlopeField(np.zeros((16, 16)), np.zeros((16, 16)), np.ones((16, 16), dtype=bool)))
        moved, fallbacks = emboss(mesh, flat, 0.01)
        assert fallbacks == 0
        assert np.array_equal(moved.vertices, mesh.vertices)
