"""
Tests for the Raster Data Model
Tests map invariants, signed normalization, stacking, file I/O and resampling.
"""

import sys
from pathlib import Path

import cv2
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.errors import RasterError
from src.raster import (
    ColorSpace,
    MapKind,
    RasterMap,
    box_downsample,
    decode_frame,
    denormalize_unsigned,
    encode_frame,
    load_raster,
    normalize_signed,
    remap_uv,
    resample,
    save_raster,
    stack,
    unstack,
)


# ============================================================
# Test Fixtures
# ============================================================


def _gray(value: float = 0.5, size=(8, 8)) -> RasterMap:
    return RasterMap(
        data=np.full(size + (1,), value, dtype=np.float32),
        colorspace=ColorSpace.SRGB,
        kind=MapKind.GRAY,
    )


def _normals(size=(8, 8)) -> RasterMap:
    rng = np.random.default_rng(3)
    n = rng.normal(size=size + (3,))
    n[:, :, 2] = np.abs(n[:, :, 2]) + 0.5
    n /= np.linalg.norm(n, axis=2, keepdims=True)
    return RasterMap(data=n, colorspace=ColorSpace.SIGNED_UNIT, kind=MapKind.NORMALS_TANGENT)


def _texture(size=(8, 12)) -> RasterMap:
    rng = np.random.default_rng(1)
    return RasterMap(
        data=rng.uniform(0, 1, size=size + (3,)),
        colorspace=ColorSpace.SRGB,
        kind=MapKind.TEXTURE,
    )


# ============================================================
# Map Invariants
# ============================================================


class TestRasterMapInvariants:
    """Construction-time checks on RasterMap"""

    def test_shape_properties(self):
        m = _texture()
        assert (m.width, m.height, m.channels) == (12, 8, 3)
        assert m.resolution == (12, 8)
        assert m.layout == ("R", "G", "B")

    def test_data_is_read_only(self):
        m = _gray()
        with pytest.raises(ValueError):
            m.data[0, 0, 0] = 1.0

    def test_srgb_out_of_range_rejected(self):
        with pytest.raises(RasterError, match="must lie in"):
            RasterMap(data=np.full((2, 2, 1), 1.5), colorspace="srgb", kind="gray")

    def test_signed_out_of_range_rejected(self):
        with pytest.raises(RasterError):
            RasterMap(data=np.full((2, 2, 1), -1.5), colorspace="signed-unit", kind="depth")

    def test_raw_allows_any_finite_range(self):
        m = RasterMap(data=np.full((2, 2, 1), -42.0), colorspace="raw", kind="displacement")
        assert m.data.min() == -42.0

    def test_non_finite_rejected(self):
        data = np.zeros((2, 2, 1))
        data[0, 0, 0] = np.inf
        with pytest.raises(RasterError, match="non-finite"):
            RasterMap(data=data, colorspace="raw", kind="displacement")

    def test_kind_channel_mismatch(self):
        with pytest.raises(RasterError, match="expects"):
            RasterMap(data=np.zeros((2, 2, 1)), colorspace="signed-unit", kind="normals-object")

    def test_non_unit_normals_rejected(self):
        data = np.zeros((2, 2, 3))
        data[:, :, 2] = 0.9
        with pytest.raises(RasterError, match="non-unit"):
            RasterMap(data=data, colorspace="signed-unit", kind="normals-tangent")

    def test_invalid_texels_exempt_from_unit_check(self):
        data = np.zeros((2, 2, 3))
        data[0, 0, 2] = 1.0
        valid = np.zeros((2, 2), dtype=bool)
        valid[0, 0] = True
        m = RasterMap(data=data, colorspace="signed-unit", kind="normals-tangent", valid=valid)
        assert m.validity().sum() == 1

    def test_mask_shape_mismatch(self):
        with pytest.raises(RasterError, match="mask"):
            RasterMap(data=np.zeros((2, 2, 1)), colorspace="raw", kind="displacement",
                      valid=np.ones((3, 2), dtype=bool))

    def test_content_hash_stable_and_sensitive(self):
        a, b = _texture(), _texture()
        assert a.content_hash() == b.content_hash()
        changed = a.with_data(np.clip(a.data + 0.01, 0, 1))
        assert changed.content_hash() != a.content_hash()


# ============================================================
# Signed Normalization
# ============================================================


class TestNormalizeSigned:
    """Tests for normalize_signed / denormalize_unsigned"""

    @pytest.mark.parametrize("value,expected", [(0.0, -1.0), (1.0, 1.0), (0.25, -0.5)])
    def test_affine_values(self, value, expected):
        out = normalize_signed(_gray(value))
        assert out.colorspace == ColorSpace.SIGNED_UNIT
        assert float(out.data[0, 0, 0]) == expected

    def test_already_signed_rejected(self):
        with pytest.raises(RasterError, match="already signed"):
            normalize_signed(normalize_signed(_gray()))

    def test_round_trip(self):
        m = _texture()
        back = denormalize_unsigned(normalize_signed(m))
        assert back.colorspace == ColorSpace.SRGB
        np.testing.assert_allclose(back.data, m.data, atol=1e-7)

    def test_signed_round_trip(self):
        rng = np.random.default_rng(5)
        signed = RasterMap(data=rng.uniform(-1, 1, (4, 4, 1)), colorspace="signed-unit", kind="depth")
        back = normalize_signed(denormalize_unsigned(signed, ColorSpace.LINEAR))
        np.testing.assert_allclose(back.data, signed.data, atol=1e-6)


# ============================================================
# Stacking
# ============================================================


class TestStack:
    """Tests for MapStack construction"""

    def test_gray_and_normals_layout(self):
        s = stack([_gray(), _normals()])
        assert s.channels == 4
        assert s.layout == ("G", "X", "Y", "Z")
        assert s.data.shape == (8, 8, 4)

    def test_rgb_and_depth_layout(self):
        rgb = _texture(size=(8, 8))
        depth = RasterMap(data=np.zeros((8, 8, 1)), colorspace="signed-unit", kind="depth")
        assert stack([rgb, depth]).layout == ("R", "G", "B", "D")

    def test_resolution_mismatch(self):
        with pytest.raises(RasterError, match="Resolution mismatch"):
            stack([_gray(size=(8, 8)), _gray(size=(4, 4))])

    def test_unstack_is_exact(self):
        layers = [_gray(), _normals()]
        for original, restored in zip(layers, unstack(stack(layers))):
            assert original is restored

    def test_custom_layout_length_checked(self):
        with pytest.raises(RasterError, match="Layout"):
            stack([_gray()], layout=["A", "B"])

    def test_valid_is_intersection(self):
        valid = np.ones((8, 8), dtype=bool)
        valid[0, 0] = False
        masked = RasterMap(data=np.zeros((8, 8, 1)), colorspace="srgb", kind="gray", valid=valid)
        assert not stack([_gray(), masked]).valid[0, 0]


# ============================================================
# File I/O
# ============================================================


class TestRasterIO:
    """Tests for PNG and float raster reading/writing"""

    def test_16bit_png_max_code(self, tmp_path):
        path = tmp_path / "white.png"
        cv2.imwrite(str(path), np.full((4, 4, 3), 65535, dtype=np.uint16))
        m = load_raster(path, "texture")
        assert np.all(m.data == 1.0)

    def test_8bit_png_quantization(self, tmp_path):
        path = tmp_path / "gray.png"
        cv2.imwrite(str(path), np.full((4, 4), 128, dtype=np.uint8))
        m = load_raster(path, "gray")
        assert m.data[0, 0, 0] == pytest.approx(128 / 255, abs=1e-7)

    def test_png_channel_order_is_rgb(self, tmp_path):
        path = tmp_path / "red.png"
        bgr = np.zeros((2, 2, 3), dtype=np.uint8)
        bgr[:, :, 2] = 255
        cv2.imwrite(str(path), bgr)
        m = load_raster(path, "texture")
        assert m.data[0, 0].tolist() == [1.0, 0.0, 0.0]

    def test_float_raster_nan_rejected(self, tmp_path):
        path = tmp_path / "bad.rmap"
        data = np.zeros((2, 2, 1), dtype=np.float32)
        data[1, 1, 0] = np.nan
        path.write_bytes(encode_frame(data, ColorSpace.RAW))
        with pytest.raises(RasterError, match="non-finite sample"):
            load_raster(path, "displacement")

    def test_float_raster_round_trip_bit_exact(self, tmp_path):
        m = _normals()
        path = save_raster(m, tmp_path / "n.rmap")
        back = load_raster(path, "normals-tangent")
        assert back.data.tobytes() == m.data.tobytes()
        assert back.colorspace == m.colorspace

    def test_float_raster_mask_sidecar(self, tmp_path):
        valid = np.ones((8, 8), dtype=bool)
        valid[2:4, 2:4] = False
        m = RasterMap(data=np.zeros((8, 8, 1)), colorspace="raw", kind="displacement", valid=valid)
        back = load_raster(save_raster(m, tmp_path / "d.rmap"), "displacement")
        np.testing.assert_array_equal(back.valid, valid)

    def test_unmasked_save_drops_stale_sidecar(self, tmp_path):
        valid = np.ones((8, 8), dtype=bool)
        valid[2:4, 2:4] = False
        masked = RasterMap(data=np.zeros((8, 8, 1)), colorspace="raw", kind="displacement", valid=valid)
        path = save_raster(masked, tmp_path / "d.rmap")
        assert any(p.name.startswith("d.rmap") and p != path for p in tmp_path.iterdir())
        save_raster(masked.with_data(masked.data, valid=None), path)
        assert [p.name for p in tmp_path.iterdir()] == ["d.rmap"]
        assert load_raster(path, "displacement").validity().all()

    def test_alpha_png_drops_stale_sidecar(self, tmp_path):
        gray = RasterMap(np.zeros((8, 8, 1)), ColorSpace.SRGB, MapKind.GRAY, valid=np.eye(8, dtype=bool))
        save_raster(gray, tmp_path / "t.png")
        m = _texture()
        m = m.with_data(m.data, valid=np.ones(m.data.shape[:2], dtype=bool))
        save_raster(m, tmp_path / "t.png")
        assert [p.name for p in tmp_path.iterdir()] == ["t.png"]
        assert load_raster(tmp_path / "t.png", "texture").validity().all()

    def test_16bit_png_round_trip(self, tmp_path):
        m = _texture()
        back = load_raster(save_raster(m, tmp_path / "t.png"), "texture")
        assert np.max(np.abs(back.data - m.data)) <= 1 / 65535

    def test_normal_png_round_trip(self, tmp_path):
        m = _normals()
        back = load_raster(save_raster(m, tmp_path / "n.png"), "normals-tangent")
        assert back.colorspace == ColorSpace.SIGNED_UNIT
        assert np.max(np.abs(back.data - m.data)) < 1e-4

    def test_png_alpha_becomes_mask(self, tmp_path):
        valid = np.ones((8, 12), dtype=bool)
        valid[0] = False
        m = _texture().with_data(_texture().data, valid=valid)
        back = load_raster(save_raster(m, tmp_path / "masked.png"), "texture")
        np.testing.assert_array_equal(back.valid, valid)
        assert back.channels == 3

    def test_wrong_channel_count(self, tmp_path):
        path = save_raster(_texture(), tmp_path / "t.png")
        with pytest.raises(RasterError, match="incompatible"):
            load_raster(path, "depth")

    def test_missing_file(self, tmp_path):
        with pytest.raises(RasterError, match="not found"):
            load_raster(tmp_path / "nope.png", "texture")

    def test_raw_kind_needs_float_format(self, tmp_path):
        m = RasterMap(data=np.zeros((2, 2, 1)), colorspace="raw", kind="displacement")
        with pytest.raises(RasterError):
            save_raster(m, tmp_path / "d.png")

    def test_frame_codec_header(self):
        data = np.arange(24, dtype=np.float32).reshape(2, 4, 3)
        frame = encode_frame(data, ColorSpace.LINEAR)
        assert frame[:4] == b"RMAP"
        assert len(frame) == 20 + data.nbytes
        decoded, space = decode_frame(frame)
        assert space == ColorSpace.LINEAR
        np.testing.assert_array_equal(decoded, data)

    def test_bad_magic(self):
        frame = b"XMAP" + encode_frame(np.zeros((1, 1, 1), dtype=np.float32), ColorSpace.RAW)[4:]
        with pytest.raises(RasterError, match="magic"):
            decode_frame(frame)


# ============================================================
# Resampling
# ============================================================


class TestResample:
    """Tests for Lanczos resampling, box downsampling and UV remap"""

    def test_constant_preserved(self):
        m = RasterMap(data=np.full((6, 9, 3), 0.5), colorspace="srgb", kind="texture")
        up = resample(m, 72, 48)
        assert up.resolution == (72, 48)
        np.testing.assert_allclose(up.data, 0.5, atol=1e-6)

    def test_box_downsample_means_blocks(self):
        data = np.zeros((4, 4, 1))
        data[:2, :2] = 1.0
        m = RasterMap(data=data, colorspace="linear", kind="gray")
        down = box_downsample(m, 2)
        assert down.data[:, :, 0].tolist() == [[1.0, 0.0], [0.0, 0.0]]

    def test_box_downsample_requires_divisible(self):
        with pytest.raises(RasterError):
            box_downsample(_texture(size=(9, 9)), 2)

    def test_resampled_normals_stay_unit(self):
        up = resample(_normals(), 32, 32)
        norms = np.linalg.norm(up.data, axis=2)
        assert np.max(np.abs(norms - 1)) < 1e-5

    def test_mask_resized_nearest(self):
        valid = np.zeros((4, 4), dtype=bool)
        valid[:, :2] = True
        m = RasterMap(data=np.zeros((4, 4, 1)), colorspace="raw", kind="displacement", valid=valid)
        up = resample(m, 8, 8)
        assert up.valid[:, :4].all() and not up.valid[:, 4:].any()

    def test_remap_without_table_is_resample(self):
        m = _texture()
        np.testing.assert_array_equal(remap_uv(m, 24, 16).data, resample(m, 24, 16).data)

    def test_remap_identity_table(self):
        m = _texture(size=(8, 8))
        cols, rows = np.meshgrid(np.arange(8) + 0.5, np.arange(8) + 0.5)
        table = np.stack([cols / 8, 1 - rows / 8], axis=2)
        table[0, 0] = np.nan
        out = remap_uv(m, 8, 8, table)
        assert not out.valid[0, 0]
        np.testing.assert_allclose(out.data[1:], m.data[1:], atol=1e-6)
