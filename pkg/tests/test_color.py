"""
Tests for Color Science
Tests sRGB transfer functions and the luma transform.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.color import ColorConstants, linear_to_srgb, luma_gray, srgb_to_linear
from src.errors import ColorError
from src.raster import ColorSpace, MapKind, RasterMap


def _rgb(values, space="srgb") -> RasterMap:
    data = np.asarray(values, dtype=np.float32).reshape(1, 1, 3)
    return RasterMap(data=data, colorspace=space, kind=MapKind.TEXTURE)


class TestColorConstants:
    """Invariants on luma weights"""

    def test_default_weights_sum_to_one(self):
        assert ColorConstants().luma_weights.sum() == pytest.approx(1.0)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ColorError, match="sum"):
            ColorConstants(luma_r=0.3, luma_g=0.3, luma_b=0.3)

    def test_weights_positive(self):
        with pytest.raises(ColorError, match="positive"):
            ColorConstants(luma_r=-0.1, luma_g=1.0, luma_b=0.1)


class TestTransferFunctions:
    """Tests for srgb_to_linear / linear_to_srgb"""

    def test_fixed_points(self):
        out = linear_to_srgb(_rgb([0.0, 1.0, 0.0], "linear"))
        assert out.data[0, 0].tolist() == [0.0, 1.0, 0.0]
        back = srgb_to_linear(out)
        assert back.data[0, 0].tolist() == [0.0, 1.0, 0.0]

    def test_linear_half(self):
        out = linear_to_srgb(_rgb([0.5, 0.5, 0.5], "linear"))
        assert float(out.data[0, 0, 0]) == pytest.approx(0.73536, abs=1e-5)
        assert out.colorspace == ColorSpace.SRGB

    def test_round_trip_random(self):
        rng = np.random.default_rng(0)
        data = rng.uniform(0, 1, size=(10, 100, 3)).astype(np.float32)
        m = RasterMap(data=data, colorspace="srgb", kind="texture")
        back = linear_to_srgb(srgb_to_linear(m))
        assert np.max(np.abs(back.data - m.data)) <= 1e-6

    def test_wrong_tag_rejected(self):
        with pytest.raises(ColorError, match="expects an srgb"):
            srgb_to_linear(_rgb([0.5, 0.5, 0.5], "linear"))
        with pytest.raises(ColorError, match="expects a linear"):
            linear_to_srgb(_rgb([0.5, 0.5, 0.5], "srgb"))


class TestLuma:
    """Tests for luma_gray"""

    @pytest.mark.parametrize(
        "rgb,expected",
        [
            ([1, 1, 1], 1.0),
            ([1, 0, 0], 0.2126),
            ([0.2, 0.5, 0.8], 0.2126 * 0.2 + 0.7152 * 0.5 + 0.0722 * 0.8),
        ],
    )
    def test_values(self, rgb, expected):
        out = luma_gray(_rgb(rgb))
        assert out.kind == MapKind.GRAY
        assert out.channels == 1
        assert float(out.data[0, 0, 0]) == pytest.approx(expected, abs=1e-6)

    def test_wrong_channel_count(self):
        gray = RasterMap(data=np.zeros((1, 1, 1)), colorspace="srgb", kind="gray")
        with pytest.raises(ColorError, match="3 channels"):
            luma_gray(gray)

    def test_monotone(self):
        base = luma_gray(_rgb([0.3, 0.3, 0.3])).data[0, 0, 0]
        for ch in range(3):
            bumped = [0.3, 0.3, 0.3]
            bumped[ch] = 0.4
            assert luma_gray(_rgb(bumped)).data[0, 0, 0] > base

    def test_linear_on_encoded_values(self):
        c = [0.6, 0.4, 0.9]
        full = float(luma_gray(_rgb(c)).data[0, 0, 0])
        scaled = float(luma_gray(_rgb([0.5 * x for x in c])).data[0, 0, 0])
        assert scaled == pytest.approx(0.5 * full, abs=1e-6)
