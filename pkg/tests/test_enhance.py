import numpy as np
import pytest

from veinroi.enhance import EnhanceParams, enhance, global_hist_eq, local_adaptive_eq
from veinroi.errors import InvalidParameter


class TestGlobalHistEq:
    def test_two_level_image(self):
        img = np.zeros((10, 10), dtype=np.uint8)
        img[:, 5:] = 192
        img[:, :5] = 64
        out = global_hist_eq(img)
        # CDF puts the halves at ~50% and 100%
        assert abs(int(out[0, 0]) - 127) <= 1
        assert out[0, 9] == 255

    def test_constant_fixed_point(self):
        img = np.full((12, 12), 99, dtype=np.uint8)
        assert np.array_equal(global_hist_eq(img), img)

    def test_monotone(self):
        rng = np.random.default_rng(40)
        img = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
        out = global_hist_eq(img)
        lut = np.full(256, -1)
        for v_in, v_out in zip(img.ravel(), out.ravel()):
            lut[v_in] = v_out
        present = lut[lut >= 0]
        assert (np.diff(present) >= 0).all()

    def test_idempotence_within_one_level(self):
        rng = np.random.default_rng(41)
        img = rng.integers(0, 256, size=(40, 40), dtype=np.uint8)
        once = global_hist_eq(img)
        twice = global_hist_eq(once)
        assert np.abs(twice.astype(int) - once.astype(int)).max() <= 1

    def test_output_range_and_dims(self):
        rng = np.random.default_rng(42)
        img = rng.integers(50, 100, size=(17, 23), dtype=np.uint8)
        out = global_hist_eq(img)
        assert out.shape == img.shape and out.dtype == np.uint8

    def test_cdf_near_linear(self):
        # output CDF deviates from the identity by at most the largest bin mass
        rng = np.random.default_rng(43)
        img = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
        out = global_hist_eq(img)
        hist = np.bincount(out.ravel(), minlength=256)
        cdf = np.cumsum(hist) / out.size
        linear = (np.arange(256) + 1) / 256.0
        assert np.abs(cdf - linear).max() <= hist.max() / out.size + 1 / 256.0

    def test_rejects_non_uint8(self):
        with pytest.raises(InvalidParameter):
            global_hist_eq(np.zeros((4, 4), dtype=np.float64))


class TestLocalAdaptiveEq:
    def test_single_tile_unclipped_equals_global(self):
        rng = np.random.default_rng(44)
        img = rng.integers(0, 256, size=(48, 64), dtype=np.uint8)
        params = EnhanceParams(tile_grid=(1, 1), clip_limit=float("inf"))
        assert np.array_equal(local_adaptive_eq(img, params), global_hist_eq(img))

    def test_constant_fixed_point(self):
        img = np.full((64, 64), 180, dtype=np.uint8)
        out = local_adaptive_eq(img, EnhanceParams())
        assert np.array_equal(out, img)

    def test_output_range_and_dims(self):
        rng = np.random.default_rng(45)
        img = rng.integers(0, 256, size=(100, 120), dtype=np.uint8)
        out = local_adaptive_eq(img, EnhanceParams(tile_grid=(4, 4), clip_limit=2.0))
        assert out.shape == img.shape and out.dtype == np.uint8

    def test_deterministic(self):
        rng = np.random.default_rng(46)
        img = rng.integers(0, 256, size=(128, 128), dtype=np.uint8)
        p = EnhanceParams()
        assert np.array_equal(local_adaptive_eq(img, p), local_adaptive_eq(img, p))

    def test_tiles_too_small_rejected(self):
        img = np.zeros((32, 32), dtype=np.uint8)
        with pytest.raises(InvalidParameter):
            local_adaptive_eq(img, EnhanceParams(tile_grid=(8, 8)))

    def test_invalid_params(self):
        with pytest.raises(InvalidParameter):
            EnhanceParams(tile_grid=(0, 4))
        with pytest.raises(InvalidParameter):
            EnhanceParams(clip_limit=0.5)
        with pytest.raises(InvalidParameter):
            EnhanceParams(mode="fancy")


class TestEnhanceDispatch:
    def test_global_mode(self):
        rng = np.random.default_rng(47)
        img = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
        out = enhance(img, EnhanceParams(mode="global_eq"))
        assert np.array_equal(out, global_hist_eq(img))

    def test_local_mode(self):
        rng = np.random.default_rng(48)
        img = rng.integers(0, 256, size=(128, 128), dtype=np.uint8)
        p = EnhanceParams(mode="local_adaptive")
        assert np.array_equal(enhance(img, p), local_adaptive_eq(img, p))
