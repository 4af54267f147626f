import numpy as np
import pytest

from veinroi import image
from veinroi.errors import CorruptData, InvalidParameter, UnsupportedFormat


def brute_force_blur(f, sigma):
    """Direct 2-D convolution with edge-clamp padding; the separable path
    must match."""
    k1 = image.gaussian_kernel(sigma)
    k2 = np.outer(k1, k1)
    r = len(k1) // 2
    padded = np.pad(f, r, mode="edge")
    h, w = f.shape
    out = np.zeros_like(f, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            out[y, x] = (padded[y : y + 2 * r + 1, x : x + 2 * r + 1] * k2).sum()
    return out


class TestPnmIO:
    def test_ascii_p2(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P2 3 2 255 0 0 0 255 255 255")
        img = image.load_image(p)
        assert img.shape == (2, 3)
        assert img.tolist() == [[0, 0, 0], [255, 255, 255]]

    def test_p2_with_comments(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P2\n# comment\n2 1\n255\n7 9\n")
        assert image.load_image(p).tolist() == [[7, 9]]

    def test_binary_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(17, 23), dtype=np.uint8)
        p = tmp_path / "r.pgm"
        image.save_image(img, p)
        assert np.array_equal(image.load_image(p), img)

    def test_single_pixel_roundtrip(self, tmp_path):
        p = tmp_path / "one.pgm"
        image.save_image(np.array([[42]], dtype=np.uint8), p)
        assert image.load_image(p).tolist() == [[42]]

    def test_file_size_is_header_plus_payload(self, tmp_path):
        img = np.arange(6, dtype=np.uint8).reshape(2, 3)
        p = tmp_path / "s.pgm"
        image.save_image(img, p)
        assert p.stat().st_size == len(b"P5\n3 2\n255\n") + 6

    def test_save_load_save_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(9, 11), dtype=np.uint8)
        p1, p2 = tmp_path / "a.pgm", tmp_path / "b.pgm"
        image.save_image(img, p1)
        image.save_image(image.load_image(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_large_raster_sample_count(self, tmp_path):
        img = np.zeros((1856, 2784), dtype=np.uint8)
        p = tmp_path / "big.pgm"
        image.save_image(img, p)
        loaded = image.load_image(p)
        assert loaded.size == 5_167_104

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            image.load_image(tmp_path / "nope.pgm")

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P6 1 1 255 abc")
        with pytest.raises(UnsupportedFormat):
            image.load_image(p)

    def test_16bit_rejected(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P5 2 2 65535 " + b"\x00" * 8)
        with pytest.raises(UnsupportedFormat):
            image.load_image(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P5\n4 4\n255\n\x00\x01")
        with pytest.raises(CorruptData):
            image.load_image(p)

    def test_png_gray_input(self, tmp_path):
        from PIL import Image

        rng = np.random.default_rng(2)
        arr = rng.integers(0, 256, size=(10, 12), dtype=np.uint8)
        p = tmp_path / "g.png"
        Image.fromarray(arr, mode="L").save(p)
        assert np.array_equal(image.load_image(p), arr)

    def test_png_rgb_rejected(self, tmp_path):
        from PIL import Image

        p = tmp_path / "rgb.png"
        Image.new("RGB", (4, 4)).save(p)
        with pytest.raises(UnsupportedFormat):
            image.load_image(p)


class TestGaussianBlur:
    def test_constant_preserved(self):
        f = np.full((15, 20), 0.42)
        out = image.gaussian_blur(f, 3.0)
        assert np.allclose(out, 0.42, atol=1e-6)

    def test_impulse_response_sums_to_one(self):
        f = np.zeros((21, 21))
        f[10, 10] = 1.0
        out = image.gaussian_blur(f, 2.0)
        assert abs(out.sum() - 1.0) < 1e-6
        # response is the sampled 2-D Gaussian
        k = image.gaussian_kernel(2.0)
        assert np.allclose(out[10 - 6 : 10 + 7, 10 - 6 : 10 + 7], np.outer(k, k), atol=1e-12)

    def test_matches_direct_2d_convolution(self):
        rng = np.random.default_rng(3)
        f = rng.random((64, 64))
        assert np.allclose(image.gaussian_blur(f, 1.5), brute_force_blur(f, 1.5), atol=1e-5)

    def test_mean_preserved(self):
        rng = np.random.default_rng(4)
        f = rng.random((200, 200))
        out = image.gaussian_blur(f, 2.0)
        assert abs(out.mean() - f.mean()) < 1e-4

    def test_invalid_sigma(self):
        with pytest.raises(InvalidParameter):
            image.gaussian_blur(np.zeros((5, 5)), 0.0)


class TestNormalizeExposure:
    def test_full_range_preserves_extremes(self):
        rng = np.random.default_rng(5)
        img = rng.integers(0, 256, size=(30, 30), dtype=np.uint8)
        img[0, 0], img[1, 1] = 0, 255
        out = image.normalize_exposure(img, 0.01, 0.99)
        assert np.argmax(out) == np.argmax(img)
        assert np.argmin(out) == np.argmin(img)
        assert out.min() == 0 and out.max() == 255

    def test_linear_map_endpoints(self):
        img = np.tile(np.linspace(100, 150, 51).astype(np.uint8), (10, 1))
        out = image.normalize_exposure(img, 0.0, 1.0)
        assert out.min() == 0 and out.max() == 255

    def test_constant_unchanged(self):
        img = np.full((8, 8), 77, dtype=np.uint8)
        assert np.array_equal(image.normalize_exposure(img, 0.01, 0.99), img)

    def test_monotone(self):
        rng = np.random.default_rng(6)
        img = rng.integers(0, 256, size=(25, 25), dtype=np.uint8)
        out = image.normalize_exposure(img, 0.05, 0.95)
        flat_in, flat_out = img.ravel(), out.ravel()
        order = np.argsort(flat_in, kind="stable")
        assert (np.diff(flat_out[order].astype(int)) >= 0).all()

    def test_invalid_percentiles(self):
        with pytest.raises(InvalidParameter):
            image.normalize_exposure(np.zeros((4, 4), dtype=np.uint8), 0.9, 0.1)


class TestResample:
    def test_identity(self):
        rng = np.random.default_rng(7)
        img = rng.integers(0, 256, size=(13, 17), dtype=np.uint8)
        assert np.array_equal(image.resample(img, 17, 13), img)

    def test_checkerboard_corners(self):
        img = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        out = image.resample(img, 4, 4)
        assert out[0, 0] == 0 and out[0, 3] == 255
        assert out[3, 0] == 255 and out[3, 3] == 0

    def test_invalid_dims(self):
        with pytest.raises(InvalidParameter):
            image.resample(np.zeros((4, 4), dtype=np.uint8), 0, 4)
