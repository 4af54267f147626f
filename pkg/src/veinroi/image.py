"""Raster I/O and the shared low-level kernels.

Grayscale images are plain numpy arrays: uint8 with shape (height, width)
for storage ("gray image"), float64 in nominal [0, 1] for filtering
("float image").  Coordinates are (x, y) with x along the width axis, so
array indexing is ``img[y, x]``.

The canonical interchange format is binary PGM (P5, maxval 255); ASCII
P2 and 8-bit single-channel PNG are accepted on input.  All convolutions
use edge-clamp border replication.
"""

from __future__ import annotations

import math
import os
import re
import tempfile

import numpy as np
from scipy import ndimage

from .errors import CorruptData, InvalidParameter, UnsupportedFormat

__all__ = [
    "load_image",
    "save_image",
    "to_float",
    "to_u8",
    "gaussian_blur",
    "normalize_exposure",
    "resample",
    "bilinear_sample",
    "write_atomic",
]


def _check_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise InvalidParameter(f"expected nonempty 2-D gray image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise InvalidParameter(f"gray image must be uint8, got {img.dtype}")
    return img


def to_float(img: np.ndarray) -> np.ndarray:
    """uint8 [0,255] -> float64 [0,1]."""
    return _check_gray(img).astype(np.float64) / 255.0


def to_u8(f: np.ndarray) -> np.ndarray:
    """float [0,1] -> uint8 with round-half-even and clipping."""
    return np.clip(np.rint(np.asarray(f, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# PGM / PNG I/O


def _parse_pnm_tokens(buf: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integer tokens, skipping # comments."""
    tokens: list[int] = []
    i = start
    n = len(buf)
    while len(tokens) < count:
        while i < n and buf[i : i + 1].isspace():
            i += 1
        if i < n and buf[i : i + 1] == b"#":
            while i < n and buf[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < n and not buf[j : j + 1].isspace():
            j += 1
        if j == i:
            raise CorruptData("unexpected end of header")
        tok = buf[i:j]
        if not re.fullmatch(rb"\d+", tok):
            raise CorruptData(f"non-numeric header token {tok!r}")
        tokens.append(int(tok))
        i = j
    return tokens, i


def _load_pnm(buf: bytes) -> np.ndarray:
    magic = buf[:2]
    try:
        (w, h, maxval), pos = _parse_pnm_tokens(buf, 3, 2)
    except CorruptData:
        raise
    if w < 1 or h < 1:
        raise CorruptData(f"bad dimensions {w}x{h}")
    if maxval != 255:
        raise UnsupportedFormat(f"only maxval 255 supported, got {maxval}")
    if magic == b"P2":
        vals, _ = _parse_pnm_tokens(buf, w * h, pos)
        data = np.array(vals, dtype=np.int64)
        if data.min() < 0 or data.max() > 255:
            raise CorruptData("sample outside [0,255]")
        return data.astype(np.uint8).reshape(h, w)
    # P5: exactly one whitespace byte after maxval, then raw payload
    payload = buf[pos + 1 :]
    if len(payload) < w * h:
        raise CorruptData(f"truncated payload: need {w * h} bytes, have {len(payload)}")
    return np.frombuffer(payload[: w * h], dtype=np.uint8).reshape(h, w).copy()


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Decode a binary/ASCII PGM (maxval 255) or 8-bit grayscale PNG.

    16-bit or multi-channel inputs are rejected, never silently converted.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] in (b"P2", b"P5"):
        return _load_pnm(buf)
    if buf[:8] == b"\x89PNG\r\n\x1a\n":
        from PIL import Image

        import io

        try:
            im = Image.open(io.BytesIO(buf))
            im.load()
        except Exception as exc:  # Pillow raises a mix of OSError subclasses
            raise CorruptData(f"failed to decode PNG: {exc}") from exc
        if im.mode != "L":
            raise UnsupportedFormat(f"PNG mode {im.mode!r}; only 8-bit single-channel accepted")
        return np.asarray(im, dtype=np.uint8)
    raise UnsupportedFormat(f"unrecognized magic {buf[:2]!r}")


def write_atomic(path: str | os.PathLike, data: bytes) -> None:
    """Write via a temp file in the same directory, rename on success."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write a binary PGM (P5, maxval 255).  load(save(x)) == x bit-exactly."""
    img = _check_gray(img)
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    write_atomic(path, header + img.tobytes())


# ---------------------------------------------------------------------------
# Kernels


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D normalized Gaussian, radius ceil(3*sigma)."""
    if sigma <= 0:
        raise InvalidParameter(f"sigma must be > 0, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(f: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian convolution with edge-clamp replication borders."""
    f = np.asarray(f, dtype=np.float64)
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(f, k, axis=1, mode="nearest")
    out = ndimage.correlate1d(out, k, axis=0, mode="nearest")
    return out


def normalize_exposure(img: np.ndarray, low_pct: float = 0.01, high_pct: float = 0.99) -> np.ndarray:
    """Linear stretch mapping the low/high intensity percentiles to 0/255.

    Values outside the anchors are clamped; a constant image is returned
    unchanged.
    """
    img = _check_gray(img)
    if not (0.0 <= low_pct < high_pct <= 1.0):
        raise InvalidParameter(f"need 0 <= low < high <= 1, got ({low_pct}, {high_pct})")
    lo = float(np.percentile(img, low_pct * 100.0))
    hi = float(np.percentile(img, high_pct * 100.0))
    if hi <= lo:
        return img.copy()
    out = (img.astype(np.float64) - lo) * (255.0 / (hi - lo))
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _axis_coords(n_out: int, n_in: int) -> np.ndarray:
    """Corner-aligned source coordinates for resampling one axis."""
    if n_out == 1:
        return np.array([(n_in - 1) / 2.0])
    return np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)


def bilinear_sample(f: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample a float image at fractional (x, y) positions, edge-clamped."""
    f = np.asarray(f, dtype=np.float64)
    h, w = f.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = f[y0, x0] * (1.0 - fx) + f[y0, x1] * fx
    bot = f[y1, x0] * (1.0 - fx) + f[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resample(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear corner-aligned resample; same-size resample is the identity."""
    img = _check_gray(img)
    if out_w < 1 or out_h < 1:
        raise InvalidParameter(f"output dims must be >= 1, got {out_w}x{out_h}")
    h, w = img.shape
    if (out_w, out_h) == (w, h):
        return img.copy()
    xs = _axis_coords(out_w, w)
    ys = _axis_coords(out_h, h)
    gx, gy = np.meshgrid(xs, ys)
    vals = bilinear_sample(img.astype(np.float64), gx, gy)
    return np.clip(np.rint(vals), 0, 255).astype(np.uint8)
