"""Canny edge detector: Sobel gradients, non-maximum suppression, hysteresis.

Edge maps are boolean arrays of shape (height, width).  Gradient
magnitudes are in the units of the float image (a [0,1] image yields a
Sobel magnitude of up to ~5.66), so the hysteresis thresholds below are
absolute and applied after exposure normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import image
from .errors import ImageTooSmall, InvalidParameter

__all__ = ["CannyParams", "GradientField", "sobel_gradients", "non_max_suppression", "hysteresis", "canny"]

# Pipeline normalization anchors: the low anchor sits below the peg-pixel
# mass (pegs cover ~1% of the frame) so peg/background contrast survives.
NORM_PCT = (0.002, 0.99)

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 2.0
    low_threshold: float = 0.06
    high_threshold: float = 0.16

    def __post_init__(self):
        if self.sigma <= 0:
            raise InvalidParameter(f"sigma must be > 0, got {self.sigma}")
        if not (0 < self.low_threshold < self.high_threshold):
            raise InvalidParameter(
                f"need 0 < low < high, got ({self.low_threshold}, {self.high_threshold})"
            )


@dataclass(frozen=True)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    orientation: np.ndarray  # atan2(gy, gx), in (-pi, pi]

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitude.shape


def _correlate3(padded: np.ndarray, kernel: np.ndarray, h: int, w: int) -> np.ndarray:
    # fixed (row, col) accumulation order keeps results bit-identical to a
    # scalar per-pixel correlation
    out = np.zeros((h, w))
    for i in range(3):
        for j in range(3):
            k = kernel[i, j]
            if k != 0.0:
                out += k * padded[i : i + h, j : j + w]
    return out


def sobel_gradients(f: np.ndarray) -> GradientField:
    """3x3 Sobel correlation with edge-clamp borders."""
    f = np.asarray(f, dtype=np.float64)
    h, w = f.shape
    if h < 3 or w < 3:
        raise ImageTooSmall(f"need at least 3x3, got {w}x{h}")
    padded = np.pad(f, 1, mode="edge")
    gx = _correlate3(padded, _SOBEL_X, h, w)
    gy = _correlate3(padded, _SOBEL_Y, h, w)
    mag = np.hypot(gx, gy)
    ori = np.arctan2(gy, gx)
    return GradientField(gx=gx, gy=gy, magnitude=mag, orientation=ori)


def _shifted(mag: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Magnitude of the neighbor at (x+dx, y+dy); out-of-bounds reads as 0."""
    h, w = mag.shape
    out = np.zeros_like(mag)
    ys0, ys1 = max(0, -dy), min(h, h - dy)
    xs0, xs1 = max(0, -dx), min(w, w - dx)
    out[ys0:ys1, xs0:xs1] = mag[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
    return out


# Forward/backward neighbor offsets (dx, dy) for the four direction bins:
# 0 deg, 45 deg, 90 deg, 135 deg (gradient direction, y pointing down).
_BIN_OFFSETS = [(1, 0), (1, 1), (0, 1), (-1, 1)]


def non_max_suppression(grad: GradientField) -> np.ndarray:
    """Keep magnitude only at ridge maxima along the quantized gradient.

    Tie rule: survive if strictly greater than the forward neighbor and
    greater-or-equal to the backward one, so exactly one pixel of a
    flat-topped ridge remains.
    """
    mag = grad.magnitude
    angle = np.mod(grad.orientation, np.pi)
    bins = np.rint(angle / (np.pi / 4)).astype(np.int8) % 4
    keep = np.zeros(mag.shape, dtype=bool)
    for b, (dx, dy) in enumerate(_BIN_OFFSETS):
        fwd = _shifted(mag, dx, dy)
        bwd = _shifted(mag, -dx, -dy)
        keep |= (bins == b) & (mag > fwd) & (mag >= bwd)
    out = np.where(keep, mag, 0.0)
    out[mag == 0.0] = 0.0
    return out


def hysteresis(thinned: np.ndarray, low: float, high: float) -> np.ndarray:
    """Two-threshold edge linking with 8-connectivity.

    Pixels >= high seed; pixels >= low survive iff transitively 8-connected
    to a seed.
    """
    if not (0 < low < high):
        raise InvalidParameter(f"need 0 < low < high, got ({low}, {high})")
    thinned = np.asarray(thinned, dtype=np.float64)
    weak = thinned >= low
    strong = thinned >= high
    if not strong.any():
        return np.zeros(thinned.shape, dtype=bool)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=np.int8))
    seeded = np.zeros(n + 1, dtype=bool)
    seeded[np.unique(labels[strong])] = True
    seeded[0] = False
    return seeded[labels]


def canny(img: np.ndarray, params: CannyParams) -> np.ndarray:
    """Full detector: normalize -> blur -> Sobel -> NMS -> hysteresis."""
    norm = image.normalize_exposure(img, *NORM_PCT)
    f = image.gaussian_blur(image.to_float(norm), params.sigma)
    grad = sobel_gradients(f)
    thinned = non_max_suppression(grad)
    return hysteresis(thinned, params.low_threshold, params.high_threshold)
