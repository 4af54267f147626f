"""Contrast enhancement for extracted ROIs.

Two variants: plain cumulative-histogram equalization and clip-limited
tile-adaptive equalization with bilinear blending of the four surrounding
tile mappings.  With a single tile and no clipping the adaptive variant
degenerates exactly to the global one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter

__all__ = ["EnhanceParams", "global_hist_eq", "local_adaptive_eq"]


@dataclass(frozen=True)
class EnhanceParams:
    tile_grid: tuple[int, int] = (8, 8)  # (nx, ny)
    clip_limit: float = 2.0  # multiple of the uniform-histogram bin height; inf disables
    mode: str = "local_adaptive"  # or "global_eq"

    def __post_init__(self):
        nx, ny = self.tile_grid
        if nx < 1 or ny < 1:
            raise InvalidParameter(f"tile_grid entries must be >= 1, got {self.tile_grid}")
        if self.clip_limit < 1:
            raise InvalidParameter(f"clip_limit must be >= 1, got {self.clip_limit}")
        if self.mode not in ("global_eq", "local_adaptive"):
            raise InvalidParameter(f"unknown mode {self.mode!r}")


def _eq_lut(hist: np.ndarray) -> np.ndarray:
    """Level mapping from a (possibly clipped) 256-bin histogram."""
    total = hist.sum()
    if total <= 0:
        return np.arange(256, dtype=np.uint8)
    cdf = np.cumsum(hist) / total
    return np.clip(np.rint(cdf * 255.0), 0, 255).astype(np.uint8)


def global_hist_eq(img: np.ndarray) -> np.ndarray:
    """Standard cumulative-histogram equalization; constant images are
    fixed points."""
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2 or img.size == 0:
        raise InvalidParameter("expected nonempty uint8 image")
    if img.min() == img.max():
        return img.copy()
    hist = np.bincount(img.ravel(), minlength=256)
    return _eq_lut(hist)[img]


def _clip_hist(hist: np.ndarray, clip_limit: float, n_pixels: int) -> np.ndarray:
    """Clip bins at clip_limit * uniform height; redistribute the excess
    uniformly."""
    if not math.isfinite(clip_limit):
        return hist.astype(np.float64)
    limit = clip_limit * n_pixels / 256.0
    clipped = np.minimum(hist, limit).astype(np.float64)
    excess = hist.sum() - clipped.sum()
    return clipped + excess / 256.0


def local_adaptive_eq(img: np.ndarray, params: EnhanceParams) -> np.ndarray:
    """Clip-limited adaptive equalization with bilinear tile blending."""
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2 or img.size == 0:
        raise InvalidParameter("expected nonempty uint8 image")
    h, w = img.shape
    nx, ny = params.tile_grid
    if w // nx < 8 or h // ny < 8:
        raise InvalidParameter(f"tiles smaller than 8x8 px for grid {params.tile_grid} on {w}x{h}")
    if img.min() == img.max():
        return img.copy()

    # tile boundaries (last tile absorbs the remainder)
    xb = np.linspace(0, w, nx + 1).astype(int)
    yb = np.linspace(0, h, ny + 1).astype(int)
    luts = np.empty((ny, nx, 256), dtype=np.uint8)
    for ty in range(ny):
        for tx in range(nx):
            tile = img[yb[ty] : yb[ty + 1], xb[tx] : xb[tx + 1]]
            hist = np.bincount(tile.ravel(), minlength=256)
            luts[ty, tx] = _eq_lut(_clip_hist(hist, params.clip_limit, tile.size))

    # bilinear blend of the 4 surrounding tile mappings, clamped at borders
    cx = (xb[:-1] + xb[1:]) / 2.0  # tile centers
    cy = (yb[:-1] + yb[1:]) / 2.0
    px = np.arange(w, dtype=np.float64)
    py = np.arange(h, dtype=np.float64)

    def _blend_coords(p: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        i1 = np.searchsorted(centers, p)  # index of the tile center at/after p
        i0 = np.clip(i1 - 1, 0, len(centers) - 1)
        i1 = np.clip(i1, 0, len(centers) - 1)
        span = centers[i1] - centers[i0]
        frac = np.where(span > 0, (p - centers[i0]) / np.where(span > 0, span, 1.0), 0.0)
        return i0, i1, np.clip(frac, 0.0, 1.0)

    tx0, tx1, fx = _blend_coords(px, cx)
    ty0, ty1, fy = _blend_coords(py, cy)

    out = np.zeros((h, w), dtype=np.float64)
    vals = img
    FY = fy[:, None]
    FX = fx[None, :]
    m00 = luts[ty0[:, None], tx0[None, :], vals]
    m01 = luts[ty0[:, None], tx1[None, :], vals]
    m10 = luts[ty1[:, None], tx0[None, :], vals]
    m11 = luts[ty1[:, None], tx1[None, :], vals]
    out = (m00 * (1 - FX) + m01 * FX) * (1 - FY) + (m10 * (1 - FX) + m11 * FX) * FY
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def enhance(img: np.ndarray, params: EnhanceParams) -> np.ndarray:
    if params.mode == "global_eq":
        return global_hist_eq(img)
    return local_adaptive_eq(img, params)
