"""Circular Hough transform with parameter-space peak extraction.

The accumulator has 1-pixel center bins and one radius plane per stepped
radius.  Scores are votes normalized by the ideal circumference 2*pi*r so
one vote threshold serves the whole radius range.

Two voting modes:
  * gradient-directed (default): each edge pixel casts 2 votes per radius,
    at the two candidate centers along +/- the gradient direction.  This is
    the fast mode used on full-size images.
  * full: each edge pixel votes on the whole midpoint-rasterized circle of
    candidate centers, one vote per rasterized center.  This is the exact
    mode the brute-force oracle checks bin-for-bin.

On large inputs `detect_circles` runs detection on a block-averaged
downscale and refines every hit with a local full vote at native
resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import ndimage

from . import image
from .canny import NORM_PCT, CannyParams, GradientField, non_max_suppression, sobel_gradients, hysteresis
from .errors import DimensionMismatch, InvalidParameter

__all__ = [
    "HoughParams",
    "Accumulator",
    "CircleHit",
    "circle_offsets",
    "accumulate",
    "find_peaks",
    "detect_circles",
]


@dataclass(frozen=True)
class HoughParams:
    r_min: int
    r_max: int
    r_step: int = 1
    vote_threshold: float = 0.3  # fraction of ideal circumference
    min_center_dist: float = 0.0
    use_gradient: bool = True

    def __post_init__(self):
        if not (1 <= self.r_min <= self.r_max):
            raise InvalidParameter(f"need 1 <= r_min <= r_max, got [{self.r_min}, {self.r_max}]")
        if self.r_step < 1:
            raise InvalidParameter(f"r_step must be >= 1, got {self.r_step}")
        if not (0 < self.vote_threshold <= 1):
            raise InvalidParameter(f"vote_threshold must be in (0,1], got {self.vote_threshold}")
        if self.min_center_dist < 0:
            raise InvalidParameter("min_center_dist must be >= 0")

    @property
    def radii(self) -> np.ndarray:
        return np.arange(self.r_min, self.r_max + 1, self.r_step, dtype=np.int64)


@dataclass(frozen=True)
class Accumulator:
    votes: np.ndarray  # (n_r, height, width) int64
    r_values: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        n_r, h, w = self.votes.shape
        return (w, h, n_r)

    def scores(self) -> np.ndarray:
        return self.votes / (2.0 * np.pi * self.r_values)[:, None, None]


@dataclass(frozen=True)
class CircleHit:
    cx: float
    cy: float
    r: float
    score: float


@lru_cache(maxsize=256)
def circle_offsets(r: int) -> tuple[np.ndarray, np.ndarray]:
    """Unique (dx, dy) offsets of the midpoint-rasterized circle of radius r."""
    pts = set()
    x, y = r, 0
    err = 1 - r
    while x >= y:
        for dx, dy in ((x, y), (y, x)):
            pts.add((dx, dy))
            pts.add((-dx, dy))
            pts.add((dx, -dy))
            pts.add((-dx, -dy))
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1
    arr = np.array(sorted(pts), dtype=np.int64)
    return arr[:, 0].copy(), arr[:, 1].copy()


def accumulate(edges: np.ndarray, grad: GradientField, params: HoughParams) -> Accumulator:
    """Vote edge pixels into the (cx, cy, r) accumulator."""
    edges = np.asarray(edges, dtype=bool)
    if edges.shape != grad.shape:
        raise DimensionMismatch(f"edges {edges.shape} vs gradient {grad.shape}")
    h, w = edges.shape
    radii = params.radii
    votes = np.zeros((len(radii), h, w), dtype=np.int64)
    ys, xs = np.nonzero(edges)
    if len(xs) == 0:
        return Accumulator(votes=votes, r_values=radii)

    if params.use_gradient:
        mag = grad.magnitude[ys, xs]
        safe = mag > 0
        ux = np.where(safe, grad.gx[ys, xs] / np.where(safe, mag, 1.0), 0.0)
        uy = np.where(safe, grad.gy[ys, xs] / np.where(safe, mag, 1.0), 0.0)
        for ri, r in enumerate(radii):
            plane = votes[ri]
            for sign in (1.0, -1.0):
                cx = np.rint(xs + sign * r * ux).astype(np.int64)
                cy = np.rint(ys + sign * r * uy).astype(np.int64)
                ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h) & safe
                np.add.at(plane, (cy[ok], cx[ok]), 1)
    else:
        for ri, r in enumerate(radii):
            dx, dy = circle_offsets(int(r))
            cx = (xs[:, None] + dx[None, :]).ravel()
            cy = (ys[:, None] + dy[None, :]).ravel()
            ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
            np.add.at(votes[ri], (cy[ok], cx[ok]), 1)
    return Accumulator(votes=votes, r_values=radii)


def _order_hits(cands: list[CircleHit]) -> list[CircleHit]:
    return sorted(cands, key=lambda c: (-c.score, c.r, c.cy, c.cx))


def _greedy_suppress(cands: list[CircleHit], min_center_dist: float) -> list[CircleHit]:
    accepted: list[CircleHit] = []
    for c in cands:
        if all(math.hypot(c.cx - a.cx, c.cy - a.cy) > min_center_dist for a in accepted):
            accepted.append(c)
    return accepted


def find_peaks(acc: Accumulator, params: HoughParams) -> list[CircleHit]:
    """Thresholded 3x3x3 local maxima, greedily deduped by center distance.

    Ties break by (score desc, r asc, cy asc, cx asc), making the output a
    deterministic function of the accumulator.
    """
    scores = acc.scores()
    if scores.size == 0 or scores.max() <= 0:
        return []
    local_max = scores >= ndimage.maximum_filter(scores, size=3, mode="constant", cval=0.0)
    cand_mask = (scores >= params.vote_threshold) & local_max
    rs, cys, cxs = np.nonzero(cand_mask)
    cands = [
        CircleHit(cx=float(cx), cy=float(cy), r=float(acc.r_values[ri]), score=float(scores[ri, cy, cx]))
        for ri, cy, cx in zip(rs, cys, cxs)
    ]
    return _greedy_suppress(_order_hits(cands), params.min_center_dist)


# ---------------------------------------------------------------------------
# Full detection with downscale-then-refine


def _canny_stages(img: np.ndarray, params: CannyParams) -> tuple[np.ndarray, GradientField]:
    """Edge map plus the gradient field (the Hough voter needs both)."""
    norm = image.normalize_exposure(img, *NORM_PCT)
    f = image.gaussian_blur(image.to_float(norm), params.sigma)
    grad = sobel_gradients(f)
    thinned = non_max_suppression(grad)
    edges = hysteresis(thinned, params.low_threshold, params.high_threshold)
    return edges, grad


def _block_mean(img: np.ndarray, factor: int) -> np.ndarray:
    h, w = img.shape
    h2, w2 = (h // factor) * factor, (w // factor) * factor
    blocks = img[:h2, :w2].astype(np.float64).reshape(h2 // factor, factor, w2 // factor, factor)
    return np.clip(np.rint(blocks.mean(axis=(1, 3))), 0, 255).astype(np.uint8)


def _refine_hit(
    img: np.ndarray,
    hit: CircleHit,
    canny_params: CannyParams,
    params: HoughParams,
    center_window: int = 8,
    radius_window: int = 4,
) -> CircleHit | None:
    """Local full vote at native resolution around a coarse hit.

    Candidate centers span +/-center_window px, radii +/-radius_window px
    (clipped to the params range); each edge pixel in the crop votes for
    the radius bin nearest its distance to each candidate center.
    """
    h, w = img.shape
    cx0, cy0 = int(round(hit.cx)), int(round(hit.cy))
    r0 = int(round(hit.r))
    r_lo = max(params.r_min, r0 - radius_window)
    r_hi = min(params.r_max, r0 + radius_window)
    if r_lo > r_hi:
        return None
    margin = r_hi + center_window + int(math.ceil(3 * canny_params.sigma)) + 3
    x0, x1 = max(0, cx0 - margin), min(w, cx0 + margin + 1)
    y0, y1 = max(0, cy0 - margin), min(h, cy0 + margin + 1)
    crop = img[y0:y1, x0:x1]
    if crop.shape[0] < 3 or crop.shape[1] < 3:
        return None
    f = image.gaussian_blur(image.to_float(crop), canny_params.sigma)
    grad = sobel_gradients(f)
    thinned = non_max_suppression(grad)
    edges = hysteresis(thinned, canny_params.low_threshold, canny_params.high_threshold)
    eys, exs = np.nonzero(edges)
    if len(exs) == 0:
        return None

    ccx = np.arange(max(0, cx0 - center_window), min(w - 1, cx0 + center_window) + 1)
    ccy = np.arange(max(0, cy0 - center_window), min(h - 1, cy0 + center_window) + 1)
    gcx, gcy = np.meshgrid(ccx, ccy)  # (ny, nx)
    dx = (exs[:, None] + x0) - gcx.ravel()[None, :]
    dy = (eys[:, None] + y0) - gcy.ravel()[None, :]
    dist = np.hypot(dx, dy)
    ridx = np.rint(dist).astype(np.int64) - r_lo
    n_r = r_hi - r_lo + 1
    ok = (ridx >= 0) & (ridx < n_r)
    flat = np.where(ok, np.arange(gcx.size)[None, :] * n_r + ridx, 0)
    counts = np.bincount(flat[ok].ravel(), minlength=gcx.size * n_r).reshape(gcx.size, n_r)
    radii = np.arange(r_lo, r_hi + 1)
    scores = counts / (2.0 * np.pi * radii)[None, :]
    best = scores.max()
    if best <= 0:
        return None
    # same tie order as _order_hits: score desc, then r, cy, cx ascending
    cis, ris = np.nonzero(scores == best)
    order = sorted(
        zip(cis, ris),
        key=lambda t: (radii[t[1]], gcy.ravel()[t[0]], gcx.ravel()[t[0]]),
    )
    ci, ri = order[0]
    return CircleHit(
        cx=float(gcx.ravel()[ci]),
        cy=float(gcy.ravel()[ci]),
        r=float(radii[ri]),
        score=float(best),
    )


def detect_circles(
    img: np.ndarray,
    canny_params: CannyParams,
    params: HoughParams,
    downscale: int | None = None,
) -> list[CircleHit]:
    """Canny -> accumulate -> find_peaks, sorted by score descending.

    With downscale=None a 4x block-averaged pass is used when the image and
    radius range are large enough; every coarse hit is then refined by a
    local full vote at native resolution.  downscale=1 forces direct
    detection at native resolution.
    """
    h, w = img.shape
    if downscale is None:
        downscale = 4 if (min(h, w) >= 512 and params.r_min >= 8) else 1

    if downscale <= 1:
        edges, grad = _canny_stages(img, canny_params)
        acc = accumulate(edges, grad, params)
        return find_peaks(acc, params)

    ds = downscale
    small = _block_mean(img, ds)
    small_params = replace(
        params,
        r_min=max(1, params.r_min // ds),
        r_max=max(1, int(math.ceil(params.r_max / ds))),
        min_center_dist=params.min_center_dist / ds,
        use_gradient=True,
    )
    edges, grad = _canny_stages(small, canny_params)
    coarse = find_peaks(accumulate(edges, grad, small_params), small_params)

    norm = image.normalize_exposure(img, *NORM_PCT)
    refined: list[CircleHit] = []
    for hit in coarse:
        up = CircleHit(
            cx=hit.cx * ds + (ds - 1) / 2.0,
            cy=hit.cy * ds + (ds - 1) / 2.0,
            r=hit.r * ds,
            score=hit.score,
        )
        fine = _refine_hit(norm, up, canny_params, params, center_window=2 * ds, radius_window=ds + 2)
        if fine is not None:
            refined.append(fine)
    return _greedy_suppress(_order_hits(refined), params.min_center_dist)
