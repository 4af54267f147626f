"""Peg-pair validation, scale inference, and ROI placement/extraction.

The two detected peg circles fix position, orientation and scale: the ROI
square sits at a profile-constant offset from the peg midpoint along the
perpendicular of the peg axis (toward the image-center side, where the
hand is), its base parallel to the axis, its side equal to
round(500 * scale).  The crop is finally resampled to the canonical
500 x 500 raster.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import image
from .errors import AmbiguousPegsWarning, NoPegsFound, RoiUnplaceable, StageError
from .hough import CircleHit, detect_circles
from .profiles import IlluminationProfile

__all__ = [
    "PegPair",
    "RoiSpec",
    "RoiResult",
    "select_peg_pair",
    "infer_scale",
    "compute_roi",
    "extract_roi",
    "extract",
]


@dataclass(frozen=True)
class PegPair:
    left: CircleHit  # smaller cx
    right: CircleHit

    @property
    def axis_angle(self) -> float:
        return math.atan2(self.right.cy - self.left.cy, self.right.cx - self.left.cx)

    @property
    def separation(self) -> float:
        return math.hypot(self.right.cx - self.left.cx, self.right.cy - self.left.cy)

    @property
    def midpoint(self) -> tuple[float, float]:
        return ((self.left.cx + self.right.cx) / 2.0, (self.left.cy + self.right.cy) / 2.0)


@dataclass(frozen=True)
class RoiSpec:
    center: tuple[float, float]
    side: int
    rotation: float  # radians; the square's base is parallel to the peg axis
    clamped: bool = False  # center was translated to keep the square in bounds


@dataclass(frozen=True)
class RoiResult:
    roi: np.ndarray  # exactly 500x500 uint8
    spec: RoiSpec
    scale: float
    pegs: PegPair


def _pair_admissible(a: CircleHit, b: CircleHit, profile: IlluminationProfile) -> bool:
    if min(a.score, b.score) < profile.min_pair_score:
        return False
    r_hi = max(a.r, b.r)
    if r_hi <= 0 or abs(a.r - b.r) / r_hi > profile.radius_similarity:
        return False
    scale = (a.r + b.r) / profile.d_nominal
    if scale <= 0:
        return False
    sep = math.hypot(a.cx - b.cx, a.cy - b.cy)
    lo, hi = profile.separation_range
    return lo <= sep / scale <= hi


def select_peg_pair(hits: list[CircleHit], profile: IlluminationProfile) -> PegPair:
    """Best admissible pair by combined score; warns when two pairs tie
    within 5%."""
    admissible = []
    for a, b in itertools.combinations(hits, 2):
        if _pair_admissible(a, b, profile):
            admissible.append((a.score + b.score, a, b))
    if not admissible:
        raise NoPegsFound(f"no admissible peg pair among {len(hits)} circle hit(s)")
    admissible.sort(key=lambda t: -t[0])
    if len(admissible) > 1 and admissible[1][0] >= 0.95 * admissible[0][0]:
        warnings.warn(
            f"two admissible peg pairs within 5% (scores {admissible[0][0]:.3f} vs "
            f"{admissible[1][0]:.3f}); taking the best",
            AmbiguousPegsWarning,
        )
    _, a, b = admissible[0]
    left, right = (a, b) if a.cx <= b.cx else (b, a)
    return PegPair(left=left, right=right)


def infer_scale(pair: PegPair, profile: IlluminationProfile) -> float:
    """scale = mean peg diameter / nominal diameter."""
    return (pair.left.r + pair.right.r) / profile.d_nominal


def compute_roi(
    pair: PegPair,
    scale: float,
    profile: IlluminationProfile,
    img_dims: tuple[int, int],
) -> RoiSpec:
    """Place the ROI square from the peg geometry.

    The center sits roi_offset_factor * separation from the peg midpoint
    along the axis perpendicular, signed toward the image center (the hand
    side).  If the rotated square would cross the image border, the center
    is translated minimally and the clamp is flagged.
    """
    if scale <= 0:
        raise RoiUnplaceable(f"nonpositive scale {scale}")
    w, h = img_dims
    side = int(round(profile.roi_side_nominal * scale))
    if side < 1:
        raise RoiUnplaceable(f"degenerate ROI side {side}")
    alpha = pair.axis_angle
    mx, my = pair.midpoint
    # offset along the axis perpendicular; the whole vector is flipped, if
    # needed, onto the image-center side (where the hand is)
    off = profile.roi_offset_factor * pair.separation
    ox, oy = -off * math.sin(alpha), off * math.cos(alpha)
    if (w / 2.0 - mx) * ox + (h / 2.0 - my) * oy < 0:
        ox, oy = -ox, -oy
    cx, cy = mx + ox, my + oy

    half = (side - 1) / 2.0 * (abs(math.cos(alpha)) + abs(math.sin(alpha)))
    if 2 * half > w - 1 or 2 * half > h - 1:
        raise RoiUnplaceable(f"side {side} at rotation {alpha:.3f} rad exceeds {w}x{h} image")
    ccx = min(max(cx, half), w - 1 - half)
    ccy = min(max(cy, half), h - 1 - half)
    clamped = (ccx, ccy) != (cx, cy)
    return RoiSpec(center=(ccx, ccy), side=side, rotation=alpha, clamped=clamped)


def extract_roi(img: np.ndarray, spec: RoiSpec) -> np.ndarray:
    """Sample the rotated square bilinearly, then resample to 500x500.

    Rotation 0 with side 500 at an integral position degrades to an exact
    sub-rectangle copy.
    """
    h, w = img.shape
    half = (spec.side - 1) / 2.0 * (abs(math.cos(spec.rotation)) + abs(math.sin(spec.rotation)))
    cx, cy = spec.center
    if cx - half < -1e-9 or cy - half < -1e-9 or cx + half > w - 1 + 1e-9 or cy + half > h - 1 + 1e-9:
        raise RoiUnplaceable(f"square of side {spec.side} at {spec.center} exceeds {w}x{h}")
    u = np.arange(spec.side, dtype=np.float64) - (spec.side - 1) / 2.0
    uu, vv = np.meshgrid(u, u)  # uu along the base, vv along the perpendicular
    ca, sa = math.cos(spec.rotation), math.sin(spec.rotation)
    xs = cx + uu * ca - vv * sa
    ys = cy + uu * sa + vv * ca
    vals = image.bilinear_sample(img.astype(np.float64), xs, ys)
    square = np.clip(np.rint(vals), 0, 255).astype(np.uint8)
    return image.resample(square, 500, 500)


def extract(img: np.ndarray, profile: IlluminationProfile) -> RoiResult:
    """Full pipeline: normalize -> detect circles -> pair -> scale -> ROI.

    Deterministic; stage failures are wrapped in StageError with the stage
    name.
    """
    h, w = img.shape
    try:
        norm = image.normalize_exposure(img, 0.002, 0.99)
    except Exception as exc:
        raise StageError("normalize", exc) from exc
    try:
        hits = detect_circles(norm, profile.canny, profile.hough_for(w))
    except Exception as exc:
        raise StageError("detect_circles", exc) from exc
    try:
        pair = select_peg_pair(hits, profile)
    except Exception as exc:
        raise StageError("select_peg_pair", exc) from exc
    scale = infer_scale(pair, profile)
    try:
        spec = compute_roi(pair, scale, profile, (w, h))
        roi = extract_roi(norm, spec)
    except Exception as exc:
        raise StageError("roi", exc) from exc
    return RoiResult(roi=roi, spec=spec, scale=scale, pegs=pair)
