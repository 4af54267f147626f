"""Illumination profiles: the per-variant parameter bundles.

A profile carries everything the extraction pipeline needs for one
illumination variant: Canny parameters, a Hough template, the nominal peg
diameter and peg separation at the reference raster width, and the ROI
placement constants.  Nominal sizes are expressed at `ref_width` px image
width and scaled linearly to the actual input, so resampled copies of a
scene resolve to the same physical geometry.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

from .canny import CannyParams
from .errors import InvalidParameter
from .hough import HoughParams

__all__ = ["IlluminationProfile", "default_profiles", "load_profile_config"]

# Reference raster geometry (matches the synthetic generator's reference
# scene at full acquisition size).
REF_WIDTH = 2784
REF_HEIGHT = 1856
REF_PEG_RADIUS = 110.0
REF_PEG_SEPARATION = 0.3 * REF_WIDTH  # 835.2 px


@dataclass(frozen=True)
class IlluminationProfile:
    name: str
    wavelength_nm: int
    canny: CannyParams
    hough: HoughParams  # radius range expressed at ref_width
    d_nominal: float = 2 * REF_PEG_RADIUS  # peg diameter at reference plate height
    ref_width: int = REF_WIDTH
    roi_side_nominal: int = 500
    roi_offset_factor: float = 2.0 / 3.0  # ROI offset along peg-axis perpendicular, in separations
    separation_range: tuple[float, float] = (0.7 * REF_PEG_SEPARATION, 1.3 * REF_PEG_SEPARATION)
    radius_similarity: float = 0.25  # max |r1-r2| / max(r1,r2) for a valid pair
    min_pair_score: float = 0.3
    peg_polarity: str = "dark"

    def __post_init__(self):
        if self.d_nominal <= 0:
            raise InvalidParameter("d_nominal must be > 0")
        if self.roi_side_nominal != 500:
            raise InvalidParameter("roi_side_nominal is fixed at 500")
        if not self.separation_range[0] < self.separation_range[1]:
            raise InvalidParameter("separation_range min must be < max")

    def hough_for(self, img_width: int) -> HoughParams:
        """Hough parameters with the radius range scaled to the input width."""
        k = img_width / self.ref_width
        return replace(
            self.hough,
            r_min=max(1, int(math.floor(self.hough.r_min * k))),
            r_max=max(1, int(math.ceil(self.hough.r_max * k))),
            min_center_dist=self.hough.min_center_dist * k,
        )


def _default_hough() -> HoughParams:
    # Radius range: nominal peg radius +/- 40%, at reference width.
    return HoughParams(
        r_min=int(0.6 * REF_PEG_RADIUS),
        r_max=int(math.ceil(1.4 * REF_PEG_RADIUS)),
        r_step=1,
        vote_threshold=0.25,
        min_center_dist=REF_PEG_RADIUS,
        use_gradient=True,
    )


def default_profiles() -> dict[str, IlluminationProfile]:
    """The shipped transmitted/reflected profiles, calibrated on the
    synthetic corpus."""
    transmitted = IlluminationProfile(
        name="transmitted",
        wavelength_nm=950,
        canny=CannyParams(sigma=2.0, low_threshold=0.08, high_threshold=0.20),
        hough=_default_hough(),
    )
    reflected = IlluminationProfile(
        name="reflected",
        wavelength_nm=940,
        canny=CannyParams(sigma=2.0, low_threshold=0.05, high_threshold=0.13),
        hough=_default_hough(),
    )
    return {"transmitted": transmitted, "reflected": reflected}


# ---------------------------------------------------------------------------
# Config file support

_PROFILE_KEYS = {
    "wavelength_nm",
    "canny",
    "hough",
    "d_nominal",
    "ref_width",
    "roi_side_nominal",
    "roi_offset_factor",
    "separation_range",
    "radius_similarity",
    "min_pair_score",
    "peg_polarity",
    "base",
}
_CANNY_KEYS = {"sigma", "low_threshold", "high_threshold"}
_HOUGH_KEYS = {"r_min", "r_max", "r_step", "vote_threshold", "min_center_dist", "use_gradient"}


def _reject_unknown(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise InvalidParameter(f"unknown keys {sorted(unknown)} in {where}")


def load_profile_config(path: str | os.PathLike) -> tuple[dict[str, IlluminationProfile], str]:
    """Load named profiles plus the default selector from a JSON config.

    Schema: {"default_profile": name, "profiles": {name: {...}}}.  Each
    profile may set "base" to one of the shipped profiles and override
    individual fields; unknown keys are rejected.
    """
    with open(path) as fh:
        cfg = json.load(fh)
    _reject_unknown(cfg, {"default_profile", "profiles"}, "config root")
    shipped = default_profiles()
    out = dict(shipped)
    for name, spec in cfg.get("profiles", {}).items():
        _reject_unknown(spec, _PROFILE_KEYS, f"profile {name!r}")
        base = out.get(spec.get("base", name)) or shipped.get(spec.get("base", "transmitted"))
        if base is None:
            raise InvalidParameter(f"profile {name!r}: unknown base {spec.get('base')!r}")
        kwargs: dict = {"name": name}
        for key in ("wavelength_nm", "d_nominal", "ref_width", "roi_side_nominal",
                    "roi_offset_factor", "radius_similarity", "min_pair_score", "peg_polarity"):
            if key in spec:
                kwargs[key] = spec[key]
        if "separation_range" in spec:
            kwargs["separation_range"] = tuple(spec["separation_range"])
        if "canny" in spec:
            _reject_unknown(spec["canny"], _CANNY_KEYS, f"profile {name!r} canny")
            kwargs["canny"] = replace(base.canny, **spec["canny"])
        if "hough" in spec:
            _reject_unknown(spec["hough"], _HOUGH_KEYS, f"profile {name!r} hough")
            kwargs["hough"] = replace(base.hough, **spec["hough"])
        out[name] = replace(base, **kwargs)
    default = cfg.get("default_profile", "transmitted")
    if default not in out:
        raise InvalidParameter(f"default_profile {default!r} not defined")
    return out, default
