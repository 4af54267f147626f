"""Batch extraction over directories or synthetic-corpus manifests.

Each image is processed independently; per-image failures are recorded
and never abort the run.  With parallel workers the record content is
identical to a serial run (records are sorted by input path before any
output is written).
"""

from __future__ import annotations

import json
import os
from multiprocessing import get_context

import numpy as np

from . import image
from .enhance import EnhanceParams, enhance
from .errors import StageError
from .profiles import IlluminationProfile
from .report import ExtractRecord
from .roi import extract

__all__ = ["BatchItem", "collect_inputs", "run_batch", "draw_overlay"]

_IMAGE_EXTS = (".pgm", ".png")


class BatchItem:
    def __init__(self, path: str, illumination: str | None = None):
        self.path = path
        self.illumination = illumination


def collect_inputs(src: str) -> list[BatchItem]:
    """Accept a directory, a synth-corpus manifest.json, or a single image.

    Corpus manifests contribute their illumination tags so per-image
    profile resolution can follow them.
    """
    if os.path.isfile(src) and src.endswith(".json"):
        with open(src) as fh:
            manifest = json.load(fh)
        base = os.path.dirname(os.path.abspath(src))
        return [
            BatchItem(os.path.join(base, rec["path"]), rec.get("illumination"))
            for rec in manifest.get("records", [])
        ]
    if os.path.isdir(src):
        items = []
        for dirpath, _dirnames, filenames in sorted(os.walk(src)):
            for name in sorted(filenames):
                if name.lower().endswith(_IMAGE_EXTS) and "mask" not in name:
                    items.append(BatchItem(os.path.join(dirpath, name)))
        return items
    return [BatchItem(src)]


def process_one(
    path: str,
    profile: IlluminationProfile,
    out_path: str | None,
    enhance_params: EnhanceParams | None,
) -> ExtractRecord:
    rec = ExtractRecord(input=path, profile=profile.name)
    try:
        img = image.load_image(path)
        result = extract(img, profile)
        roi = result.roi
        if enhance_params is not None:
            roi = enhance(roi, enhance_params)
        if out_path:
            image.save_image(roi, out_path)
            rec.output = out_path
        rec.result = result
    except StageError as exc:
        rec.status, rec.stage, rec.error = "error", exc.stage, str(exc.cause)
    except Exception as exc:
        rec.status, rec.stage, rec.error = "error", "io", str(exc)
    return rec


def _worker(args) -> ExtractRecord:
    return process_one(*args)


def run_batch(
    items: list[BatchItem],
    profiles: dict[str, IlluminationProfile],
    default_name: str,
    out_dir: str,
    explicit_profile: str | None = None,
    parallel: int = 1,
    enhance_params: EnhanceParams | None = None,
) -> list[ExtractRecord]:
    """Resolve a profile per item (flag > illumination tag > default) and
    extract everything, returning records sorted by input path."""
    os.makedirs(out_dir, exist_ok=True)
    jobs = []
    for item in items:
        name = explicit_profile or item.illumination or default_name
        profile = profiles[name]
        stem = os.path.splitext(os.path.basename(item.path))[0]
        jobs.append((item.path, profile, os.path.join(out_dir, f"{stem}_roi.pgm"), enhance_params))
    if parallel > 1 and len(jobs) > 1:
        with get_context("fork").Pool(parallel) as pool:
            records = pool.map(_worker, jobs, chunksize=4)
    else:
        records = [_worker(j) for j in jobs]
    return sorted(records, key=lambda r: r.input)


# ---------------------------------------------------------------------------
# Diagnostic overlay


def _draw_circle(img: np.ndarray, cx: float, cy: float, r: float, value: int) -> None:
    from .hough import circle_offsets

    h, w = img.shape
    dx, dy = circle_offsets(max(1, int(round(r))))
    xs = np.clip(int(round(cx)) + dx, 0, w - 1)
    ys = np.clip(int(round(cy)) + dy, 0, h - 1)
    img[ys, xs] = value


def _draw_segment(img: np.ndarray, p0, p1, value: int) -> None:
    h, w = img.shape
    n = int(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1]))) + 1
    xs = np.clip(np.rint(np.linspace(p0[0], p1[0], n)).astype(int), 0, w - 1)
    ys = np.clip(np.rint(np.linspace(p0[1], p1[1], n)).astype(int), 0, h - 1)
    img[ys, xs] = value


def draw_overlay(img: np.ndarray, hits, roi_spec=None) -> np.ndarray:
    """Rasterize detected circles (and optionally the ROI square) onto a
    copy."""
    import math

    out = img.copy()
    for hit in hits:
        _draw_circle(out, hit.cx, hit.cy, hit.r, 255)
        _draw_circle(out, hit.cx, hit.cy, max(1.0, hit.r - 1), 0)
    if roi_spec is not None:
        ca, sa = math.cos(roi_spec.rotation), math.sin(roi_spec.rotation)
        hs = (roi_spec.side - 1) / 2.0
        cx, cy = roi_spec.center
        corners = [
            (cx + u * ca - v * sa, cy + u * sa + v * ca)
            for u, v in ((-hs, -hs), (hs, -hs), (hs, hs), (-hs, hs))
        ]
        for i in range(4):
            _draw_segment(out, corners[i], corners[(i + 1) % 4], 255)
    return out
