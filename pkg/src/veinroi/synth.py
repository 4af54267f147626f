"""Deterministic synthetic NIR hand-scene generator with ground truth.

Scenes mimic the acquisition geometry: two dark peg discs near the lower
image third, a hand silhouette above them, and a branching vein tree
inside the hand.  Transmitted scenes show a bright hand with
high-contrast dark veins; reflected scenes a dimmer hand with
low-contrast veins, drawing only the shallow branches.  All geometry is
derived from a reference raster of 2784 x 1856 and scales linearly with
the render width, so `true_scale` equals the peg diameter ratio the
pipeline is expected to infer.

Rendering is a pure function of the scene spec; corpus generation derives
one child seed per scene so corpora are pure functions of (n, seed,
ranges).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import image
from .errors import InvalidParameter, InvalidSpec
from .profiles import REF_WIDTH, REF_PEG_RADIUS

__all__ = [
    "VeinBranch",
    "SceneSpec",
    "GroundTruth",
    "VariationRanges",
    "render_scene",
    "random_scene",
    "make_corpus",
    "make_database_mimic",
    "MIMIC_SUBJECTS",
    "MIMIC_IMAGES",
    "MIMIC_BOTH_HANDS_FROM",
]

# Reference-frame geometry, as fractions of the render size
_PEG_Y = 0.75
_PEG_X = (0.35, 0.65)
_PEG_R_FRAC = REF_PEG_RADIUS / REF_WIDTH
_HAND_A_FRAC = 0.17  # ellipse semi-axis along x, fraction of width
_HAND_B_FRAC = 0.30  # along y, fraction of height
_ROI_OFFSET_FACTOR = 2.0 / 3.0  # keep in sync with the default profiles

_LEVELS = {
    # background, hand tissue, vein stroke, peg (dark polarity)
    "transmitted": (0.35, 0.85, 0.30, 0.05),
    "reflected": (0.20, 0.55, 0.46, 0.05),
}


@dataclass(frozen=True)
class VeinBranch:
    points: np.ndarray  # (n, 2) float, image coordinates (x, y), pre-rotation
    width: float  # stroke width in px
    shallow: bool  # drawn in reflected mode too


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int
    height: int
    illumination: str
    peg_centers: tuple[tuple[float, float], tuple[float, float]]
    peg_radius: float
    hand_center: tuple[float, float]
    hand_axes: tuple[float, float]
    hand_orientation: float
    hand_scale: float  # plate-height factor relative to the reference scene
    vein_tree: tuple[VeinBranch, ...]
    exposure_gain: float = 1.0
    noise_sigma: float = 0.0
    rotation: float = 0.0  # whole-scene rotation about the image center
    peg_polarity: str = "dark"


@dataclass(frozen=True)
class GroundTruth:
    peg_centers: tuple[tuple[float, float], tuple[float, float]]  # post-rotation
    peg_radius: float
    true_scale: float
    hand_center: tuple[float, float]  # post-rotation
    vein_mask: np.ndarray  # bool raster
    illumination: str


@dataclass(frozen=True)
class VariationRanges:
    scale: tuple[float, float] = (0.8, 1.3)
    rotation_deg: tuple[float, float] = (-15.0, 15.0)
    translation: float = 100.0  # +/- px at 1000 px width, scaled with render width
    exposure_gain: tuple[float, float] = (0.6, 1.4)
    noise_sigma_max: float = 4.0 / 255.0


def _rotate(pts: np.ndarray, angle: float, center: tuple[float, float]) -> np.ndarray:
    ca, sa = math.cos(angle), math.sin(angle)
    p = np.asarray(pts, dtype=np.float64) - center
    return np.stack([p[..., 0] * ca - p[..., 1] * sa, p[..., 0] * sa + p[..., 1] * ca], axis=-1) + center


def _validate_spec(spec: SceneSpec) -> None:
    if spec.width < 32 or spec.height < 32:
        raise InvalidSpec(f"render size too small: {spec.width}x{spec.height}")
    if spec.illumination not in _LEVELS:
        raise InvalidSpec(f"unknown illumination {spec.illumination!r}")
    if spec.exposure_gain <= 0:
        raise InvalidSpec("exposure_gain must be > 0")
    if spec.noise_sigma < 0:
        raise InvalidSpec("noise_sigma must be >= 0")
    if spec.peg_polarity not in ("dark", "bright"):
        raise InvalidSpec(f"peg_polarity must be dark or bright, got {spec.peg_polarity!r}")
    c = (spec.width / 2.0, spec.height / 2.0)
    for px, py in spec.peg_centers:
        rx, ry = _rotate(np.array([px, py]), spec.rotation, c)
        r = spec.peg_radius
        if not (r <= rx <= spec.width - 1 - r and r <= ry <= spec.height - 1 - r):
            raise InvalidSpec(f"peg at ({rx:.0f},{ry:.0f}) r={r:.0f} leaves the image bounds")
        hx, hy = spec.hand_center
        if math.hypot(px - hx, py - hy) <= r:
            raise InvalidSpec("peg circle overlaps the hand-center annotation")


def _ellipse_alpha(X, Y, center, axes, angle, soft=2.0):
    a, b = axes
    xr = (X - center[0]) * math.cos(angle) + (Y - center[1]) * math.sin(angle)
    yr = -(X - center[0]) * math.sin(angle) + (Y - center[1]) * math.cos(angle)
    f = np.sqrt((xr / a) ** 2 + (yr / b) ** 2)
    d = (1.0 - f) * min(a, b)  # approximate signed distance, px
    return np.clip(d / soft + 0.5, 0.0, 1.0)


def _stamp_branch(dist: np.ndarray, pts: np.ndarray, pad: float) -> None:
    """Min-distance field update for one polyline, restricted to its
    neighborhood."""
    h, w = dist.shape
    for i in range(len(pts) - 1):
        p0, p1 = pts[i], pts[i + 1]
        x0 = int(max(0, math.floor(min(p0[0], p1[0]) - pad)))
        x1 = int(min(w, math.ceil(max(p0[0], p1[0]) + pad) + 1))
        y0 = int(max(0, math.floor(min(p0[1], p1[1]) - pad)))
        y1 = int(min(h, math.ceil(max(p0[1], p1[1]) + pad) + 1))
        if x0 >= x1 or y0 >= y1:
            continue
        gx, gy = np.meshgrid(np.arange(x0, x1, dtype=np.float64), np.arange(y0, y1, dtype=np.float64))
        vx, vy = p1[0] - p0[0], p1[1] - p0[1]
        seg2 = vx * vx + vy * vy
        if seg2 == 0:
            d = np.hypot(gx - p0[0], gy - p0[1])
        else:
            t = np.clip(((gx - p0[0]) * vx + (gy - p0[1]) * vy) / seg2, 0.0, 1.0)
            d = np.hypot(gx - (p0[0] + t * vx), gy - (p0[1] + t * vy))
        np.minimum(dist[y0:y1, x0:x1], d, out=dist[y0:y1, x0:x1])


def render_scene(spec: SceneSpec) -> tuple[np.ndarray, GroundTruth]:
    """Render a scene and its ground truth; same spec gives identical
    bytes."""
    _validate_spec(spec)
    w, h = spec.width, spec.height
    c = (w / 2.0, h / 2.0)
    bg, hand_lvl, vein_lvl, peg_lvl = _LEVELS[spec.illumination]
    if spec.peg_polarity == "bright":
        peg_lvl = 0.95

    # pre-rotate all geometry so primitives render unrotated
    pegs = [tuple(_rotate(np.array(p), spec.rotation, c)) for p in spec.peg_centers]
    hand_c = tuple(_rotate(np.array(spec.hand_center), spec.rotation, c))
    hand_angle = spec.hand_orientation + spec.rotation

    Y, X = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.full((h, w), bg)

    halpha = _ellipse_alpha(X, Y, hand_c, spec.hand_axes, hand_angle)
    img += (hand_lvl - bg) * halpha

    mask = np.zeros((h, w), dtype=bool)
    for branch in spec.vein_tree:
        if spec.illumination == "reflected" and not branch.shallow:
            continue
        pts = _rotate(branch.points, spec.rotation, c)
        dist = np.full((h, w), np.inf)
        _stamp_branch(dist, pts, branch.width / 2.0 + 2.0)
        va = np.clip((branch.width / 2.0 - dist) + 0.5, 0.0, 1.0) * halpha
        img = img * (1.0 - va) + vein_lvl * va
        mask |= (dist < branch.width / 2.0) & (halpha > 0.99)

    for px, py in pegs:
        d = np.hypot(X - px, Y - py)
        pa = np.clip(spec.peg_radius + 0.5 - d, 0.0, 1.0)
        img = img * (1.0 - pa) + peg_lvl * pa

    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        img = img + rng.normal(0.0, spec.noise_sigma, img.shape)
    img = np.clip(img * spec.exposure_gain, 0.0, 1.0)

    truth = GroundTruth(
        peg_centers=(tuple(pegs[0]), tuple(pegs[1])),
        peg_radius=spec.peg_radius,
        true_scale=spec.hand_scale * w / REF_WIDTH,
        hand_center=hand_c,
        vein_mask=mask,
        illumination=spec.illumination,
    )
    return image.to_u8(img), truth


# ---------------------------------------------------------------------------
# Procedural scene construction


def _grow_vein_tree(rng: np.random.Generator, hand_c, axes, angle, base_width: float) -> list[VeinBranch]:
    """Recursive branching polylines, cubic-smoothed, kept inside the
    hand."""
    from scipy.interpolate import CubicSpline

    a, b = axes
    branches: list[VeinBranch] = []

    def inside(p, margin=0.78):
        xr = (p[0] - hand_c[0]) * math.cos(angle) + (p[1] - hand_c[1]) * math.sin(angle)
        yr = -(p[0] - hand_c[0]) * math.sin(angle) + (p[1] - hand_c[1]) * math.cos(angle)
        return (xr / a) ** 2 + (yr / b) ** 2 <= margin**2

    def grow(start, direction, width, depth, shallow):
        pts = [np.array(start, dtype=np.float64)]
        d = direction
        step = max(6.0, 0.10 * b)
        for _ in range(rng.integers(4, 9)):
            d = d + rng.normal(0.0, 0.45)
            nxt = pts[-1] + step * np.array([math.cos(d), math.sin(d)])
            if not inside(nxt):
                break
            pts.append(nxt)
            if depth < 2 and rng.random() < 0.3:
                grow(nxt, d + rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.1),
                     width * 0.7, depth + 1, bool(rng.random() < 0.7))
        if len(pts) < 2:
            return
        arr = np.array(pts)
        if len(arr) >= 3:
            t = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(arr, axis=0).T))])
            if t[-1] > 0:
                cs_x = CubicSpline(t, arr[:, 0])
                cs_y = CubicSpline(t, arr[:, 1])
                ts = np.linspace(0.0, t[-1], max(8, int(t[-1] / 3.0)))
                arr = np.stack([cs_x(ts), cs_y(ts)], axis=1)
        branches.append(VeinBranch(points=arr, width=width, shallow=shallow))

    n_trunks = int(rng.integers(2, 5))
    for _ in range(n_trunks):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        start = (
            hand_c[0] + rng.uniform(-0.2, 0.2) * a,
            hand_c[1] + rng.uniform(-0.2, 0.2) * b,
        )
        grow(start, ang, base_width, 0, bool(rng.random() < 0.6))
    return branches


def random_scene(
    seed: int,
    width: int = 1000,
    height: int = 667,
    illumination: str = "transmitted",
    ranges: VariationRanges = VariationRanges(),
) -> SceneSpec:
    """Draw a scene spec deterministically from the seed.

    Pose parameters are redrawn until both pegs land fully inside the
    image, so every returned spec renders cleanly.
    """
    if illumination not in _LEVELS:
        raise InvalidParameter(f"unknown illumination {illumination!r}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xD0,)))
    c = np.array([width / 2.0, height / 2.0])
    t_max = ranges.translation * width / 1000.0

    for _ in range(200):
        s = rng.uniform(*ranges.scale)
        rot = math.radians(rng.uniform(*ranges.rotation_deg))
        tx = rng.uniform(-t_max, t_max)
        ty = rng.uniform(-t_max, t_max)
        gain = rng.uniform(*ranges.exposure_gain)
        noise = rng.uniform(0.0, ranges.noise_sigma_max)

        peg_r = _PEG_R_FRAC * width * s
        pegs = []
        for fx in _PEG_X:
            base = np.array([fx * width, _PEG_Y * height])
            pegs.append(tuple(c + s * (base - c) + [tx, ty]))
        sep = math.hypot(pegs[1][0] - pegs[0][0], pegs[1][1] - pegs[0][1])
        mid = np.array([(pegs[0][0] + pegs[1][0]) / 2.0, (pegs[0][1] + pegs[1][1]) / 2.0])
        hand_c = tuple(mid - [0.0, _ROI_OFFSET_FACTOR * sep])
        spec = SceneSpec(
            seed=seed,
            width=width,
            height=height,
            illumination=illumination,
            peg_centers=(pegs[0], pegs[1]),
            peg_radius=peg_r,
            hand_center=hand_c,
            hand_axes=(_HAND_A_FRAC * width * s, _HAND_B_FRAC * height * s),
            hand_orientation=0.0,
            hand_scale=s,
            vein_tree=tuple(
                _grow_vein_tree(rng, hand_c, (_HAND_A_FRAC * width * s, _HAND_B_FRAC * height * s),
                                0.0, base_width=max(2.0, 0.006 * width * s))
            ),
            exposure_gain=gain,
            noise_sigma=noise,
            rotation=rot,
        )
        try:
            _validate_spec(spec)
        except InvalidSpec:
            continue
        return spec
    raise InvalidSpec("could not place pegs inside the image for these ranges")


# ---------------------------------------------------------------------------
# Corpus generation


def _child_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


def _truth_record(path: str, mask_path: str, truth: GroundTruth, spec: SceneSpec) -> dict:
    return {
        "path": path,
        "mask_path": mask_path,
        "peg_centers": [list(p) for p in truth.peg_centers],
        "peg_radius": truth.peg_radius,
        "true_scale": truth.true_scale,
        "hand_center": list(truth.hand_center),
        "illumination": truth.illumination,
        "scene": {
            "seed": spec.seed,
            "width": spec.width,
            "height": spec.height,
            "hand_scale": spec.hand_scale,
            "rotation": spec.rotation,
            "exposure_gain": spec.exposure_gain,
            "noise_sigma": spec.noise_sigma,
        },
    }


def make_corpus(
    n: int,
    seed: int,
    out_dir: str | os.PathLike,
    width: int = 1000,
    height: int = 667,
    illumination: str = "both",
    ranges: VariationRanges = VariationRanges(),
) -> dict:
    """Render n scenes plus a ground-truth manifest into out_dir.

    illumination "both" alternates transmitted/reflected.  Returns the
    manifest dict (also written as manifest.json).
    """
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    out_dir = os.fspath(out_dir)
    os.makedirs(os.path.join(out_dir, "masks"), exist_ok=True)
    records = []
    for i in range(n):
        illum = illumination if illumination != "both" else ("transmitted" if i % 2 == 0 else "reflected")
        spec = random_scene(_child_seed(seed, i), width, height, illum, ranges)
        img, truth = render_scene(spec)
        name = f"scene_{i:04d}.pgm"
        mask_name = os.path.join("masks", f"scene_{i:04d}_mask.pgm")
        image.save_image(img, os.path.join(out_dir, name))
        image.save_image(truth.vein_mask.astype(np.uint8) * 255, os.path.join(out_dir, mask_name))
        records.append(_truth_record(name, mask_name, truth, spec))
    manifest = {"kind": "veinroi-synth-corpus", "n": n, "seed": seed, "records": records}
    image.write_atomic(os.path.join(out_dir, "manifest.json"),
                       json.dumps(manifest, indent=1).encode())
    return manifest


# Acquisition-protocol mimic layout constants
MIMIC_SUBJECTS = 107
MIMIC_IMAGES = 1213
MIMIC_BOTH_HANDS_FROM = 72
_MIMIC_EVENTS = [("lange-nacht-2014", 43), ("open-house", 16), ("i-day", 12), ("invitation", 36)]


def _mimic_sequences() -> list[tuple[int, str, str]]:
    seqs = []
    for sid in range(1, MIMIC_SUBJECTS + 1):
        hands = ["left"] if sid < MIMIC_BOTH_HANDS_FROM else ["left", "right"]
        for hand in hands:
            for illum in ("transmitted", "reflected"):
                seqs.append((sid, hand, illum))
    return seqs


def mimic_shot_counts() -> dict[tuple[int, str, str], int]:
    """Deterministic shot distribution summing to exactly 1213 images."""
    seqs = _mimic_sequences()
    base, extra = divmod(MIMIC_IMAGES, len(seqs))  # 4 shots each, 69 sequences get 5
    return {seq: base + (1 if i < extra else 0) for i, seq in enumerate(seqs)}


def _mimic_subjects_meta(seed: int) -> list[dict]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xEE,)))
    events = []
    for name, count in _MIMIC_EVENTS:
        events.extend([name] * count)
    rows = []
    for sid in range(1, MIMIC_SUBJECTS + 1):
        sys_bp = int(rng.integers(100, 150))
        rows.append(
            {
                "subject_id": sid,
                "age": int(rng.integers(18, 75)),
                "sex": "m" if rng.random() < 0.55 else "f",
                "weight": round(float(rng.uniform(48, 110)), 1),
                "bp_systolic": sys_bp,
                "bp_diastolic": int(sys_bp - rng.integers(30, 55)),
                "event": events[sid - 1],
            }
        )
    return rows


def make_database_mimic(
    out_dir: str | os.PathLike,
    seed: int,
    width: int = 174,
    height: int = 116,
) -> dict:
    """Generate the acquisition-protocol mimic tree: 107 subjects, 1213
    images, left hand only below subject 72, >= 3 shots per sequence, and
    the pumping flag on every final shot."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    counts = mimic_shot_counts()
    hand_idx = {"left": 0, "right": 1}
    illum_idx = {"transmitted": 0, "reflected": 1}
    n_written = 0
    ranges = VariationRanges(rotation_deg=(-8.0, 8.0), translation=40.0, noise_sigma_max=2.0 / 255.0)
    for (sid, hand, illum), n_shots in counts.items():
        subdir = os.path.join(out_dir, f"subject_{sid:03d}")
        os.makedirs(subdir, exist_ok=True)
        for shot in range(1, n_shots + 1):
            cseed = _child_seed(seed, sid, hand_idx[hand], illum_idx[illum], shot)
            spec = random_scene(cseed, width, height, illum, ranges)
            img, _ = render_scene(spec)
            pump = "_pump" if shot == n_shots else ""
            image.save_image(img, os.path.join(subdir, f"{hand}_{illum}_{shot:02d}{pump}.pgm"))
            n_written += 1

    meta = _mimic_subjects_meta(seed)
    lines = ["subject_id,age,sex,weight,bp_systolic,bp_diastolic,event"]
    for row in meta:
        lines.append(",".join(str(row[k]) for k in
                              ("subject_id", "age", "sex", "weight", "bp_systolic", "bp_diastolic", "event")))
    image.write_atomic(os.path.join(out_dir, "subjects.csv"), ("\n".join(lines) + "\n").encode())
    info = {
        "kind": "veinroi-database-mimic",
        "seed": seed,
        "subjects": MIMIC_SUBJECTS,
        "images": n_written,
        "shots_per_sequence": {f"{s}/{h}/{i}": c for (s, h, i), c in counts.items()},
    }
    image.write_atomic(os.path.join(out_dir, "mimic_info.json"), json.dumps(info, indent=1).encode())
    return info
