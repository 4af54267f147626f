"""End-to-end acceptance suite.

Each test covers one shipping criterion and prints a single PASS/FAIL
line.  The shared 200-scene synthetic corpus is generated once per
session; only the processing under test is timed, never the generation.
"""

import json
import math
import time

import numpy as np
import pytest

from veinroi import image, synth
from veinroi.canny import CannyParams, canny, hysteresis, sobel_gradients
from veinroi.dataset import scan_dataset, summary_stats, validate_protocol
from veinroi.enhance import EnhanceParams, global_hist_eq, local_adaptive_eq
from veinroi.errors import VeinRoiError
from veinroi.hough import HoughParams, accumulate
from veinroi.profiles import default_profiles
from veinroi.report import write_results_csv
from veinroi.batch import BatchItem, run_batch
from veinroi.roi import extract, extract_roi

CORPUS_N = 200
CORPUS_SEED = 202


def report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"[criterion {num}] {name}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance") / "corpus"
    manifest = synth.make_corpus(CORPUS_N, CORPUS_SEED, out, width=1000, height=667,
                                 illumination="both")
    return out, manifest


@pytest.fixture(scope="session")
def detections(corpus):
    """Serial extraction over the whole corpus: (record, result-or-None,
    elapsed)."""
    out_dir, manifest = corpus
    profiles = default_profiles()
    results = []
    t0 = time.perf_counter()
    for rec in manifest["records"]:
        img = image.load_image(out_dir / rec["path"])
        try:
            res = extract(img, profiles[rec["illumination"]])
        except VeinRoiError:
            res = None
        results.append((rec, res))
    elapsed = time.perf_counter() - t0
    return results, elapsed


# ---------------------------------------------------------------------------
# scalar oracles (independent of the production vectorized code)


def midpoint_circle_points(r):
    pts = set()
    x, y, d = r, 0, 1 - r
    while x >= y:
        for px, py in ((x, y), (-x, y), (x, -y), (-x, -y),
                       (y, x), (-y, x), (y, -x), (-y, -x)):
            pts.add((px, py))
        y += 1
        if d < 0:
            d += 2 * y + 1
        else:
            x -= 1
            d += 2 * (y - x) + 1
    return pts


def brute_force_accumulator(edges, radii):
    h, w = edges.shape
    votes = np.zeros((len(radii), h, w), dtype=np.int64)
    ys, xs = np.nonzero(edges)
    for ri, r in enumerate(radii):
        offs = midpoint_circle_points(int(r))
        for y, x in zip(ys, xs):
            for dx, dy in offs:
                cx, cy = x + dx, y + dy
                if 0 <= cx < w and 0 <= cy < h:
                    votes[ri, cy, cx] += 1
    return votes


def brute_force_sobel(f, kernel):
    padded = np.pad(f, 1, mode="edge")
    h, w = f.shape
    out = np.zeros_like(f)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(3):
                for j in range(3):
                    if kernel[i, j] != 0.0:
                        acc += kernel[i, j] * padded[y + i, x + j]
            out[y, x] = acc
    return out


def brute_force_hysteresis(thinned, low, high):
    h, w = thinned.shape
    out = np.zeros((h, w), dtype=bool)
    stack = [(y, x) for y in range(h) for x in range(w) if thinned[y, x] >= high]
    while stack:
        y, x = stack.pop()
        if out[y, x] or thinned[y, x] < low:
            continue
        out[y, x] = True
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and not out[ny, nx]:
                    stack.append((ny, nx))
    return out


# ---------------------------------------------------------------------------


def test_criterion_1_hough_oracle_equivalence():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    all_equal = True
    for _ in range(25):
        h = int(rng.integers(16, 65))
        w = int(rng.integers(16, 65))
        edges = rng.random((h, w)) < 0.03
        params = HoughParams(r_min=3, r_max=12, use_gradient=False)
        zeros = np.zeros((h, w))
        from veinroi.canny import GradientField

        grad = GradientField(gx=zeros, gy=zeros, magnitude=zeros, orientation=zeros)
        acc = accumulate(edges, grad, params)
        if not np.array_equal(acc.votes, brute_force_accumulator(edges, params.radii)):
            all_equal = False
            break
    elapsed = time.perf_counter() - t0
    ok = all_equal and elapsed < 10.0
    report(1, "Hough oracle equivalence", ok, f"25 maps, {elapsed:.1f}s")
    assert all_equal
    assert elapsed < 10.0


def test_criterion_2_peg_detection_accuracy(detections):
    results, elapsed = detections
    good = 0
    for rec, res in results:
        if res is None:
            continue
        truth = sorted(rec["peg_centers"])
        hits = sorted(
            [(res.pegs.left.cx, res.pegs.left.cy, res.pegs.left.r),
             (res.pegs.right.cx, res.pegs.right.cy, res.pegs.right.r)]
        )
        if all(
            math.hypot(hx - tx, hy - ty) <= 2.0 and abs(hr - rec["peg_radius"]) <= 2.0
            for (hx, hy, hr), (tx, ty) in zip(hits, truth)
        ):
            good += 1
    rate = good / len(results)
    ok = rate >= 0.99 and elapsed < 120.0
    report(2, "peg detection accuracy", ok,
           f"{good}/{len(results)} scenes within 2 px, {elapsed:.1f}s")
    assert rate >= 0.99
    assert elapsed < 120.0


def test_criterion_3_scale_law(detections):
    results, _ = detections
    worst = 0.0
    sides_ok = True
    n_checked = 0
    for rec, res in results:
        if res is None:
            continue
        n_checked += 1
        rel = abs(res.scale - rec["true_scale"]) / rec["true_scale"]
        worst = max(worst, rel)
        if res.spec.side != round(500 * res.scale):
            sides_ok = False
    ok = worst <= 0.05 and sides_ok and n_checked > 0
    report(3, "scale law", ok, f"max relative error {worst:.3%} over {n_checked} scenes")
    assert n_checked > 0
    assert worst <= 0.05
    assert sides_ok


def test_criterion_4_canny_stage_oracles():
    rng = np.random.default_rng(1004)
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
    sobel_ok = True
    for _ in range(5):
        f = rng.random((32, 32))
        g = sobel_gradients(f)
        if not (np.array_equal(g.gx, brute_force_sobel(f, kx))
                and np.array_equal(g.gy, brute_force_sobel(f, kx.T))):
            sobel_ok = False
    hyst_ok = True
    for _ in range(5):
        t = rng.random((48, 48)) * (rng.random((48, 48)) < 0.2)
        if not np.array_equal(hysteresis(t, 0.3, 0.8), brute_force_hysteresis(t, 0.3, 0.8)):
            hyst_ok = False
    mono_ok = True
    for seed in range(50):
        img = np.random.default_rng(seed).integers(0, 256, size=(48, 48), dtype=np.uint8)
        e_hi = canny(img, CannyParams(sigma=1.0, low_threshold=0.05, high_threshold=0.4))
        e_lo = canny(img, CannyParams(sigma=1.0, low_threshold=0.05, high_threshold=0.2))
        if not (e_lo | e_hi == e_lo).all():
            mono_ok = False
    ok = sobel_ok and hyst_ok and mono_ok
    report(4, "Canny stage oracles", ok,
           f"sobel={sobel_ok} hysteresis={hyst_ok} monotonicity={mono_ok}")
    assert sobel_ok and hyst_ok and mono_ok


def test_criterion_5_database_mimic_constants(tmp_path):
    root = tmp_path / "mimic"
    info = synth.make_database_mimic(root, seed=55)
    manifest = scan_dataset(root)
    stats = summary_stats(manifest)
    protocol = validate_protocol(manifest)
    left_only = all(
        c.hand == "left" for c in manifest.captures if c.subject_id < 72
    )
    counts_ok = stats["subjects"] == 107 and stats["images"] == 1213 == info["images"]
    ok = counts_ok and left_only and protocol.ok
    report(5, "database-mimic constants", ok,
           f"{stats['subjects']} subjects, {stats['images']} images, "
           f"{len(protocol.violations)} violations")
    assert counts_ok
    assert left_only
    assert protocol.ok


def test_criterion_6_determinism(corpus, tmp_path):
    out_dir, manifest = corpus
    profiles = default_profiles()
    # repeated single extraction is bit-identical
    rec = manifest["records"][0]
    img = image.load_image(out_dir / rec["path"])
    r1 = extract(img, profiles[rec["illumination"]])
    r2 = extract(img, profiles[rec["illumination"]])
    single_ok = np.array_equal(r1.roi, r2.roi) and r1.spec == r2.spec

    # batch with 1 vs 8 workers yields identical results files
    items = [BatchItem(str(out_dir / r["path"]), r["illumination"])
             for r in manifest["records"][:16]]
    roi_dir = tmp_path / "rois"
    recs1 = run_batch(items, profiles, "transmitted", str(roi_dir), parallel=1)
    write_results_csv(recs1, tmp_path / "results_1.csv")
    recs8 = run_batch(items, profiles, "transmitted", str(roi_dir), parallel=8)
    write_results_csv(recs8, tmp_path / "results_8.csv")
    batch_ok = (tmp_path / "results_1.csv").read_bytes() == (tmp_path / "results_8.csv").read_bytes()

    ok = single_ok and batch_ok
    report(6, "determinism", ok, f"single={single_ok} batch 1-vs-8 workers={batch_ok}")
    assert single_ok
    assert batch_ok


def test_criterion_7_performance(corpus, tmp_path):
    # single full-resolution extraction
    spec = synth.random_scene(7007, 2784, 1856, "transmitted")
    img, _ = synth.render_scene(spec)
    profile = default_profiles()["transmitted"]
    t0 = time.perf_counter()
    extract(img, profile)
    single = time.perf_counter() - t0

    # 200-scene batch throughput with 4 workers (including enhancement + IO)
    out_dir, manifest = corpus
    items = [BatchItem(str(out_dir / r["path"]), r["illumination"])
             for r in manifest["records"]]
    t0 = time.perf_counter()
    recs = run_batch(items, default_profiles(), "transmitted", str(tmp_path / "rois"),
                     parallel=4, enhance_params=EnhanceParams())
    batch_elapsed = time.perf_counter() - t0
    rate = len(recs) / batch_elapsed

    ok = single <= 2.0 and rate >= 4.0
    report(7, "performance", ok,
           f"full-res extract {single:.2f}s, batch {rate:.1f} img/s with 4 workers")
    assert single <= 2.0
    assert rate >= 4.0


def test_criterion_8_enhancement_properties(detections, corpus):
    out_dir, _ = corpus
    rng = np.random.default_rng(1008)

    degen_ok = True
    for _ in range(5):
        img = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
        single = local_adaptive_eq(img, EnhanceParams(tile_grid=(1, 1), clip_limit=float("inf")))
        if not np.array_equal(single, global_hist_eq(img)):
            degen_ok = False

    const = np.full((64, 64), 70, dtype=np.uint8)
    const_ok = (np.array_equal(global_hist_eq(const), const)
                and np.array_equal(local_adaptive_eq(const, EnhanceParams()), const))

    results, _ = detections
    improved, checked = 0, 0
    for rec, res in results:
        if res is None or rec["illumination"] != "transmitted":
            continue
        mask_img = image.load_image(out_dir / rec["mask_path"])
        mask_roi = extract_roi(mask_img, res.spec) > 127
        if mask_roi.sum() < 50:
            continue
        roi = res.roi
        before = roi[~mask_roi].mean() / max(roi[mask_roi].mean(), 1e-9)
        enhanced = local_adaptive_eq(roi, EnhanceParams())
        after = enhanced[~mask_roi].mean() / max(enhanced[mask_roi].mean(), 1e-9)
        checked += 1
        improved += after > before
    contrast_rate = improved / checked if checked else 0.0
    contrast_ok = checked > 0 and contrast_rate >= 0.95

    ok = degen_ok and const_ok and contrast_ok
    report(8, "enhancement properties", ok,
           f"degenerate-tiling={degen_ok} constants={const_ok} "
           f"contrast improved {improved}/{checked}")
    assert degen_ok
    assert const_ok
    assert contrast_ok
