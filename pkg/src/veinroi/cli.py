"""Command-line entry point.

Subcommands: extract, batch, synth, manifest, validate, stats, enhance,
detect.  Exit codes: 0 success, 1 pipeline/validation failure, 2 usage
error.  Output files are written atomically (temp + rename).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import image
from .batch import collect_inputs, draw_overlay, process_one, run_batch
from .dataset import Manifest, NamingConvention, scan_dataset, summary_stats, validate_protocol
from .enhance import EnhanceParams, enhance
from .errors import StageError, VeinRoiError
from .hough import detect_circles
from .profiles import default_profiles, load_profile_config
from .report import batch_figures, stats_csv, stats_figures, summarize, write_results_csv
from .roi import extract
from .synth import VariationRanges, make_corpus, make_database_mimic, random_scene, render_scene

USAGE_ERROR = 2
PIPELINE_ERROR = 1


def _load_profiles(args) -> tuple[dict, str]:
    if getattr(args, "config", None):
        return load_profile_config(args.config)
    return default_profiles(), "transmitted"


def _resolve_profile(args, profiles, default_name):
    name = getattr(args, "profile", None) or default_name
    if name not in profiles:
        print(f"error: unknown profile {name!r} (have: {', '.join(sorted(profiles))})", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    return profiles[name]


def _record_lines(rec) -> str:
    row = rec.row()
    return "\n".join(f"{k}={row[k]}" for k in row if row[k] != "")


def cmd_extract(args) -> int:
    profiles, default_name = _load_profiles(args)
    profile = _resolve_profile(args, profiles, default_name)
    if not os.path.isfile(args.input):
        print(f"error: input not found: {args.input}", file=sys.stderr)
        return USAGE_ERROR
    enhance_params = None if args.no_enhance else EnhanceParams()
    rec = process_one(args.input, profile, args.out, enhance_params)
    print(_record_lines(rec))
    if rec.status != "ok":
        print(f"error: stage {rec.stage}: {rec.error}", file=sys.stderr)
        return PIPELINE_ERROR
    if args.overlay:
        img = image.load_image(args.input)
        r = rec.result
        image.save_image(draw_overlay(img, [r.pegs.left, r.pegs.right], r.spec), args.overlay)
    return 0


def cmd_batch(args) -> int:
    profiles, default_name = _load_profiles(args)
    if args.profile and args.profile not in profiles:
        print(f"error: unknown profile {args.profile!r}", file=sys.stderr)
        return USAGE_ERROR
    if not os.path.exists(args.input):
        print(f"error: input not found: {args.input}", file=sys.stderr)
        return USAGE_ERROR
    items = collect_inputs(args.input)
    enhance_params = None if args.no_enhance else EnhanceParams()
    records = run_batch(
        items, profiles, default_name, args.out_dir,
        explicit_profile=args.profile, parallel=args.parallel, enhance_params=enhance_params,
    )
    write_results_csv(records, os.path.join(args.out_dir, "results.csv"))
    summary = summarize(records)
    image.write_atomic(os.path.join(args.out_dir, "summary.json"),
                       json.dumps(summary, indent=1).encode())
    if not args.no_figures:
        batch_figures(records, args.out_dir)
    print(f"{summary['images']} images, {summary['succeeded']} succeeded, "
          f"{summary['failed']} failed (success rate {summary['success_rate']:.1%})")
    for stage, count in summary["failures_by_stage"].items():
        print(f"  failures in {stage}: {count}")
    return PIPELINE_ERROR if summary["failed"] else 0


def cmd_synth(args) -> int:
    try:
        if args.database_mimic:
            info = make_database_mimic(args.out, seed=args.seed, width=args.width, height=args.height)
            print(f"database mimic: {info['subjects']} subjects, {info['images']} images in {args.out}")
            return 0
        ranges = VariationRanges(
            scale=(args.scale_min, args.scale_max),
            rotation_deg=(-args.rotation_max, args.rotation_max),
            translation=args.translation_max,
            exposure_gain=(args.gain_min, args.gain_max),
            noise_sigma_max=args.noise_max,
        )
        if args.corpus:
            make_corpus(args.corpus, seed=args.seed, out_dir=args.out,
                        width=args.width, height=args.height,
                        illumination=args.illumination, ranges=ranges)
            print(f"{args.corpus} scenes in {args.out}")
            return 0
        illum = args.illumination if args.illumination != "both" else "transmitted"
        spec = random_scene(args.seed, args.width, args.height, illum, ranges)
        img, truth = render_scene(spec)
        image.save_image(img, args.out)
        print(f"scene: pegs {truth.peg_centers[0]} / {truth.peg_centers[1]} "
              f"r={truth.peg_radius:.1f} scale={truth.true_scale:.3f}")
        return 0
    except VeinRoiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def _convention(args) -> NamingConvention:
    if args.convention:
        return NamingConvention.from_json(args.convention)
    return NamingConvention()


def cmd_manifest(args) -> int:
    m = scan_dataset(args.root, _convention(args))
    image.write_atomic(args.out, m.to_json().encode())
    print(f"{len(m.subjects)} subjects, {len(m.captures)} captures, {len(m.skipped)} skipped -> {args.out}")
    return 0


def cmd_validate(args) -> int:
    m = Manifest.from_json(args.manifest)
    report = validate_protocol(m)
    for v in report.violations:
        print(f"violation: {v}")
    for w in report.warnings:
        print(f"warning: {w}")
    print(f"{len(report.violations)} violation(s), {len(report.warnings)} warning(s)")
    return PIPELINE_ERROR if report.violations else 0


def cmd_stats(args) -> int:
    m = Manifest.from_json(args.manifest)
    stats = summary_stats(m)
    out_csv = args.out or (os.path.splitext(args.manifest)[0] + "_stats.csv")
    stats_csv(stats, out_csv)
    if not args.no_figures:
        stats_figures(stats, os.path.dirname(os.path.abspath(out_csv)))
    print(f"subjects={stats['subjects']} images={stats['images']}")
    for key in ("per_illumination", "per_hand", "per_event"):
        if stats[key]:
            print(f"{key}: " + ", ".join(f"{k}={v}" for k, v in stats[key].items()))
    return 0


def cmd_enhance(args) -> int:
    try:
        img = image.load_image(args.input)
    except (OSError, VeinRoiError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    params = EnhanceParams(tile_grid=(args.tiles, args.tiles), clip_limit=args.clip, mode=args.mode)
    image.save_image(enhance(img, params), args.out)
    return 0


def cmd_detect(args) -> int:
    profiles, default_name = _load_profiles(args)
    profile = _resolve_profile(args, profiles, default_name)
    if not os.path.isfile(args.input):
        print(f"error: input not found: {args.input}", file=sys.stderr)
        return USAGE_ERROR
    img = image.load_image(args.input)
    hits = detect_circles(img, profile.canny, profile.hough_for(img.shape[1]))
    print("cx\tcy\tr\tscore")
    for h in hits:
        print(f"{h.cx:.1f}\t{h.cy:.1f}\t{h.r:.1f}\t{h.score:.3f}")
    if args.overlay:
        image.save_image(draw_overlay(img, hits), args.overlay)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veinroi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_profile_opts(p):
        p.add_argument("--profile", help="illumination profile name")
        p.add_argument("--config", help="JSON profile config file")

    p = sub.add_parser("extract", help="extract the 500x500 ROI from one image")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output ROI path (.pgm)")
    add_profile_opts(p)
    p.add_argument("--overlay", help="write a diagnostic overlay image here")
    p.add_argument("--no-enhance", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("batch", help="extract ROIs for a directory or corpus manifest")
    p.add_argument("input", help="directory, corpus manifest.json, or image")
    p.add_argument("--out-dir", required=True)
    add_profile_opts(p)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--no-enhance", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("synth", help="render synthetic scenes / corpora")
    p.add_argument("--out", required=True, help="output image path or corpus directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", type=int, help="number of scenes to generate")
    p.add_argument("--database-mimic", action="store_true",
                   help="generate the 107-subject / 1213-image protocol mimic tree")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--illumination", choices=["transmitted", "reflected", "both"], default="both")
    p.add_argument("--scale-min", type=float, default=0.8)
    p.add_argument("--scale-max", type=float, default=1.3)
    p.add_argument("--rotation-max", type=float, default=15.0)
    p.add_argument("--translation-max", type=float, default=100.0)
    p.add_argument("--gain-min", type=float, default=0.6)
    p.add_argument("--gain-max", type=float, default=1.4)
    p.add_argument("--noise-max", type=float, default=4.0 / 255.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("manifest", help="scan a dataset tree into a manifest")
    p.add_argument("root")
    p.add_argument("--out", required=True)
    p.add_argument("--convention", help="JSON naming-convention config")
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("validate", help="check a manifest against the acquisition protocol")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="summary statistics for a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="stats CSV path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("enhance", help="contrast-enhance a ROI image")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--tiles", type=int, default=8)
    p.add_argument("--clip", type=float, default=2.0)
    p.add_argument("--mode", choices=["global_eq", "local_adaptive"], default="local_adaptive")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("detect", help="debug: list detected circles")
    p.add_argument("input")
    add_profile_opts(p)
    p.add_argument("--overlay")
    p.set_defaults(func=cmd_detect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth":
        if args.width is None:
            args.width = 174 if args.database_mimic else 1000
        if args.height is None:
            args.height = 116 if args.database_mimic else 667
    try:
        return args.func(args)
    except VeinRoiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PIPELINE_ERROR


if __name__ == "__main__":
    sys.exit(main())
