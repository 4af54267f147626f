"""Delimited result records and the report figures.

Batch and stats reports write CSV next to PNG figures rendered with the
Agg backend, so runs stay headless-safe.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .image import write_atomic
from .roi import RoiResult

__all__ = ["ExtractRecord", "write_results_csv", "batch_figures", "stats_csv", "stats_figures"]

RESULT_FIELDS = [
    "input",
    "status",
    "stage",
    "error",
    "profile",
    "left_cx",
    "left_cy",
    "left_r",
    "left_score",
    "right_cx",
    "right_cy",
    "right_r",
    "right_score",
    "scale",
    "roi_cx",
    "roi_cy",
    "roi_side",
    "roi_rotation",
    "clamped",
    "output",
]


@dataclass
class ExtractRecord:
    input: str
    profile: str
    status: str = "ok"  # or "error"
    stage: str = ""
    error: str = ""
    output: str = ""
    result: RoiResult | None = None

    def row(self) -> dict:
        d = {k: "" for k in RESULT_FIELDS}
        d.update(input=self.input, status=self.status, stage=self.stage,
                 error=self.error, profile=self.profile, output=self.output)
        r = self.result
        if r is not None:
            d.update(
                left_cx=f"{r.pegs.left.cx:.1f}", left_cy=f"{r.pegs.left.cy:.1f}",
                left_r=f"{r.pegs.left.r:.1f}", left_score=f"{r.pegs.left.score:.3f}",
                right_cx=f"{r.pegs.right.cx:.1f}", right_cy=f"{r.pegs.right.cy:.1f}",
                right_r=f"{r.pegs.right.r:.1f}", right_score=f"{r.pegs.right.score:.3f}",
                scale=f"{r.scale:.4f}",
                roi_cx=f"{r.spec.center[0]:.1f}", roi_cy=f"{r.spec.center[1]:.1f}",
                roi_side=r.spec.side, roi_rotation=f"{r.spec.rotation:.4f}",
                clamped=int(r.spec.clamped),
            )
        return d


def write_results_csv(records: list[ExtractRecord], path: str | os.PathLike) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RESULT_FIELDS)
    writer.writeheader()
    for rec in sorted(records, key=lambda r: r.input):
        writer.writerow(rec.row())
    write_atomic(path, buf.getvalue().encode())


def summarize(records: list[ExtractRecord]) -> dict:
    n = len(records)
    ok = [r for r in records if r.status == "ok"]
    failures: dict[str, int] = {}
    for r in records:
        if r.status != "ok":
            failures[r.stage or "unknown"] = failures.get(r.stage or "unknown", 0) + 1
    scales = [r.result.scale for r in ok if r.result is not None]
    return {
        "images": n,
        "succeeded": len(ok),
        "failed": n - len(ok),
        "success_rate": (len(ok) / n) if n else 0.0,
        "mean_scale": (sum(scales) / len(scales)) if scales else None,
        "failures_by_stage": dict(sorted(failures.items())),
    }


def batch_figures(records: list[ExtractRecord], out_dir: str | os.PathLike) -> list[str]:
    """Scale histogram and failures-by-stage chart next to the CSV."""
    out_dir = os.fspath(out_dir)
    written = []
    scales = [r.result.scale for r in records if r.status == "ok" and r.result is not None]
    summary = summarize(records)

    fig, ax = plt.subplots(figsize=(6, 4))
    if scales:
        ax.hist(scales, bins=30, color="#4878d0", edgecolor="black", linewidth=0.5)
    ax.set_xlabel("inferred scale")
    ax.set_ylabel("images")
    ax.set_title(f"Inferred scale over {summary['succeeded']} successful extractions")
    fig.tight_layout()
    path = os.path.join(out_dir, "scale_histogram.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    stages = ["ok"] + sorted(summary["failures_by_stage"])
    counts = [summary["succeeded"]] + [summary["failures_by_stage"][s] for s in stages[1:]]
    colors = ["#55a868"] + ["#c44e52"] * (len(stages) - 1)
    ax.bar(stages, counts, color=colors)
    ax.set_ylabel("images")
    ax.set_title("Outcomes by pipeline stage")
    fig.tight_layout()
    path = os.path.join(out_dir, "outcomes.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def stats_csv(stats: dict, path: str | os.PathLike) -> None:
    """Flatten the stats dict into key,value rows."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["key", "value"])

    def emit(prefix: str, obj) -> None:
        if isinstance(obj, dict):
            for k, v in obj.items():
                emit(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(obj, list):
            writer.writerow([prefix, ";".join(str(v) for v in obj)])
        else:
            writer.writerow([prefix, "" if obj is None else obj])

    emit("", stats)
    write_atomic(path, buf.getvalue().encode())


def stats_figures(stats: dict, out_dir: str | os.PathLike) -> list[str]:
    out_dir = os.fspath(out_dir)
    written = []

    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    if stats.get("age_deciles"):
        axes[0].bar(list(stats["age_deciles"]), list(stats["age_deciles"].values()), color="#4878d0")
        axes[0].tick_params(axis="x", rotation=60)
    axes[0].set_title("Age deciles")
    if stats.get("sex_split"):
        axes[1].bar(list(stats["sex_split"]), list(stats["sex_split"].values()), color="#dd8452")
    axes[1].set_title("Sex split")
    cats = stats.get("per_illumination", {})
    if cats:
        axes[2].bar(list(cats), list(cats.values()), color="#55a868")
    axes[2].set_title("Images per illumination")
    fig.tight_layout()
    path = os.path.join(out_dir, "dataset_stats.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
