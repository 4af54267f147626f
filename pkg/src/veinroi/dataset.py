"""Dataset manifest builder and acquisition-protocol validator.

Directory trees are parsed with a configurable naming convention (a regex
with named groups over the POSIX-style relative path).  Unparseable files
land in the manifest's skipped list instead of being dropped.  Subject
meta data is read from a subjects.csv at the dataset root when present.
"""

from __future__ import annotations

import csv
import fnmatch
import json
import os
import re
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import ConventionError

__all__ = [
    "NamingConvention",
    "SubjectRecord",
    "CaptureRecord",
    "Manifest",
    "ProtocolReport",
    "scan_dataset",
    "validate_protocol",
    "summary_stats",
]

DEFAULT_PATTERN = (
    r"subject_(?P<subject>\d+)/(?P<hand>left|right)_"
    r"(?P<illum>transmitted|reflected)_(?P<shot>\d+)(?P<pump>_pump)?\.(?:pgm|png)$"
)
DEFAULT_IGNORE = ("*.json", "*.csv", "masks/*")


@dataclass(frozen=True)
class NamingConvention:
    pattern: str = DEFAULT_PATTERN
    ignore: tuple[str, ...] = DEFAULT_IGNORE

    def compiled(self) -> re.Pattern:
        try:
            rx = re.compile(self.pattern)
        except re.error as exc:
            raise ConventionError(f"invalid pattern: {exc}") from exc
        missing = {"subject", "hand", "illum", "shot"} - set(rx.groupindex)
        if missing:
            raise ConventionError(f"pattern lacks required groups {sorted(missing)}")
        return rx

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "NamingConvention":
        with open(path) as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - {"pattern", "ignore"}
        if unknown:
            raise ConventionError(f"unknown convention keys {sorted(unknown)}")
        conv = cls(pattern=cfg.get("pattern", DEFAULT_PATTERN),
                   ignore=tuple(cfg.get("ignore", DEFAULT_IGNORE)))
        conv.compiled()
        return conv


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: int
    age: int | None = None
    sex: str | None = None  # "m" / "f"
    weight: float | None = None
    bp_systolic: int | None = None
    bp_diastolic: int | None = None
    event: str | None = None


@dataclass(frozen=True)
class CaptureRecord:
    subject_id: int
    hand: str
    illumination: str
    shot_index: int
    pumping: bool
    path: str  # relative to the dataset root


@dataclass
class Manifest:
    root: str
    subjects: list[SubjectRecord] = field(default_factory=list)
    captures: list[CaptureRecord] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "veinroi-manifest",
                "root": self.root,
                "subjects": [asdict(s) for s in self.subjects],
                "captures": [asdict(c) for c in self.captures],
                "skipped": self.skipped,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "Manifest":
        with open(path) as fh:
            d = json.load(fh)
        return cls(
            root=d["root"],
            subjects=[SubjectRecord(**s) for s in d["subjects"]],
            captures=[CaptureRecord(**c) for c in d["captures"]],
            skipped=list(d["skipped"]),
        )


def _load_subjects_csv(path: Path) -> dict[int, SubjectRecord]:
    out: dict[int, SubjectRecord] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            sid = int(row["subject_id"])
            out[sid] = SubjectRecord(
                subject_id=sid,
                age=int(row["age"]) if row.get("age") else None,
                sex=row.get("sex") or None,
                weight=float(row["weight"]) if row.get("weight") else None,
                bp_systolic=int(row["bp_systolic"]) if row.get("bp_systolic") else None,
                bp_diastolic=int(row["bp_diastolic"]) if row.get("bp_diastolic") else None,
                event=row.get("event") or None,
            )
    return out


def scan_dataset(root: str | os.PathLike, convention: NamingConvention | None = None) -> Manifest:
    """Build a deterministic manifest from a directory tree.

    Records are sorted by (subject, hand, illumination, shot); files that
    do not match the convention are listed in `skipped`.
    """
    convention = convention or NamingConvention()
    rx = convention.compiled()
    root = Path(root)
    if not root.is_dir():
        raise OSError(f"not a directory: {root}")
    captures: list[CaptureRecord] = []
    skipped: list[str] = []
    for p in sorted(root.rglob("*")):
        if not p.is_file():
            continue
        rel = p.relative_to(root).as_posix()
        if any(fnmatch.fnmatch(rel, pat) for pat in convention.ignore):
            continue
        m = rx.search(rel)
        if m is None:
            skipped.append(rel)
            continue
        captures.append(
            CaptureRecord(
                subject_id=int(m.group("subject")),
                hand=m.group("hand"),
                illumination=m.group("illum"),
                shot_index=int(m.group("shot")),
                pumping=bool(m.groupdict().get("pump")),
                path=rel,
            )
        )
    captures.sort(key=lambda c: (c.subject_id, c.hand, c.illumination, c.shot_index))

    meta: dict[int, SubjectRecord] = {}
    meta_csv = root / "subjects.csv"
    if meta_csv.is_file():
        meta = _load_subjects_csv(meta_csv)
    seen = sorted({c.subject_id for c in captures} | set(meta))
    subjects = [meta.get(sid, SubjectRecord(subject_id=sid)) for sid in seen]
    return Manifest(root=str(root), subjects=subjects, captures=captures, skipped=sorted(skipped))


@dataclass
class ProtocolReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_protocol(m: Manifest, both_hands_from: int = 72) -> ProtocolReport:
    """Check the acquisition protocol: >= 3 shots per recorded sequence,
    pumping exactly on the final shot, unique shot indices, and (as a
    warning) no right-hand captures before the both-hands era."""
    report = ProtocolReport()
    seqs: dict[tuple[int, str, str], list[CaptureRecord]] = {}
    for c in m.captures:
        seqs.setdefault((c.subject_id, c.hand, c.illumination), []).append(c)
    for (sid, hand, illum), caps in sorted(seqs.items()):
        label = f"subject {sid} {hand}/{illum}"
        shots = [c.shot_index for c in caps]
        if len(set(shots)) != len(shots):
            report.violations.append(f"{label}: duplicate shot indices {sorted(shots)}")
        if len(caps) < 3:
            report.violations.append(f"{label}: only {len(caps)} shot(s), need >= 3")
        final = max(caps, key=lambda c: c.shot_index)
        if not final.pumping:
            report.violations.append(f"{label}: final shot {final.shot_index} lacks the pumping flag")
        for c in caps:
            if c.pumping and c is not final:
                report.violations.append(f"{label}: pumping flag on non-final shot {c.shot_index}")
        if hand == "right" and sid < both_hands_from:
            report.warnings.append(
                f"{label}: right-hand capture in the left-hand-only era (subject id < {both_hands_from})"
            )
    return report


def _hist(values: list[float], edges: list[float]) -> dict[str, int]:
    out: dict[str, int] = {}
    for lo, hi in zip(edges[:-1], edges[1:]):
        key = f"[{lo:g},{hi:g})"
        out[key] = sum(1 for v in values if lo <= v < hi)
    return out


def summary_stats(m: Manifest) -> dict:
    """Totals, per-category counts, and meta-field histograms."""
    per_illum: dict[str, int] = {}
    per_hand: dict[str, int] = {}
    for c in m.captures:
        per_illum[c.illumination] = per_illum.get(c.illumination, 0) + 1
        per_hand[c.hand] = per_hand.get(c.hand, 0) + 1
    per_event: dict[str, int] = {}
    for s in m.subjects:
        if s.event:
            per_event[s.event] = per_event.get(s.event, 0) + 1
    ages = [s.age for s in m.subjects if s.age is not None]
    weights = sorted(s.weight for s in m.subjects if s.weight is not None)
    sexes = [s.sex for s in m.subjects if s.sex]
    bps = [s.bp_systolic for s in m.subjects if s.bp_systolic is not None]

    def quartiles(vals):
        if not vals:
            return None
        q = lambda f: vals[min(len(vals) - 1, int(f * (len(vals) - 1)))]
        return [vals[0], q(0.25), q(0.5), q(0.75), vals[-1]]

    return {
        "subjects": len(m.subjects),
        "images": len(m.captures),
        "skipped": len(m.skipped),
        "per_illumination": dict(sorted(per_illum.items())),
        "per_hand": dict(sorted(per_hand.items())),
        "per_event": dict(sorted(per_event.items())),
        "age_deciles": _hist([float(a) for a in ages], [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 200]) if ages else {},
        "sex_split": {s: sexes.count(s) for s in sorted(set(sexes))},
        "weight_quartiles": quartiles(weights),
        "bp_systolic_ranges": _hist([float(b) for b in bps], [0, 120, 130, 140, 300]) if bps else {},
    }
