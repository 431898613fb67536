"""Typed image manifests: records, census, stratified splits, oversampling.

A manifest is persisted as JSON Lines: a header line carrying the seed and
class census, then one record per line. Record paths are stored relative
to the manifest file where possible so emitted trees are relocatable.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .labels import CellClass, FlowerClass

log = logging.getLogger(__name__)

CLASS_BY_DOMAIN = {"cell": CellClass, "flower": FlowerClass}
SPLITS = ("train", "val", "test", "unassigned")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class SourceRef:
    """Provenance of a cropped patch: source slide and bounding box in source pixels."""

    slide: str
    x: int
    y: int
    w: int
    h: int

    def to_dict(self) -> dict:
        return {"slide": self.slide, "x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, d: dict) -> "SourceRef":
        return cls(slide=d["slide"], x=d["x"], y=d["y"], w=d["w"], h=d["h"])


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    domain: str
    class_label: CellClass | FlowerClass | None = None
    split: str = "unassigned"
    source: SourceRef | None = None

    def __post_init__(self) -> None:
        if self.domain not in CLASS_BY_DOMAIN:
            raise ManifestError(f"unknown domain {self.domain!r}")
        if self.split not in SPLITS:
            raise ManifestError(f"unknown split {self.split!r}")
        if self.class_label is not None:
            expected = CLASS_BY_DOMAIN[self.domain]
            if not isinstance(self.class_label, expected):
                raise ManifestError(
                    f"record {self.id}: class {self.class_label!r} does not belong "
                    f"to domain {self.domain!r}"
                )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "path": self.path,
            "domain": self.domain,
            "class": self.class_label.name if self.class_label else None,
            "split": self.split,
            "source": self.source.to_dict() if self.source else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageRecord":
        domain = d["domain"]
        label = d.get("class")
        return cls(
            id=d["id"],
            path=d["path"],
            domain=domain,
            class_label=CLASS_BY_DOMAIN[domain][label] if label else None,
            split=d.get("split", "unassigned"),
            source=SourceRef.from_dict(d["source"]) if d.get("source") else None,
        )


@dataclass
class DatasetManifest:
    records: list[ImageRecord]
    domain: str
    seed: int = 0

    def __post_init__(self) -> None:
        if self.domain not in CLASS_BY_DOMAIN:
            raise ManifestError(f"unknown domain {self.domain!r}")
        seen: set[str] = set()
        for rec in self.records:
            if rec.domain != self.domain:
                raise ManifestError(f"record {rec.id} has domain {rec.domain!r}, expected {self.domain!r}")
            if rec.id in seen:
                raise ManifestError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def census(self) -> dict[str, int]:
        """Per-class record count, keyed by class name, zero-filled for all classes."""
        counts = {c.name: 0 for c in CLASS_BY_DOMAIN[self.domain]}
        for rec in self.records:
            if rec.class_label is not None:
                counts[rec.class_label.name] += 1
        return counts

    def split_census(self, split: str) -> dict[str, int]:
        counts = {c.name: 0 for c in CLASS_BY_DOMAIN[self.domain]}
        for rec in self.records:
            if rec.split == split and rec.class_label is not None:
                counts[rec.class_label.name] += 1
        return counts

    def subset(self, split: str | None = None, class_label=None) -> "DatasetManifest":
        recs = [
            r
            for r in self.records
            if (split is None or r.split == split)
            and (class_label is None or r.class_label is class_label)
        ]
        return DatasetManifest(records=recs, domain=self.domain, seed=self.seed)

    def by_id(self) -> dict[str, ImageRecord]:
        return {r.id: r for r in self.records}

    # ---------- JSON Lines persistence ----------

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        base = path.parent.resolve()
        lines = [
            json.dumps(
                {"domain": self.domain, "seed": self.seed, "census": self.census},
                sort_keys=True,
            )
        ]
        for rec in self.records:
            d = rec.to_dict()
            d["path"] = _relativize(rec.path, base)
            lines.append(json.dumps(d, sort_keys=True))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        base = path.parent.resolve()
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        if not lines:
            raise ManifestError(f"{path}: empty manifest file")
        header = json.loads(lines[0])
        records = []
        for ln in lines[1:]:
            d = json.loads(ln)
            p = Path(d["path"])
            if not p.is_absolute():
                d["path"] = str(base / p)
            records.append(ImageRecord.from_dict(d))
        m = cls(records=records, domain=header["domain"], seed=header.get("seed", 0))
        stored = header.get("census")
        if stored is not None and dict(stored) != m.census:
            raise ManifestError(f"{path}: stored census does not match record counts")
        return m


def _relativize(path: str, base: Path) -> str:
    try:
        return Path(path).resolve().relative_to(base).as_posix()
    except ValueError:
        return str(path)


# ---------- splits ----------


def _order_key(seed: int, record_id: str) -> str:
    return hashlib.sha256(f"{seed}:{record_id}".encode("utf-8")).hexdigest()


def split_manifest(
    m: DatasetManifest, ratios: tuple[float, float, float], seed: int
) -> DatasetManifest:
    """Assign train/test/val splits, stratified per class.

    ratios are (train, test, val) and must sum to 1. Per class, counts are
    floor-assigned by ratio with the remainder going to train; the order of
    assignment is fixed by hashing (seed, record id), so repeated calls with
    the same inputs produce the same splits.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ManifestError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ManifestError(f"split ratios must be non-negative, got {ratios}")
    r_train, r_test, r_val = ratios

    groups: dict[object, list[ImageRecord]] = {}
    for rec in m.records:
        if rec.class_label is None:
            raise ManifestError(f"record {rec.id} has no class label; cannot stratify")
        groups.setdefault(rec.class_label, []).append(rec)

    assignment: dict[str, str] = {}
    for label, recs in groups.items():
        n = len(recs)
        if n < 3:
            raise ManifestError(
                f"class {label.name} has only {n} record(s); cannot populate all splits"
            )
        n_train = math.floor(r_train * n)
        n_test = math.floor(r_test * n)
        n_val = math.floor(r_val * n)
        n_train += n - (n_train + n_test + n_val)  # remainder goes to train
        ordered = sorted(recs, key=lambda r: (_order_key(seed, r.id), r.id))
        for i, rec in enumerate(ordered):
            if i < n_train:
                assignment[rec.id] = "train"
            elif i < n_train + n_test:
                assignment[rec.id] = "test"
            else:
                assignment[rec.id] = "val"

    new_records = [replace(rec, split=assignment[rec.id]) for rec in m.records]
    return DatasetManifest(records=new_records, domain=m.domain, seed=seed)


# ---------- oversampling ----------


def oversample_training(
    m: DatasetManifest, floor_count: int = 2000, seed: int = 0
) -> DatasetManifest:
    """Duplicate training records of under-represented classes up to floor_count.

    Classes whose train-split count is below floor_count get duplicates drawn
    with replacement (derived ids, same pixels) until the class holds exactly
    floor_count training entries. Classes at or above the floor, and the
    val/test splits, are untouched.
    """
    if floor_count < 1:
        raise ManifestError(f"floor_count must be positive, got {floor_count}")
    if all(rec.split == "unassigned" for rec in m.records):
        raise ManifestError("manifest has no split assignments; run split first")

    by_class: dict[object, list[ImageRecord]] = {}
    for rec in m.records:
        if rec.split == "train" and rec.class_label is not None:
            by_class.setdefault(rec.class_label, []).append(rec)

    present = {rec.class_label for rec in m.records if rec.class_label is not None}
    for label in present:
        if label not in by_class:
            raise ManifestError(f"class {label.name} has zero training records")

    additions: list[ImageRecord] = []
    for label in sorted(by_class, key=lambda c: c.index):
        train_recs = sorted(by_class[label], key=lambda r: r.id)
        n = len(train_recs)
        if n >= floor_count:
            continue
        rng = np.random.default_rng([seed, label.index])
        draws = rng.integers(0, n, size=floor_count - n)
        for j, k in enumerate(draws):
            src = train_recs[int(k)]
            additions.append(replace(src, id=f"{src.id}__os{j}"))

    return DatasetManifest(records=list(m.records) + additions, domain=m.domain, seed=seed)
