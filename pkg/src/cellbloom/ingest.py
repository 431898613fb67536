"""Dataset ingestion: crop cell patches from annotated region images and
index a class-per-directory flower collection into manifests."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .imaging import save_image
from .labels import CellClass, FlowerClass
from .manifest import DatasetManifest, ImageRecord, SourceRef

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class IngestError(ValueError):
    pass


def crop_box(
    cx: float, cy: float, patch_size: int, width: int, height: int
) -> tuple[int, int, int, int]:
    """Square crop of side patch_size centered on (cx, cy), clamped to the
    image by shifting (never shrinking). Returns (left, top, right, bottom),
    right/bottom exclusive."""
    if width < patch_size or height < patch_size:
        raise IngestError(
            f"image {width}x{height} smaller than patch size {patch_size}; cannot crop"
        )
    left = int(round(cx - patch_size / 2))
    top = int(round(cy - patch_size / 2))
    left = min(max(left, 0), width - patch_size)
    top = min(max(top, 0), height - patch_size)
    return left, top, left + patch_size, top + patch_size


def _load_annotations(annotation_file: Path) -> list[dict]:
    doc = json.loads(Path(annotation_file).read_text(encoding="utf-8"))
    if isinstance(doc, dict):
        doc = doc.get("annotations", doc.get("entries"))
    if not isinstance(doc, list):
        raise IngestError(f"{annotation_file}: expected a JSON list of annotation entries")
    return doc


def ingest_cells(
    annotation_file: str | Path,
    image_root: str | Path,
    out_root: str | Path,
    patch_size: int = 64,
    seed: int = 0,
) -> DatasetManifest:
    """Crop one square patch per bounding-box annotation and build a manifest.

    The annotation document is a JSON list of entries
    {slide, x, y, w, h, label}; slide names an image under image_root.
    Boxes fully outside their image are skipped (counted in a warning);
    a missing image file is an error naming the offending entry.
    """
    if patch_size < 16:
        raise IngestError(f"patch_size must be >= 16, got {patch_size}")
    image_root = Path(image_root)
    out_root = Path(out_root)
    entries = _load_annotations(Path(annotation_file))

    slides: dict[str, np.ndarray] = {}
    records: list[ImageRecord] = []
    skipped = 0
    for i, entry in enumerate(entries):
        slide = entry["slide"]
        label = CellClass.from_name(entry["label"])
        x, y, w, h = (int(entry[k]) for k in ("x", "y", "w", "h"))

        if slide not in slides:
            slide_path = image_root / slide
            if not slide_path.exists():
                raise IngestError(f"entry {i} ({slide!r}): image file not found at {slide_path}")
            with Image.open(slide_path) as im:
                slides[slide] = np.asarray(im.convert("RGB"), dtype=np.float32) / 127.5 - 1.0
        arr = slides[slide]
        height, width = arr.shape[:2]

        if x >= width or y >= height or x + w <= 0 or y + h <= 0:
            skipped += 1
            continue

        left, top, right, bottom = crop_box(x + w / 2, y + h / 2, patch_size, width, height)
        patch = arr[top:bottom, left:right, :]

        rec_id = f"{Path(slide).stem}_{i:06d}"
        patch_path = out_root / "cell" / label.name / f"{rec_id}.png"
        save_image(patch, patch_path)
        records.append(
            ImageRecord(
                id=rec_id,
                path=str(patch_path),
                domain="cell",
                class_label=label,
                source=SourceRef(slide=slide, x=x, y=y, w=w, h=h),
            )
        )

    if skipped:
        log.warning("skipped %d annotation(s) with boxes fully outside their image", skipped)
    manifest = DatasetManifest(records=records, domain="cell", seed=seed)
    log.info("ingested %d cell patches (census: %s)", len(records), manifest.census)
    return manifest


def default_flower_aliases() -> dict[str, FlowerClass]:
    aliases: dict[str, FlowerClass] = {}
    for f in FlowerClass:
        aliases[f.name] = f
        aliases[f.name + "s"] = f
    return aliases


def ingest_flowers(
    image_root: str | Path,
    aliases: dict[str, FlowerClass] | None = None,
    seed: int = 0,
) -> DatasetManifest:
    """Index a directory tree with one subdirectory per flower class.

    Subdirectory names are mapped to classes through an alias table
    (canonical names and their plurals by default); any unmatched
    subdirectory is an error listing the offending names.
    """
    image_root = Path(image_root)
    if not image_root.is_dir():
        raise IngestError(f"image root {image_root} is not a directory")
    aliases = aliases if aliases is not None else default_flower_aliases()

    subdirs = sorted(p for p in image_root.iterdir() if p.is_dir())
    unknown = [p.name for p in subdirs if p.name not in aliases]
    if unknown:
        raise IngestError(f"unmatched class directories: {', '.join(sorted(unknown))}")

    records: list[ImageRecord] = []
    for sub in subdirs:
        label = aliases[sub.name]
        for img_path in sorted(sub.iterdir()):
            if img_path.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            records.append(
                ImageRecord(
                    id=f"{label.name}_{img_path.stem}",
                    path=str(img_path),
                    domain="flower",
                    class_label=label,
                )
            )
    manifest = DatasetManifest(records=records, domain="flower", seed=seed)
    log.info("indexed %d flower images (census: %s)", len(records), manifest.census)
    return manifest
