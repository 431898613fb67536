"""Turn labeled cell records into annotation tasks by rendering each one
into the flower domain through its class's trained model."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..imaging import load_image, save_image
from ..labels import CellClass, ClassPairMap
from ..manifest import DatasetManifest, ImageRecord
from .store import AnnotationStore, AnnotationTask

log = logging.getLogger(__name__)


class TaskCreationError(ValueError):
    pass


def create_tasks(
    cell_manifest: DatasetManifest,
    checkpoints: dict[CellClass, object],
    data_dir: str | Path,
    pair_map: ClassPairMap | None = None,
    required_annotations: int = 3,
) -> AnnotationStore:
    """One task per labeled cell record: the cell image is transformed to
    its paired flower domain and written under data_dir/images. Returns the
    store with all tasks persisted."""
    data_dir = Path(data_dir)
    pair_map = pair_map if pair_map is not None else ClassPairMap()

    by_class: dict[CellClass, list[ImageRecord]] = {}
    for rec in cell_manifest.records:
        if rec.class_label is None:
            raise TaskCreationError(f"record {rec.id} has no class label; cannot route")
        by_class.setdefault(rec.class_label, []).append(rec)
    missing = [c.name for c in by_class if c not in checkpoints]
    if missing:
        raise TaskCreationError(
            f"no trained checkpoint for class(es): {', '.join(sorted(missing))}"
        )

    ordered = sorted(cell_manifest.records, key=lambda r: r.id)
    index_of = {rec.id: i for i, rec in enumerate(ordered)}

    store = AnnotationStore(
        data_dir, pair_map=pair_map, required_annotations=required_annotations
    )
    tasks: list[AnnotationTask] = []
    for label in sorted(by_class, key=lambda c: c.index):
        ckpt = checkpoints[label]
        records = sorted(by_class[label], key=lambda r: r.id)
        size = ckpt.cfg.image_size if getattr(ckpt, "cfg", None) is not None else None
        batch = np.stack([load_image(r.path, size=size) for r in records])
        flowers = ckpt.translate(batch, "ab")
        for rec, img in zip(records, flowers):
            task_id = f"task_{index_of[rec.id]:05d}"
            image_path = data_dir / "images" / f"{task_id}.png"
            save_image(img, image_path)
            tasks.append(
                AnnotationTask(
                    task_id=task_id,
                    image_path=str(image_path),
                    required_annotations=required_annotations,
                    source_record_id=rec.id,
                    source_record_path=rec.path,
                    source_cell_class=label,
                    pair_flower_class=pair_map.to_flower(label),
                )
            )

    store.add_tasks(sorted(tasks, key=lambda t: t.task_id))
    log.info("created %d annotation task(s) in %s", len(tasks), data_dir)
    return store
