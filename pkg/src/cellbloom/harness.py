"""Experiment orchestration: reconstruct test cells through their per-pair
translation models, evaluate the classifier on real vs reconstructed sets,
and assemble the report."""
from __future__ import annotations

import datetime
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .cytoclass import CellTypeClassifier, ConfusionMatrix, EvaluationResult, evaluate
from .imaging import load_image, save_image
from .labels import CellClass
from .manifest import DatasetManifest, ImageRecord

log = logging.getLogger(__name__)

RECONSTRUCTED_SUFFIX = "__rec"


class HarnessError(ValueError):
    pass


def build_reconstructed_testset(
    cell_test: DatasetManifest,
    checkpoints: dict[CellClass, object],
    out_root: str | Path,
) -> DatasetManifest:
    """Send every test cell through its own class's model (cell -> flower ->
    cell) and write the reconstructions as a parallel manifest. Routing uses
    the record's true class label; ids gain a fixed suffix so they map back
    to the originals bijectively."""
    out_root = Path(out_root)
    by_class: dict[CellClass, list[ImageRecord]] = {}
    for rec in cell_test.records:
        if rec.class_label is None:
            raise HarnessError(f"record {rec.id} has no class label; cannot route")
        by_class.setdefault(rec.class_label, []).append(rec)

    missing = [c.name for c in by_class if c not in checkpoints]
    if missing:
        raise HarnessError(f"no trained checkpoint for class(es): {', '.join(sorted(missing))}")

    new_records: list[ImageRecord] = []
    for label in sorted(by_class, key=lambda c: c.index):
        ckpt = checkpoints[label]
        records = sorted(by_class[label], key=lambda r: r.id)
        size = ckpt.cfg.image_size if getattr(ckpt, "cfg", None) is not None else None
        batch = np.stack([load_image(r.path, size=size) for r in records])
        reconstructed = ckpt.translate(ckpt.translate(batch, "ab"), "ba")
        for rec, img in zip(records, reconstructed):
            rec_id = rec.id + RECONSTRUCTED_SUFFIX
            path = out_root / label.name / f"{rec_id}.png"
            save_image(img, path)
            new_records.append(
                ImageRecord(
                    id=rec_id, path=str(path), domain="cell",
                    class_label=label, split=rec.split, source=rec.source,
                )
            )

    manifest = DatasetManifest(records=new_records, domain="cell", seed=cell_test.seed)
    log.info("reconstructed %d test cells into %s", len(new_records), out_root)
    return manifest


@dataclass
class ReconstructionMetrics:
    per_image: dict[str, float]
    per_class: dict[str, float]
    mean: float


def reconstruction_metrics(
    originals: DatasetManifest, reconstructions: DatasetManifest
) -> ReconstructionMetrics:
    """Per-image and aggregate mean absolute error (in [-1, 1] units) between
    originals and their id-matched reconstructions."""
    orig_by_id = originals.by_id()
    expected = {rid + RECONSTRUCTED_SUFFIX for rid in orig_by_id}
    got = {r.id for r in reconstructions.records}
    if expected != got:
        raise HarnessError(
            "originals and reconstructions do not correspond 1:1 "
            f"(missing: {sorted(expected - got)[:3]}, extra: {sorted(got - expected)[:3]})"
        )

    per_image: dict[str, float] = {}
    per_class_sums: dict[str, list[float]] = {}
    for rec in sorted(reconstructions.records, key=lambda r: r.id):
        orig = orig_by_id[rec.id[: -len(RECONSTRUCTED_SUFFIX)]]
        b = load_image(rec.path)
        # compare at the reconstruction's resolution (the model's input view)
        a = load_image(orig.path, size=b.shape[0])
        l1 = float(np.mean(np.abs(a - b)))
        per_image[rec.id] = l1
        per_class_sums.setdefault(rec.class_label.name, []).append(l1)

    per_class = {k: float(np.mean(v)) for k, v in sorted(per_class_sums.items())}
    return ReconstructionMetrics(
        per_image=per_image,
        per_class=per_class,
        mean=float(np.mean(list(per_image.values()))),
    )


@dataclass
class ExperimentReport:
    acc_real: dict
    acc_reconstructed: dict
    cm_real: list[list[int]]
    cm_reconstructed: list[list[int]]
    per_class_recall_real: list
    per_class_recall_reconstructed: list
    per_pair_cycle_l1: dict[str, float]
    mean_cycle_l1: float
    config_digests: dict[str, str]
    created_at: str
    class_order: list[str] = field(default_factory=lambda: [c.name for c in CellClass])

    def to_dict(self) -> dict:
        return {
            "acc_real": self.acc_real,
            "acc_reconstructed": self.acc_reconstructed,
            "cm_real": self.cm_real,
            "cm_reconstructed": self.cm_reconstructed,
            "per_class_recall_real": self.per_class_recall_real,
            "per_class_recall_reconstructed": self.per_class_recall_reconstructed,
            "per_pair_cycle_l1": self.per_pair_cycle_l1,
            "mean_cycle_l1": self.mean_cycle_l1,
            "config_digests": self.config_digests,
            "created_at": self.created_at,
            "class_order": self.class_order,
        }

    def save(self, out_dir: str | Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
        return out_dir / "report.json"


def save_cm_heatmap(cm: ConfusionMatrix, path: str | Path, cell_px: int = 48) -> Path:
    """Flat PNG heatmap of a confusion matrix (display only, no axes):
    row-normalized counts on a white-to-green ramp."""
    counts = cm.counts.astype(np.float64)
    row_sums = counts.sum(axis=1, keepdims=True)
    normed = np.divide(counts, row_sums, out=np.zeros_like(counts), where=row_sums > 0)
    ramp_lo = np.array([247, 251, 240], dtype=np.float64)
    ramp_hi = np.array([30, 110, 60], dtype=np.float64)
    rgb = ramp_lo[None, None, :] + normed[..., None] * (ramp_hi - ramp_lo)[None, None, :]
    img = Image.fromarray(rgb.astype(np.uint8))
    img = img.resize((img.width * cell_px, img.height * cell_px), Image.NEAREST)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path)
    return path


def _digest(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode("utf-8")).hexdigest()


def _manifest_fingerprint(manifest: DatasetManifest) -> list[dict]:
    """Location-independent manifest identity: record ids, classes, splits
    and file names, but not the directories they happen to live in."""
    rows = []
    for rec in manifest.records:
        d = rec.to_dict()
        d["path"] = Path(rec.path).name
        rows.append(d)
    return rows


def run_experiment(
    cell_manifest: DatasetManifest,
    checkpoints: dict[CellClass, object],
    model: CellTypeClassifier,
    out_dir: str | Path,
) -> ExperimentReport:
    """Evaluate the classifier on the real test split and on the
    reconstructed test set, and write report.json plus CM CSVs to out_dir.
    The classifier must have been trained on the real training split only."""
    out_dir = Path(out_dir)
    test_real = cell_manifest.subset(split="test")
    if not test_real.records:
        raise HarnessError("cell manifest has no test split")

    test_rec = build_reconstructed_testset(test_real, checkpoints, out_dir / "reconstructed")
    eval_real: EvaluationResult = evaluate(model, test_real)
    eval_rec: EvaluationResult = evaluate(model, test_rec)
    recon = reconstruction_metrics(test_real, test_rec)

    report = ExperimentReport(
        acc_real={"overall": eval_real.overall_accuracy, "macro": eval_real.macro_accuracy},
        acc_reconstructed={"overall": eval_rec.overall_accuracy, "macro": eval_rec.macro_accuracy},
        cm_real=eval_real.cm.to_lists(),
        cm_reconstructed=eval_rec.cm.to_lists(),
        per_class_recall_real=eval_real.per_class_recall,
        per_class_recall_reconstructed=eval_rec.per_class_recall,
        per_pair_cycle_l1=recon.per_class,
        mean_cycle_l1=recon.mean,
        config_digests={
            "manifest": _digest(_manifest_fingerprint(cell_manifest)),
            "classifier": _digest(model.cfg.to_dict()),
            "checkpoints": _digest(
                {
                    c.name: (ckpt.cfg.to_dict() if getattr(ckpt, "cfg", None) else "identity")
                    for c, ckpt in sorted(checkpoints.items(), key=lambda kv: kv[0].index)
                }
            ),
        },
        created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )
    report.save(out_dir)
    eval_real.cm.save_csv(out_dir / "confusion_real.csv")
    eval_rec.cm.save_csv(out_dir / "confusion_reconstructed.csv")
    log.info(
        "experiment: acc_real=%.4f acc_reconstructed=%.4f mean cycle L1=%.4f",
        eval_real.overall_accuracy, eval_rec.overall_accuracy, recon.mean,
    )
    return report
