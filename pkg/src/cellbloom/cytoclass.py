"""7-class cell-type classifier used to check that the domain transfer
preserves class information, plus confusion-matrix evaluation."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from torchvision.models import resnet18

from .augment import AugmentationSpec, augment
from .imaging import load_image
from .labels import CellClass
from .manifest import DatasetManifest
from .transfer.checkpoint import batch_to_tensor

log = logging.getLogger(__name__)


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    epochs: int = 10
    lr: float = 3e-3
    batch_size: int = 64
    image_size: int = 64
    backbone: str = "resnet18"
    pretrained_init: bool = False
    seed: int = 0
    augmentation: AugmentationSpec | None = field(default_factory=AugmentationSpec)

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ClassifierError(f"epochs must be >= 1, got {self.epochs}")
        if self.backbone != "resnet18":
            raise ClassifierError(f"unsupported backbone {self.backbone!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["augmentation"] = asdict(self.augmentation) if self.augmentation else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        d = dict(d)
        aug = d.pop("augmentation", None)
        if aug is not None:
            aug = dict(aug)
            aug["erase_area"] = tuple(aug["erase_area"])
            aug = AugmentationSpec(**aug)
        return cls(augmentation=aug, **d)


def build_backbone(cfg: ClassifierConfig) -> nn.Module:
    if cfg.pretrained_init:
        from torchvision.models import ResNet18_Weights

        net = resnet18(weights=ResNet18_Weights.IMAGENET1K_V1)
        net.fc = nn.Linear(net.fc.in_features, len(CellClass))
    else:
        net = resnet18(weights=None, num_classes=len(CellClass))
    return net


def argmax_lowest(values: np.ndarray) -> int:
    """Index of the maximum, ties broken by the lowest index."""
    return int(np.argmax(values))


@dataclass
class ConfusionMatrix:
    """Square count matrix: rows are true classes, columns predicted."""

    counts: np.ndarray
    labels: list[str] = field(default_factory=lambda: [c.name for c in CellClass])

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.labels)
        if self.counts.shape != (n, n):
            raise ClassifierError(f"expected {n}x{n} counts, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ClassifierError("confusion matrix counts must be non-negative")

    @classmethod
    def from_pairs(cls, y_true, y_pred, labels: list[str] | None = None) -> "ConfusionMatrix":
        labels = labels if labels is not None else [c.name for c in CellClass]
        n = len(labels)
        counts = np.zeros((n, n), dtype=np.int64)
        for t, p in zip(y_true, y_pred, strict=True):
            counts[int(t), int(p)] += 1
        return cls(counts=counts, labels=labels)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def overall_accuracy(self) -> float:
        if self.total == 0:
            raise ClassifierError("empty confusion matrix has no accuracy")
        return float(np.trace(self.counts)) / self.total

    def per_class_recall(self) -> list[float | None]:
        recalls: list[float | None] = []
        for i in range(len(self.labels)):
            row = self.counts[i].sum()
            recalls.append(float(self.counts[i, i]) / row if row > 0 else None)
        return recalls

    def macro_accuracy(self) -> float:
        """Mean per-class recall; classes with no samples are excluded."""
        recalls = [r for r in self.per_class_recall() if r is not None]
        if not recalls:
            raise ClassifierError("empty confusion matrix has no accuracy")
        return float(np.mean(recalls))

    def to_lists(self) -> list[list[int]]:
        return self.counts.tolist()

    def save_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\pred"] + self.labels)
            for label, row in zip(self.labels, self.counts):
                writer.writerow([label] + [int(v) for v in row])


@dataclass
class EvaluationResult:
    cm: ConfusionMatrix
    overall_accuracy: float
    macro_accuracy: float
    per_class_recall: list[float | None]

    def to_report(self, dataset_tag: str) -> dict:
        return {
            "dataset_tag": dataset_tag,
            "overall_accuracy": self.overall_accuracy,
            "macro_accuracy": self.macro_accuracy,
            "per_class_recall": self.per_class_recall,
            "confusion_matrix": self.cm.to_lists(),
        }


class CellTypeClassifier:
    """Trained classifier plus its config and per-epoch training log."""

    def __init__(self, net: nn.Module, cfg: ClassifierConfig, log_rows: list[dict] | None = None):
        self.net = net
        self.cfg = cfg
        self.log_rows = log_rows or []

    def predict_batch(self, batch: np.ndarray) -> np.ndarray:
        """NHWC [-1,1] batch -> (N, 7) class probabilities."""
        self.net.eval()
        with torch.no_grad():
            logits = self.net(batch_to_tensor(batch))
            probs = torch.softmax(logits.double(), dim=1)
        return probs.numpy()

    def save(self, out_dir: str | Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(
            json.dumps({"config": self.cfg.to_dict(), "log": self.log_rows}, indent=2, sort_keys=True),
            encoding="utf-8",
        )
        np.savez(out_dir / "weights.npz", **{k: v.detach().cpu().numpy() for k, v in self.net.state_dict().items()})
        return out_dir

    @classmethod
    def load(cls, model_dir: str | Path) -> "CellTypeClassifier":
        model_dir = Path(model_dir)
        meta = json.loads((model_dir / "config.json").read_text(encoding="utf-8"))
        cfg = ClassifierConfig.from_dict(meta["config"])
        net = resnet18(weights=None, num_classes=len(CellClass))
        with np.load(model_dir / "weights.npz") as data:
            net.load_state_dict({k: torch.from_numpy(data[k].copy()) for k in data.files})
        net.eval()
        return cls(net=net, cfg=cfg, log_rows=meta.get("log", []))


def train_classifier(train_manifest: DatasetManifest, cfg: ClassifierConfig) -> CellTypeClassifier:
    """Train on the manifest's training split (expected oversampled) with
    augmentation applied on the fly; keep the best validation-accuracy epoch
    (ties go to the earlier one)."""
    if train_manifest.domain != "cell":
        raise ClassifierError(f"expected a cell-domain manifest, got {train_manifest.domain!r}")
    train_recs = sorted(
        (r for r in train_manifest.records if r.split == "train"), key=lambda r: r.id
    )
    val_recs = sorted((r for r in train_manifest.records if r.split == "val"), key=lambda r: r.id)
    present = {r.class_label for r in train_recs}
    missing = [c.name for c in CellClass if c not in present]
    if missing:
        raise ClassifierError(f"training split is missing classes: {', '.join(missing)}")
    if not val_recs:
        raise ClassifierError("validation split is empty; cannot select the best epoch")

    torch.manual_seed(cfg.seed)
    net = build_backbone(cfg)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    ce = nn.CrossEntropyLoss()

    train_images = np.stack([load_image(r.path, size=cfg.image_size) for r in train_recs])
    train_labels = torch.tensor([r.class_label.index for r in train_recs], dtype=torch.long)
    val_images = np.stack([load_image(r.path, size=cfg.image_size) for r in val_recs])
    val_labels = np.array([r.class_label.index for r in val_recs])

    best_acc = -1.0
    best_state: dict | None = None
    log_rows: list[dict] = []
    model = CellTypeClassifier(net, cfg)
    for epoch in range(1, cfg.epochs + 1):
        net.train()
        order_rng = np.random.default_rng([cfg.seed, epoch])
        order = order_rng.permutation(len(train_recs))
        aug_rng = np.random.default_rng([cfg.seed, epoch, 1])
        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            imgs = train_images[idx]
            if cfg.augmentation is not None:
                imgs = np.stack([augment(im, cfg.augmentation, aug_rng) for im in imgs])
            opt.zero_grad()
            loss = ce(net(batch_to_tensor(imgs)), train_labels[idx])
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))

        preds = model.predict_batch(val_images).argmax(axis=1)
        val_acc = float((preds == val_labels).mean())
        log_rows.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "val_accuracy": val_acc})
        log.info("classifier epoch %d/%d: loss=%.4f val_acc=%.4f", epoch, cfg.epochs, np.mean(losses), val_acc)
        if val_acc > best_acc:
            best_acc = val_acc
            best_state = {k: v.detach().clone() for k, v in net.state_dict().items()}

    if best_state is not None:
        net.load_state_dict(best_state)
    net.eval()
    model.log_rows = log_rows
    return model


def predict(model: CellTypeClassifier, img: np.ndarray) -> tuple[np.ndarray, CellClass]:
    """Class probabilities and the argmax class (ties to the lowest index)
    for one HxWx3 [-1,1] image."""
    size = model.cfg.image_size
    if img.ndim != 3 or img.shape[:2] != (size, size) or img.shape[2] != 3:
        raise ClassifierError(f"expected {size}x{size}x3 image, got shape {tuple(img.shape)}")
    probs = model.predict_batch(img[None])[0]
    return probs, CellClass.from_index(argmax_lowest(probs))


def evaluate(
    model: CellTypeClassifier, test_manifest: DatasetManifest, batch_size: int = 256
) -> EvaluationResult:
    """Confusion matrix and accuracy figures over every record in the manifest."""
    if not test_manifest.records:
        raise ClassifierError("cannot evaluate an empty manifest")
    if test_manifest.domain != "cell":
        raise ClassifierError(f"expected a cell-domain manifest, got {test_manifest.domain!r}")
    records = sorted(test_manifest.records, key=lambda r: r.id)
    unlabeled = [r.id for r in records if r.class_label is None]
    if unlabeled:
        raise ClassifierError(f"cannot evaluate unlabeled records: {unlabeled[:3]}")
    y_true, y_pred = [], []
    for lo in range(0, len(records), batch_size):
        chunk = records[lo:lo + batch_size]
        imgs = np.stack([load_image(r.path, size=model.cfg.image_size) for r in chunk])
        probs = model.predict_batch(imgs)
        y_pred.extend(argmax_lowest(p) for p in probs)
        y_true.extend(r.class_label.index for r in chunk)
    cm = ConfusionMatrix.from_pairs(y_true, y_pred)
    return EvaluationResult(
        cm=cm,
        overall_accuracy=cm.overall_accuracy(),
        macro_accuracy=cm.macro_accuracy(),
        per_class_recall=cm.per_class_recall(),
    )


def write_report(result: EvaluationResult, dataset_tag: str, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"evaluation_{dataset_tag}.json").write_text(
        json.dumps(result.to_report(dataset_tag), indent=2, sort_keys=True), encoding="utf-8"
    )
    result.cm.save_csv(out_dir / f"confusion_{dataset_tag}.csv")
    return out_dir
