"""Persistence and inference view of a trained translation pair.

A checkpoint is a directory holding a config JSON, the loss-history CSV
(columns: epoch, loss_G_adv_ab, loss_G_adv_ba, loss_cycle_a, loss_cycle_b,
loss_D_a, loss_D_b, lr) and one framework-neutral .npz named-tensor
container per network, plus optimizer/pool/RNG state for resumable runs.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .config import TransferConfig
from .networks import build_discriminator, build_generator, load_parameters_numpy, named_parameters_numpy

HISTORY_COLUMNS = [
    "epoch",
    "loss_G_adv_ab",
    "loss_G_adv_ba",
    "loss_cycle_a",
    "loss_cycle_b",
    "loss_D_a",
    "loss_D_b",
    "lr",
]

NET_FILES = {"g_ab": "g_ab.npz", "g_ba": "g_ba.npz", "d_a": "d_a.npz", "d_b": "d_b.npz"}


def batch_to_tensor(batch: np.ndarray) -> torch.Tensor:
    """NHWC float array -> NCHW float32 tensor."""
    arr = np.ascontiguousarray(np.asarray(batch, dtype=np.float32).transpose(0, 3, 1, 2))
    return torch.from_numpy(arr)


def tensor_to_batch(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().transpose(0, 2, 3, 1)


def save_history(history: list[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in HISTORY_COLUMNS})


def load_history(path: Path) -> list[dict]:
    history = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed = {k: (int(v) if k == "epoch" else float(v)) for k, v in row.items()}
            history.append(parsed)
    return history


@dataclass
class TransferCheckpoint:
    cfg: TransferConfig
    epoch: int
    g_ab: nn.Module
    g_ba: nn.Module
    d_a: nn.Module
    d_b: nn.Module
    history: list[dict]

    # ---------- inference ----------

    def translate(self, batch: np.ndarray, direction: str, chunk: int = 32) -> np.ndarray:
        """Map an NHWC batch across domains ('ab' or 'ba'). Pure: repeated
        calls on the same input produce identical outputs."""
        net = {"ab": self.g_ab, "ba": self.g_ba}.get(direction)
        if net is None:
            raise ValueError(f"direction must be 'ab' or 'ba', got {direction!r}")
        net.eval()
        outs = []
        with torch.no_grad():
            for i in range(0, len(batch), chunk):
                outs.append(tensor_to_batch(net(batch_to_tensor(batch[i:i + chunk]))))
        return np.concatenate(outs, axis=0)

    def _check_shape(self, img: np.ndarray) -> None:
        size = self.cfg.image_size
        if img.ndim != 3 or img.shape[:2] != (size, size) or img.shape[2] != 3:
            raise ValueError(
                f"expected {size}x{size}x3 image, got shape {tuple(img.shape)}"
            )

    def transform(self, img: np.ndarray, direction: str) -> np.ndarray:
        self._check_shape(img)
        return self.translate(img[None], direction)[0]

    def reconstruct(self, img: np.ndarray, start_domain: str = "a") -> np.ndarray:
        """Round trip through both generators: a -> b -> a (or b -> a -> b)."""
        if start_domain not in ("a", "b"):
            raise ValueError(f"start_domain must be 'a' or 'b', got {start_domain!r}")
        out, back = ("ab", "ba") if start_domain == "a" else ("ba", "ab")
        return self.transform(self.transform(img, out), back)

    # ---------- persistence ----------

    def save(self, out_dir: str | Path, extras: dict | None = None) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        meta = {"config": self.cfg.to_dict(), "epoch": self.epoch}
        if extras:
            meta.update(extras)
        (out_dir / "config.json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
        save_history(self.history, out_dir / "history.csv")
        for attr, fname in NET_FILES.items():
            np.savez(out_dir / fname, **named_parameters_numpy(getattr(self, attr)))
        return out_dir

    @classmethod
    def load(cls, ckpt_dir: str | Path) -> "TransferCheckpoint":
        ckpt_dir = Path(ckpt_dir)
        meta = json.loads((ckpt_dir / "config.json").read_text(encoding="utf-8"))
        cfg = TransferConfig.from_dict(meta["config"])
        nets = {}
        for attr, fname in NET_FILES.items():
            builder = build_generator if attr.startswith("g") else build_discriminator
            spec = cfg.generator if attr.startswith("g") else cfg.discriminator
            net = builder(spec)
            with np.load(ckpt_dir / fname) as data:
                load_parameters_numpy(net, dict(data))
            net.eval()
            nets[attr] = net
        history_path = ckpt_dir / "history.csv"
        history = load_history(history_path) if history_path.exists() else []
        return cls(cfg=cfg, epoch=meta["epoch"], history=history, **nets)


class IdentityTransfer:
    """Drop-in stand-in for a trained checkpoint whose generators are the
    identity; used for control experiments where routing must not alter
    the image."""

    cfg = None
    epoch = 0
    history: list[dict] = []

    def translate(self, batch: np.ndarray, direction: str, chunk: int = 32) -> np.ndarray:
        if direction not in ("ab", "ba"):
            raise ValueError(f"direction must be 'ab' or 'ba', got {direction!r}")
        return np.array(batch, dtype=np.float32, copy=True)

    def transform(self, img: np.ndarray, direction: str) -> np.ndarray:
        return self.translate(img[None], direction)[0]

    def reconstruct(self, img: np.ndarray, start_domain: str = "a") -> np.ndarray:
        return np.array(img, dtype=np.float32, copy=True)
