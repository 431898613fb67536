"""Label-preserving training augmentations on [-1, 1] float images.

Applied in a fixed order: horizontal flip, vertical flip, rotation
(reflect-padded), random erasing (filled with the per-channel mean),
additive intensity shift, then a clamp back to [-1, 1]. Every step draws
from the supplied generator in a fixed order, so a given (image, rng state)
pair always produces the same output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class AugmentationSpec:
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    rotation_deg: float = 15.0
    erase_prob: float = 0.25
    erase_area: tuple[float, float] = (0.02, 0.10)
    # additive shift drawn uniformly from +/- shift_frac of the full value range (2.0)
    shift_frac: float = 0.1

    def __post_init__(self) -> None:
        for name in ("hflip_prob", "vflip_prob", "erase_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.rotation_deg < 0 or self.shift_frac < 0:
            raise ValueError("rotation_deg and shift_frac must be non-negative")
        lo, hi = self.erase_area
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"erase_area must satisfy 0 <= lo <= hi <= 1, got {self.erase_area}")

    @classmethod
    def disabled(cls) -> "AugmentationSpec":
        return cls(hflip_prob=0.0, vflip_prob=0.0, rotation_deg=0.0,
                   erase_prob=0.0, erase_area=(0.0, 0.0), shift_frac=0.0)


def augment(img: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    """Return an augmented copy of a float32 HxWx3 image in [-1, 1]."""
    out = np.asarray(img, dtype=np.float32)
    if out.ndim != 3 or out.shape[2] != 3:
        raise ValueError(f"expected HxWx3 image, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("image contains non-finite values")
    h, w = out.shape[:2]

    if rng.random() < spec.hflip_prob:
        out = out[:, ::-1, :]
    if rng.random() < spec.vflip_prob:
        out = out[::-1, :, :]

    angle = rng.uniform(-spec.rotation_deg, spec.rotation_deg)
    if angle != 0.0:
        out = ndimage.rotate(out, angle, axes=(0, 1), reshape=False, order=1, mode="reflect")

    if rng.random() < spec.erase_prob:
        area = rng.uniform(*spec.erase_area) * h * w
        aspect = rng.uniform(0.5, 2.0)
        eh = max(1, min(h, round(math.sqrt(area * aspect))))
        ew = max(1, min(w, round(math.sqrt(area / aspect))))
        top = int(rng.integers(0, h - eh + 1))
        left = int(rng.integers(0, w - ew + 1))
        fill = out.mean(axis=(0, 1))
        out = out.copy()
        out[top:top + eh, left:left + ew, :] = fill

    shift = rng.uniform(-spec.shift_frac, spec.shift_frac) * 2.0
    out = out + np.float32(shift)

    return np.clip(out, -1.0, 1.0).astype(np.float32)
