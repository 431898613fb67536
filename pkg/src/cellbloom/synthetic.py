"""Desk-scale synthetic stand-ins for the two image domains.

Domain A ("cell"): a filled disk with a class-specific hue over a noisy
light background. Domain B ("flower"): a radial petal pattern in the same
class hue. Paired classes share a hue, so the seven classes are separable
by mean color in both domains by construction.
"""
from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import from_unit, save_image
from .labels import CellClass, FlowerClass
from .manifest import DatasetManifest, ImageRecord

N_CLASSES = 7


@dataclass(frozen=True)
class SyntheticDomainSpec:
    per_class: int
    image_size: int = 32
    noise_sigma: float = 0.04
    seed: int = 0

    def __post_init__(self) -> None:
        if self.per_class < 1 or self.image_size < 8:
            raise ValueError("per_class must be >= 1 and image_size >= 8")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


def class_hue(index: int) -> float:
    return index / N_CLASSES


def class_rgb(index: int) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb(class_hue(index), 0.85, 0.9), dtype=np.float32)


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float32)
    return ys, xs


def draw_disk_image(rng: np.random.Generator, size: int, color: np.ndarray, noise_sigma: float) -> np.ndarray:
    """Filled class-colored disk on a noisy light background, in [0, 1]."""
    ys, xs = _grid(size)
    cy = size / 2 + rng.uniform(-0.06, 0.06) * size
    cx = size / 2 + rng.uniform(-0.06, 0.06) * size
    radius = rng.uniform(0.26, 0.36) * size
    dist = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
    alpha = np.clip((radius - dist) / 1.5 + 0.5, 0.0, 1.0)[..., None]

    background = np.full((size, size, 3), 0.85, dtype=np.float32)
    brightness = rng.uniform(0.85, 1.05)
    img = background * (1 - alpha) + (color * brightness)[None, None, :] * alpha
    img += rng.normal(0.0, noise_sigma, img.shape).astype(np.float32)
    return np.clip(img, 0.0, 1.0)


def draw_petal_image(rng: np.random.Generator, size: int, color: np.ndarray, noise_sigma: float) -> np.ndarray:
    """Radial petal pattern in the class color on a noisy pale background, in [0, 1]."""
    ys, xs = _grid(size)
    cy = size / 2 + rng.uniform(-0.04, 0.04) * size
    cx = size / 2 + rng.uniform(-0.04, 0.04) * size
    dy, dx = ys - cy, xs - cx
    dist = np.sqrt(dy**2 + dx**2)
    theta = np.arctan2(dy, dx)

    n_petals = int(rng.integers(5, 9))
    phase = rng.uniform(0.0, 2 * np.pi)
    r0 = rng.uniform(0.30, 0.40) * size
    petal_radius = r0 * (0.45 + 0.55 * np.abs(np.cos(n_petals * theta / 2 + phase)))
    alpha = np.clip((petal_radius - dist) / 1.5 + 0.5, 0.0, 1.0)[..., None]

    background = np.full((size, size, 3), 0.88, dtype=np.float32)
    background[..., 1] += 0.02  # slight green tint
    brightness = rng.uniform(0.9, 1.05)
    img = background * (1 - alpha) + (color * brightness)[None, None, :] * alpha

    core = np.clip((0.12 * size - dist) / 1.5 + 0.5, 0.0, 1.0)[..., None]
    img = img * (1 - core) + (color * 0.55)[None, None, :] * core
    img += rng.normal(0.0, noise_sigma, img.shape).astype(np.float32)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic_domains(
    spec: SyntheticDomainSpec, out_root: str | Path
) -> tuple[DatasetManifest, DatasetManifest]:
    """Write both synthetic domains under out_root/<domain>/<class>/ and
    return their manifests. Fully determined by the spec's seed: each image
    gets its own RNG stream keyed by (seed, domain, class, index)."""
    out_root = Path(out_root)
    cell_records: list[ImageRecord] = []
    flower_records: list[ImageRecord] = []

    for domain_idx, (domain, classes, drawer, records) in enumerate(
        (
            ("cell", list(CellClass), draw_disk_image, cell_records),
            ("flower", list(FlowerClass), draw_petal_image, flower_records),
        )
    ):
        for label in classes:
            color = class_rgb(label.index)
            for i in range(spec.per_class):
                rng = np.random.default_rng([spec.seed, domain_idx, label.index, i])
                img = drawer(rng, spec.image_size, color, spec.noise_sigma)
                rec_id = f"{domain}_{label.name}_{i:04d}"
                path = out_root / domain / label.name / f"{rec_id}.png"
                save_image(from_unit(img), path)
                records.append(
                    ImageRecord(id=rec_id, path=str(path), domain=domain, class_label=label)
                )

    cells = DatasetManifest(records=cell_records, domain="cell", seed=spec.seed)
    flowers = DatasetManifest(records=flower_records, domain="flower", seed=spec.seed)
    return cells, flowers
