"""Image I/O and pixel-range conversions.

Images live on disk as 8-bit PNG/JPEG and in memory as float32 HWC arrays
in [-1, 1], matching the generator's tanh output range.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def load_image(path: str | Path, size: int | None = None) -> np.ndarray:
    """Load an image as float32 HxWx3 in [-1, 1], optionally resized to size x size."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if size is not None and im.size != (size, size):
            im = im.resize((size, size), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32)
    return arr / 127.5 - 1.0


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Write a float HxWx3 [-1, 1] array as an 8-bit PNG (or JPEG by extension)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.clip(img, -1.0, 1.0)
    arr = np.round((arr + 1.0) * 127.5).astype(np.uint8)
    Image.fromarray(arr).save(path)


def to_unit(img: np.ndarray) -> np.ndarray:
    """[-1, 1] -> [0, 1]."""
    return (np.asarray(img, dtype=np.float32) + 1.0) / 2.0


def from_unit(img: np.ndarray) -> np.ndarray:
    """[0, 1] -> [-1, 1]."""
    return np.asarray(img, dtype=np.float32) * 2.0 - 1.0
