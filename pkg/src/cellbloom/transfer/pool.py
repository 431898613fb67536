"""History buffer of generated images used for discriminator updates.

While below capacity every incoming image is stored and returned unchanged.
Once full, each incoming image is with probability 0.5 swapped against a
uniformly chosen stored one (the stored image is returned and replaced),
otherwise returned directly. A zero-capacity pool is a pass-through.
"""
from __future__ import annotations

import numpy as np
import torch


class ImagePool:
    def __init__(self, capacity: int = 50, rng: np.random.Generator | None = None):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self.images: list[torch.Tensor] = []
        self.rng = rng if rng is not None else np.random.default_rng()

    def __len__(self) -> int:
        return len(self.images)

    def query(self, batch: torch.Tensor) -> torch.Tensor:
        if self.capacity == 0:
            return batch
        out: list[torch.Tensor] = []
        for img in batch:
            img = img.detach().unsqueeze(0)
            if len(self.images) < self.capacity:
                self.images.append(img.clone())
                out.append(img)
            elif self.rng.random() < 0.5:
                idx = int(self.rng.integers(0, self.capacity))
                out.append(self.images[idx])
                self.images[idx] = img.clone()
            else:
                out.append(img)
        return torch.cat(out, dim=0)

    # ---------- persistence ----------

    def state(self) -> dict:
        return {
            "capacity": self.capacity,
            "images": [im.squeeze(0).numpy() for im in self.images],
            "rng": self.rng.bit_generator.state,
        }

    @classmethod
    def from_state(cls, state: dict) -> "ImagePool":
        pool = cls(capacity=state["capacity"])
        pool.images = [torch.from_numpy(np.asarray(a)).unsqueeze(0) for a in state["images"]]
        pool.rng = np.random.default_rng()
        pool.rng.bit_generator.state = state["rng"]
        return pool
