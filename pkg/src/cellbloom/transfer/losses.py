"""Training losses: least-squares adversarial term and L1 cycle term."""
from __future__ import annotations

import torch


def adversarial_loss(scores: torch.Tensor, target_real: bool) -> torch.Tensor:
    """Least-squares adversarial loss: mean over the score map of (s - t)^2,
    with t = 1 for a real target and t = 0 for a fake target."""
    if not torch.isfinite(scores).all():
        raise ValueError("score map contains non-finite values")
    target = 1.0 if target_real else 0.0
    return torch.mean((scores - target) ** 2)


def cycle_loss(original: torch.Tensor, reconstructed: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between an image (batch) and its reconstruction."""
    if original.shape != reconstructed.shape:
        raise ValueError(
            f"shape mismatch: {tuple(original.shape)} vs {tuple(reconstructed.shape)}"
        )
    return torch.mean(torch.abs(original - reconstructed))
