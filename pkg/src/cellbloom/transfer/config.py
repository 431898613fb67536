"""Hyperparameters for one per-class-pair translation model."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..labels import CellClass, FlowerClass
from .networks import DiscriminatorSpec, GeneratorSpec


@dataclass(frozen=True)
class TransferConfig:
    pair: tuple[CellClass, FlowerClass]
    epochs: int = 200
    image_size: int = 64
    batch_size: int = 32
    lr: float = 2e-4
    betas: tuple[float, float] = (0.5, 0.999)
    lambda_cycle: float = 10.0
    lambda_identity: float = 0.0
    pool_capacity: int = 50
    # constant lr up to decay_start, then linear decay to 0 at `epochs`;
    # defaults to epochs // 2 (100 for the standard 200-epoch run)
    decay_start: int | None = None
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    discriminator: DiscriminatorSpec = field(default_factory=DiscriminatorSpec)
    seed: int = 0
    checkpoint_every: int = 0  # 0 = checkpoint at the end only

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lambda_cycle < 0 or self.lambda_identity < 0:
            raise ValueError("loss weights must be non-negative")
        if self.pool_capacity < 0:
            raise ValueError(f"pool_capacity must be >= 0, got {self.pool_capacity}")
        if self.batch_size < 1 or self.image_size < 1:
            raise ValueError("batch_size and image_size must be >= 1")
        if self.decay_start is not None and not (1 <= self.decay_start <= self.epochs):
            raise ValueError(f"decay_start must be in [1, {self.epochs}]")

    @property
    def effective_decay_start(self) -> int:
        return self.decay_start if self.decay_start is not None else max(1, self.epochs // 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pair"] = [self.pair[0].name, self.pair[1].name]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransferConfig":
        d = dict(d)
        cell, flower = d.pop("pair")
        gen = GeneratorSpec(**d.pop("generator"))
        disc = DiscriminatorSpec(**d.pop("discriminator"))
        d["betas"] = tuple(d["betas"])
        return cls(
            pair=(CellClass.from_name(cell), FlowerClass.from_name(flower)),
            generator=gen,
            discriminator=disc,
            **d,
        )


def lr_at(epoch: int, cfg: TransferConfig) -> float:
    """Learning rate for a 1-based epoch: constant until decay_start, then
    linear decay reaching 0 at the final epoch."""
    if not 1 <= epoch <= cfg.epochs:
        raise ValueError(f"epoch must be in [1, {cfg.epochs}], got {epoch}")
    start = cfg.effective_decay_start
    if epoch <= start:
        return cfg.lr
    return cfg.lr * (1.0 - (epoch - start) / (cfg.epochs - start))
