from .checkpoint import IdentityTransfer, TransferCheckpoint
from .config import TransferConfig, lr_at
from .losses import adversarial_loss, cycle_loss
from .networks import DiscriminatorSpec, GeneratorSpec, build_discriminator, build_generator
from .pool import ImagePool
from .trainer import NonFiniteLossError, TrainState, train_pair, train_step

__all__ = [
    "DiscriminatorSpec",
    "GeneratorSpec",
    "IdentityTransfer",
    "ImagePool",
    "NonFiniteLossError",
    "TrainState",
    "TransferCheckpoint",
    "TransferConfig",
    "adversarial_loss",
    "build_discriminator",
    "build_generator",
    "cycle_loss",
    "lr_at",
    "train_pair",
    "train_step",
]
