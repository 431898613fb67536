"""Generator and discriminator networks for unpaired two-domain translation.

Generator: c7s1 stem, two stride-2 downsampling stages, N residual blocks,
two upsampling stages, c7s1 head with tanh, reflection padding and instance
normalization throughout. Output spatial shape equals input shape.

Discriminator: patch-level convolutional critic (stacked stride-2 4x4 convs
with instance norm after the first) ending in a 2-D map of realness scores,
one per receptive-field patch.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass(frozen=True)
class GeneratorSpec:
    in_channels: int = 3
    out_channels: int = 3
    base_width: int = 64
    n_blocks: int = 6

    def __post_init__(self) -> None:
        if self.base_width < 1 or self.n_blocks < 0:
            raise ValueError("base_width must be >= 1 and n_blocks >= 0")


@dataclass(frozen=True)
class DiscriminatorSpec:
    in_channels: int = 3
    base_width: int = 64
    n_down: int = 3

    def __post_init__(self) -> None:
        if self.base_width < 1 or self.n_down < 1:
            raise ValueError("base_width must be >= 1 and n_down >= 1")


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            nn.InstanceNorm2d(channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            nn.InstanceNorm2d(channels),
        )

    def forward(self, x):
        return x + self.block(x)


def build_generator(spec: GeneratorSpec) -> nn.Module:
    w = spec.base_width
    layers: list[nn.Module] = [
        nn.ReflectionPad2d(3),
        nn.Conv2d(spec.in_channels, w, 7),
        nn.InstanceNorm2d(w),
        nn.ReLU(inplace=True),
    ]
    c = w
    for _ in range(2):
        layers += [
            nn.Conv2d(c, c * 2, 3, stride=2, padding=1),
            nn.InstanceNorm2d(c * 2),
            nn.ReLU(inplace=True),
        ]
        c *= 2
    for _ in range(spec.n_blocks):
        layers.append(ResidualBlock(c))
    for _ in range(2):
        layers += [
            nn.ConvTranspose2d(c, c // 2, 3, stride=2, padding=1, output_padding=1),
            nn.InstanceNorm2d(c // 2),
            nn.ReLU(inplace=True),
        ]
        c //= 2
    layers += [
        nn.ReflectionPad2d(3),
        nn.Conv2d(c, spec.out_channels, 7),
        nn.Tanh(),
    ]
    return nn.Sequential(*layers)


def build_discriminator(spec: DiscriminatorSpec) -> nn.Module:
    w = spec.base_width
    layers: list[nn.Module] = [
        nn.Conv2d(spec.in_channels, w, 4, stride=2, padding=1),
        nn.LeakyReLU(0.2, inplace=True),
    ]
    c = w
    for _ in range(spec.n_down - 1):
        layers += [
            nn.Conv2d(c, c * 2, 4, stride=2, padding=1),
            nn.InstanceNorm2d(c * 2),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        c *= 2
    layers += [
        nn.Conv2d(c, c * 2, 4, stride=1, padding=1),
        nn.InstanceNorm2d(c * 2),
        nn.LeakyReLU(0.2, inplace=True),
        nn.Conv2d(c * 2, 1, 4, stride=1, padding=1),
    ]
    return nn.Sequential(*layers)


def init_weights(net: nn.Module, std: float = 0.02) -> nn.Module:
    """Zero-mean normal init (sigma=std) for all conv weights, zero biases.

    Consumes the global torch RNG; seed before calling for reproducible nets.
    """
    for m in net.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
    return net


def named_parameters_numpy(net: nn.Module) -> dict:
    return {name: p.detach().cpu().numpy() for name, p in net.state_dict().items()}


def load_parameters_numpy(net: nn.Module, arrays: dict) -> None:
    state = {name: torch.from_numpy(arr.copy()) for name, arr in arrays.items()}
    net.load_state_dict(state)
