"""The patch classifier network.

Eleven feature blocks and a head: two plain conv blocks, three residual
blocks, and two dense-fusion blocks all at the base width, then three
downsampling blocks that double the width each time, then global average
pooling into the class logits.  With the default base width 16 the
feature widths run 16 x7, 32, 64, 128.
"""

from __future__ import annotations

import torch
from torch import nn

from .blocks import (
    ClassifierHead,
    ConvBlock,
    DenseFusionBlock,
    DownsampleBlock,
    ResidualBlock,
)

N_CLASSES = 3


def feature_blocks(in_channels: int = 3, base: int = 16) -> list[nn.Module]:
    return [
        ConvBlock(in_channels, base),
        ConvBlock(base, base),
        ResidualBlock(base),
        ResidualBlock(base),
        ResidualBlock(base),
        DenseFusionBlock(base),
        DenseFusionBlock(base),
        DownsampleBlock(base),
        DownsampleBlock(2 * base),
        DownsampleBlock(4 * base),
    ]


class PatchClassifier(nn.Module):
    def __init__(self, in_channels: int = 3, base: int = 16):
        super().__init__()
        self.features = nn.Sequential(*feature_blocks(in_channels, base))
        self.head = ClassifierHead(8 * base, N_CLASSES)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Class logits for a batch of (N, C, H, W) patches."""
        return self.head(self.features(x))

    @torch.no_grad()
    def predict_proba(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=1)


def freeze_batchnorm_stats(model: nn.Module) -> None:
    """Stop running-stat updates so train-mode forwards are pure functions."""
    for m in model.modules():
        if isinstance(m, nn.modules.batchnorm._BatchNorm):
            m.momentum = 0.0
