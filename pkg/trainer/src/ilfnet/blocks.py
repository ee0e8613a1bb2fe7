"""Building blocks of the patch classifier.

Four feature block types plus a classifier head.  All convolutions keep
spatial size except the downsampling block, which halves it (odd sizes
round up, matching floor((n - 1) / 2) + 1 on both branches).
"""

from __future__ import annotations

import torch
from torch import nn


def conv_bn_relu(cin: int, cout: int, kernel: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel, padding=kernel // 2),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class ConvBlock(nn.Module):
    """Plain 3x3 conv + BN + ReLU."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.body = conv_bn_relu(cin, cout, 3)

    def forward(self, x):
        return self.body(x)


class ResidualBlock(nn.Module):
    """Identity skip around a 3x3 unit followed by a 1x1 unit."""

    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            conv_bn_relu(channels, channels, 3),
            conv_bn_relu(channels, channels, 1),
        )

    def forward(self, x):
        return x + self.body(x)


class DenseFusionBlock(nn.Module):
    """Two densely connected 3x3 units fused back to the input width.

    Each unit sees the concatenation of everything before it; a 1x1
    fusion conv (no BN, no activation) projects the stack back down and
    is added to the input.
    """

    def __init__(self, channels: int, growth: int | None = None):
        super().__init__()
        growth = channels if growth is None else growth
        self.unit1 = conv_bn_relu(channels, growth, 3)
        self.unit2 = conv_bn_relu(channels + growth, growth, 3)
        self.fuse = nn.Conv2d(channels + 2 * growth, channels, 1)

    def forward(self, x):
        c1 = self.unit1(x)
        c2 = self.unit2(torch.cat([x, c1], dim=1))
        return x + self.fuse(torch.cat([x, c1, c2], dim=1))


class DownsampleBlock(nn.Module):
    """Channel-doubling block that halves the spatial size.

    Main path: two 3x3 units then a 3x3 stride-2 average pool.  Skip
    path: a bare 1x1 stride-2 conv.  The halves are summed.
    """

    def __init__(self, cin: int):
        super().__init__()
        cout = 2 * cin
        self.body = nn.Sequential(
            conv_bn_relu(cin, cout, 3),
            conv_bn_relu(cout, cout, 3),
            nn.AvgPool2d(3, stride=2, padding=1),
        )
        self.skip = nn.Conv2d(cin, cout, 1, stride=2)

    def forward(self, x):
        return self.body(x) + self.skip(x)


class ClassifierHead(nn.Module):
    """Global average pool into a linear layer over the classes.

    The linear layer starts at zero so an untrained network is exactly
    uniform over the classes.
    """

    def __init__(self, cin: int, classes: int):
        super().__init__()
        self.fc = nn.Linear(cin, classes)
        nn.init.zeros_(self.fc.weight)
        nn.init.zeros_(self.fc.bias)

    def forward(self, x):
        return self.fc(x.mean(dim=(2, 3)))
