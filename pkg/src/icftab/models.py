"""Backbone architectures: an MLP over flattened channels and a 1-D
convolutional ResNet over (channel, feature) inputs, plus the wrapper
that composes them with the preprocessing arms.

The ResNet stacks residual blocks of two same-padding convolutions with
optional normalization and dropout, a projection shortcut where channel
counts change, periodic stride-2 pooling along the feature axis, a mean
over features, and a small dense head. Kernel size is a fraction of the
feature count. Channel width starts at 64 and doubles on the configured
block schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigurationError
from .lff import LearnedFourierFeatures

__all__ = [
    "MLP_WIDTHS",
    "MLP_DROPOUTS",
    "RESNET_DROPOUTS",
    "BASE_FILTERS",
    "MlpConfig",
    "ResNetConfig",
    "kernel_size",
    "Mlp",
    "ResNet1D",
    "TabularModel",
    "build_backbone",
]

MLP_WIDTHS = (128, 256, 512, 1024)
MLP_DROPOUTS = (0.0, 0.5, 0.6, 0.7, 0.8, 0.9)
RESNET_DROPOUTS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
GAPS = (0, 1, 2)
BASE_FILTERS = 64


@dataclass(frozen=True)
class MlpConfig:
    depth: int = 3
    width: int = 256
    activation: str = "ReLU"
    batch_norm: bool = False
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if not 2 <= self.depth <= 8:
            raise ConfigurationError(f"depth must be in [2, 8], got {self.depth}")
        if self.width not in MLP_WIDTHS:
            raise ConfigurationError(f"width must be one of {MLP_WIDTHS}, got {self.width}")
        if self.activation not in ("ReLU", "LeakyReLU"):
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.dropout not in MLP_DROPOUTS:
            raise ConfigurationError(f"dropout must be one of {MLP_DROPOUTS}, got {self.dropout}")


@dataclass(frozen=True)
class ResNetConfig:
    num_block: int = 2
    num_linear: int = 1
    use_norm: bool = True
    norm_type: str = "batch"
    use_dropout: bool = False
    dropout_prob: float = 0.1
    downsample_gap: int = 0
    increasefilter_gap: int = 0
    pooling: str = "MaxPooling"
    kernel_fraction: float = 0.5
    activation: str = "ReLU"

    def __post_init__(self) -> None:
        if not 1 <= self.num_block <= 3:
            raise ConfigurationError(f"num_block must be in [1, 3], got {self.num_block}")
        if not 1 <= self.num_linear <= 3:
            raise ConfigurationError(f"num_linear must be in [1, 3], got {self.num_linear}")
        if self.norm_type not in ("batch", "layer"):
            raise ConfigurationError(f"unknown norm type {self.norm_type!r}")
        if self.use_dropout and self.dropout_prob not in RESNET_DROPOUTS:
            raise ConfigurationError(f"dropout_prob must be one of {RESNET_DROPOUTS}")
        if self.downsample_gap not in GAPS or self.increasefilter_gap not in GAPS:
            raise ConfigurationError(f"gaps must be one of {GAPS}")
        if self.pooling not in ("MaxPooling", "AvgPooling"):
            raise ConfigurationError(f"unknown pooling {self.pooling!r}")
        if not 0.0 <= self.kernel_fraction <= 1.0:
            raise ConfigurationError("kernel_fraction must lie in [0, 1]")
        if self.activation not in ("ReLU", "LeakyReLU"):
            raise ConfigurationError(f"unknown activation {self.activation!r}")


def _activation(name: str) -> nn.Module:
    return nn.ReLU() if name == "ReLU" else nn.LeakyReLU()


def kernel_size(phi: float, f: int) -> int:
    """K = max(1, round(phi * F)) with half rounded away from zero."""
    return max(1, int(math.floor(phi * f + 0.5)))


class Mlp(nn.Module):
    """depth x (Linear -> [BatchNorm] -> activation -> [Dropout]) + linear head."""

    def __init__(self, in_dim: int, cfg: MlpConfig):
        super().__init__()
        layers: list[nn.Module] = []
        prev = in_dim
        for _ in range(cfg.depth):
            layers.append(nn.Linear(prev, cfg.width))
            if cfg.batch_norm:
                layers.append(nn.BatchNorm1d(cfg.width))
            layers.append(_activation(cfg.activation))
            if cfg.dropout > 0.0:
                layers.append(nn.Dropout(cfg.dropout))
            prev = cfg.width
        layers.append(nn.Linear(prev, 1))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


def _norm(kind: str, channels: int) -> nn.Module:
    if kind == "batch":
        return nn.BatchNorm1d(channels)
    # per-sample normalization over (channel, feature), the usual
    # layer-norm formulation for convolutional inputs
    return nn.GroupNorm(1, channels)


class _ResidualBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, k: int, cfg: ResNetConfig):
        super().__init__()
        self.conv1 = nn.Conv1d(c_in, c_out, k, padding="same")
        self.conv2 = nn.Conv1d(c_out, c_out, k, padding="same")
        self.norm1 = _norm(cfg.norm_type, c_out) if cfg.use_norm else nn.Identity()
        self.norm2 = _norm(cfg.norm_type, c_out) if cfg.use_norm else nn.Identity()
        self.act = _activation(cfg.activation)
        self.drop = nn.Dropout(cfg.dropout_prob) if cfg.use_dropout else nn.Identity()
        self.shortcut = nn.Conv1d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.drop(self.act(self.norm1(self.conv1(x))))
        h = self.norm2(self.conv2(h))
        return self.act(h + self.shortcut(x))


class ResNet1D(nn.Module):
    """Residual 1-D conv network over (N, channels, features) input.

    Pooling halves the feature axis every downsample_gap blocks; a
    configuration whose poolings would shrink the axis below one feature
    is rejected at build time. Channel width doubles every
    increasefilter_gap blocks (zero gap disables either schedule).
    """

    def __init__(self, in_channels: int, seq_len: int, cfg: ResNetConfig):
        super().__init__()
        if seq_len < 1 or in_channels < 1:
            raise ConfigurationError("input must have at least one feature and one channel")
        k = kernel_size(cfg.kernel_fraction, seq_len)
        blocks: list[nn.Module] = []
        c_in = in_channels
        c_out = BASE_FILTERS
        length = seq_len
        for i in range(cfg.num_block):
            if i > 0 and cfg.increasefilter_gap > 0 and i % cfg.increasefilter_gap == 0:
                c_out *= 2
            blocks.append(_ResidualBlock(c_in, c_out, k, cfg))
            c_in = c_out
            if cfg.downsample_gap > 0 and i % cfg.downsample_gap == cfg.downsample_gap - 1:
                if length < 2:
                    raise ConfigurationError(
                        f"pooling after block {i} would shrink the feature axis below one"
                    )
                blocks.append(
                    nn.MaxPool1d(2) if cfg.pooling == "MaxPooling" else nn.AvgPool1d(2)
                )
                length //= 2
        self.blocks = nn.Sequential(*blocks)
        head: list[nn.Module] = []
        for _ in range(cfg.num_linear - 1):
            head.append(nn.Linear(c_out, c_out))
            head.append(_activation(cfg.activation))
        head.append(nn.Linear(c_out, 1))
        self.head = nn.Sequential(*head)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.blocks(x)
        h = h.mean(dim=-1)
        return self.head(h)


class TabularModel(nn.Module):
    """Backbone plus the input plumbing for each preprocessing arm.

    Input conventions by arm:
      static   -- (N, D, M) channel tensor (one-hot / standardized)
      lff      -- (N, D) standardized features, embedded by a trainable
                  Fourier layer
      combined -- (N, d_num + d_cat * m_cat): standardized numeric
                  columns first, then the flattened one-hot block; the
                  Fourier embedding and the one-hot channels are
                  zero-padded to a common depth and concatenated
    """

    def __init__(
        self,
        family: str,
        backbone: nn.Module,
        arm: str,
        lff: LearnedFourierFeatures | None = None,
        d_num: int = 0,
        d_cat: int = 0,
        m_cat: int = 1,
    ):
        super().__init__()
        if family not in ("mlp", "resnet"):
            raise ConfigurationError(f"unknown model family {family!r}")
        if arm not in ("static", "lff", "combined"):
            raise ConfigurationError(f"unknown arm {arm!r}")
        if arm in ("lff", "combined") and lff is None:
            raise ConfigurationError(f"arm {arm!r} needs a Fourier layer")
        self.family = family
        self.arm = arm
        self.lff = lff
        self.d_num = d_num
        self.d_cat = d_cat
        self.m_cat = m_cat

        self.backbone = backbone

    def _to_backbone(self, t: torch.Tensor) -> torch.Tensor:
        # t: (N, D, M) channel tensor
        if self.family == "mlp":
            return self.backbone(t.reshape(t.shape[0], -1))
        return self.backbone(t.permute(0, 2, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.arm == "static":
            return self._to_backbone(x)
        if self.arm == "lff":
            return self._to_backbone(self.lff(x))
        n = x.shape[0]
        parts = []
        depth = 0
        if self.d_num:
            z = self.lff(x[:, : self.d_num])
            parts.append(z)
            depth = max(depth, z.shape[-1])
        if self.d_cat:
            oh = x[:, self.d_num :].reshape(n, self.d_cat, self.m_cat)
            parts.append(oh)
            depth = max(depth, self.m_cat)
        padded = [
            nn.functional.pad(p, (0, depth - p.shape[-1])) if p.shape[-1] < depth else p
            for p in parts
        ]
        return self._to_backbone(torch.cat(padded, dim=1))


def build_backbone(
    family: str,
    cfg: MlpConfig | ResNetConfig,
    n_features: int,
    channel_depth: int,
) -> nn.Module:
    """Instantiate the backbone for a (features, channels) input shape."""
    if family == "mlp":
        if not isinstance(cfg, MlpConfig):
            raise ConfigurationError("mlp family needs an MlpConfig")
        return Mlp(n_features * channel_depth, cfg)
    if family == "resnet":
        if not isinstance(cfg, ResNetConfig):
            raise ConfigurationError("resnet family needs a ResNetConfig")
        return ResNet1D(channel_depth, n_features, cfg)
    raise ConfigurationError(f"unknown model family {family!r}")
