"""Learned Fourier feature embeddings.

A trainable affine map sends standardized inputs to frequencies z, and
the embedding is cos(pi z) concatenated with sin(pi z) along the channel
axis. Two parameterizations:

  * conv1x1: one (M,) weight and bias shared across features, acting as
    a width-1 convolution over the feature axis. z[n,d,m] = w[m] x[n,d] + b[m].
  * linear: a full (D*M, D) projection that mixes features.
    z[n] = reshape(W x[n] + b, (D, M)).

Both produce an (N, D, 2M) tensor with every entry in [-1, 1]. The
backward pass is written out explicitly (the cos/sin chain rule through
the affine map) and wrapped in an autograd Function so the layers train
like any other module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigurationError

__all__ = [
    "LFF_DIMS",
    "CONV1X1",
    "LINEAR",
    "LffConfig",
    "init_lff",
    "lff_forward",
    "lff_backward",
    "LearnedFourierFeatures",
]

LFF_DIMS = (32, 64, 128, 256)
CONV1X1 = "Conv1x1LFF"
LINEAR = "LinearLFF"


@dataclass(frozen=True)
class LffConfig:
    variant: str = CONV1X1
    embed_dim: int = 64
    init_sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.variant not in (CONV1X1, LINEAR):
            raise ConfigurationError(f"unknown embedding variant {self.variant!r}")
        if self.embed_dim not in LFF_DIMS:
            raise ConfigurationError(f"embed_dim must be one of {LFF_DIMS}, got {self.embed_dim}")
        if not self.init_sigma >= 0:
            raise ConfigurationError("init_sigma must be nonnegative")


def init_lff(
    cfg: LffConfig, d: int, seed: int, dtype: torch.dtype = torch.float32
) -> tuple[torch.Tensor, torch.Tensor]:
    """Weights i.i.d. Normal(0, sigma^2), bias zero, seeded."""
    if d < 1:
        raise ConfigurationError("need at least one feature")
    gen = torch.Generator().manual_seed(seed)
    m = cfg.embed_dim
    if cfg.variant == CONV1X1:
        w = torch.randn(m, generator=gen, dtype=dtype) * cfg.init_sigma
        b = torch.zeros(m, dtype=dtype)
    else:
        w = torch.randn(d * m, d, generator=gen, dtype=dtype) * cfg.init_sigma
        b = torch.zeros(d * m, dtype=dtype)
    return w, b


def lff_forward(
    x: torch.Tensor, w: torch.Tensor, b: torch.Tensor, variant: str
) -> tuple[torch.Tensor, torch.Tensor]:
    """Embed (N, D) inputs into (N, D, 2M); also returns z for backward."""
    n, d = x.shape
    if variant == CONV1X1:
        z = x.unsqueeze(-1) * w.view(1, 1, -1) + b.view(1, 1, -1)
    elif variant == LINEAR:
        m = b.numel() // d
        z = (x @ w.t() + b).view(n, d, m)
    else:
        raise ConfigurationError(f"unknown embedding variant {variant!r}")
    pz = math.pi * z
    return torch.cat([torch.cos(pz), torch.sin(pz)], dim=-1), z


def lff_backward(
    grad_out: torch.Tensor,
    x: torch.Tensor,
    w: torch.Tensor,
    z: torch.Tensor,
    variant: str,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Exact gradients for (x, w, b) given the upstream gradient.

    d cos(pi z) = -pi sin(pi z) dz and d sin(pi z) = pi cos(pi z) dz,
    then the affine map routes dz into the inputs and parameters.
    """
    m = z.shape[-1]
    if grad_out.shape != (*z.shape[:-1], 2 * m):
        raise ConfigurationError(
            f"upstream gradient shape {tuple(grad_out.shape)} does not match forward output"
        )
    pz = math.pi * z
    g_cos = grad_out[..., :m]
    g_sin = grad_out[..., m:]
    gz = math.pi * (-torch.sin(pz) * g_cos + torch.cos(pz) * g_sin)
    if variant == CONV1X1:
        gx = (gz * w.view(1, 1, -1)).sum(dim=-1)
        gw = (gz * x.unsqueeze(-1)).sum(dim=(0, 1))
        gb = gz.sum(dim=(0, 1))
    else:
        n, d = x.shape
        gz_flat = gz.reshape(n, d * m)
        gx = gz_flat @ w
        gw = gz_flat.t() @ x
        gb = gz_flat.sum(dim=0)
    return gx, gw, gb


class _LffFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, w, b, variant):
        out, z = lff_forward(x, w, b, variant)
        ctx.save_for_backward(x, w, z)
        ctx.variant = variant
        return out

    @staticmethod
    def backward(ctx, grad_out):
        x, w, z = ctx.saved_tensors
        gx, gw, gb = lff_backward(grad_out, x, w, z, ctx.variant)
        return gx, gw, gb, None


class LearnedFourierFeatures(nn.Module):
    """Trainable Fourier embedding layer: (N, D) -> (N, D, 2M)."""

    def __init__(self, cfg: LffConfig, d: int, seed: int, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        self.d = d
        w, b = init_lff(cfg, d, seed, dtype)
        self.weight = nn.Parameter(w)
        self.bias = nn.Parameter(b)

    @property
    def out_channels(self) -> int:
        return 2 * self.cfg.embed_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return _LffFunction.apply(x, self.weight, self.bias, self.cfg.variant)
