"""Backbone architectures and per-layer gradient correctness.

Gradient checks compare analytic gradients against central finite
differences in float64; dropout layers are checked under a reseeded
mask so both evaluations see the same pattern.
"""

import math

import pytest
import torch
from torch import nn

from icftab.errors import ConfigurationError
from icftab.lff import CONV1X1, LINEAR, LearnedFourierFeatures, LffConfig
from icftab.models import (
    BASE_FILTERS,
    Mlp,
    MlpConfig,
    ResNet1D,
    ResNetConfig,
    TabularModel,
    build_backbone,
    kernel_size,
)
from icftab.training import loss_fn

torch.manual_seed(0)


def numeric_grad_at(fn, tensor, indices, h=1e-6):
    flat = tensor.view(-1)
    out = []
    for i in indices:
        orig = flat[i].item()
        flat[i] = orig + h
        up = fn()
        flat[i] = orig - h
        down = fn()
        flat[i] = orig
        out.append((up - down) / (2 * h))
    return torch.tensor(out, dtype=tensor.dtype)


def check_module_grads(module, x, seed=None, rtol=1e-4, atol=1e-7, max_entries=25):
    """Compare autograd and central finite differences for the input and
    every parameter, probing up to max_entries coordinates per tensor.

    atol absorbs the central-difference noise floor (relevant where the
    true gradient vanishes, e.g. a linear bias feeding a batch norm).
    """
    module = module.double()
    x = x.double().requires_grad_(True)
    weights = torch.randn_like(module(x) if seed is None else _seeded_forward(module, x, seed))

    def scalar():
        out = module(x) if seed is None else _seeded_forward(module, x, seed)
        return (out * weights).sum()

    loss = scalar()
    module.zero_grad()
    if x.grad is not None:
        x.grad = None
    loss.backward()
    pick = torch.Generator().manual_seed(0 if seed is None else seed)
    targets = [("input", x)] + [(n, p) for n, p in module.named_parameters()]
    for name, t in targets:
        got = t.grad if t.grad is not None else torch.zeros_like(t)
        n = t.numel()
        idx = (
            list(range(n))
            if n <= max_entries
            else torch.randperm(n, generator=pick)[:max_entries].tolist()
        )
        # perturb t.data so finite differences hit the storage autograd saw
        ref = numeric_grad_at(lambda: scalar().item(), t.data, idx)
        got_sel = got.view(-1)[idx]
        diff = (got_sel - ref).abs().max().item()
        assert diff <= atol + rtol * ref.abs().max().item(), f"{name}: grad diff {diff}"


def _seeded_forward(module, x, seed):
    torch.manual_seed(seed)
    return module(x)


class TestKernelSize:
    def test_half_rounds_away_from_zero(self):
        assert kernel_size(0.5, 7) == 4

    def test_floor_and_unit_minimum(self):
        assert kernel_size(0.0, 9) == 1
        assert kernel_size(1.0, 9) == 9
        assert kernel_size(0.2, 9) == 2  # 1.8 rounds to 2
        assert kernel_size(0.01, 5) == 1


class TestMlp:
    def test_zero_weights_constant_output(self):
        cfg = MlpConfig(depth=2, width=128)
        mlp = Mlp(4, cfg)
        with torch.no_grad():
            for p in mlp.parameters():
                p.zero_()
        out = mlp(torch.randn(8, 4))
        assert torch.equal(out, torch.zeros(8, 1))

    def test_eval_mode_deterministic_with_dropout(self):
        cfg = MlpConfig(depth=3, width=128, dropout=0.5, batch_norm=True)
        mlp = Mlp(5, cfg)
        mlp.eval()
        x = torch.randn(16, 5)
        assert torch.equal(mlp(x), mlp(x))

    def test_dropout_eval_is_identity(self):
        drop = nn.Dropout(0.9)
        drop.eval()
        x = torch.randn(10, 3)
        assert torch.equal(drop(x), x)

    def test_depth_counts_hidden_layers(self):
        cfg = MlpConfig(depth=4, width=128)
        mlp = Mlp(3, cfg)
        linears = [m for m in mlp.net if isinstance(m, nn.Linear)]
        assert len(linears) == 5  # 4 hidden + head

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            MlpConfig(depth=9)
        with pytest.raises(ConfigurationError):
            MlpConfig(width=100)
        with pytest.raises(ConfigurationError):
            MlpConfig(dropout=0.25)


class TestResNet:
    def test_identity_initialized_block_passes_activation_of_shortcut(self):
        cfg = ResNetConfig(num_block=1, use_norm=False, use_dropout=False, kernel_fraction=0.4)
        net = ResNet1D(BASE_FILTERS, 6, cfg)  # matching channels: identity shortcut
        block = net.blocks[0]
        with torch.no_grad():
            block.conv2.weight.zero_()
            block.conv2.bias.zero_()
        x = torch.randn(4, BASE_FILTERS, 6)
        out = block(x)
        assert torch.allclose(out, torch.relu(x), atol=1e-12)

    def test_projection_shortcut_when_channels_change(self):
        cfg = ResNetConfig(num_block=1)
        net = ResNet1D(3, 5, cfg)
        assert isinstance(net.blocks[0].shortcut, nn.Conv1d)

    def test_pooling_overshrink_rejected(self):
        cfg = ResNetConfig(num_block=2, downsample_gap=1)
        with pytest.raises(ConfigurationError):
            ResNet1D(4, 2, cfg)  # 2 -> 1 -> pooling a single feature fails

    def test_pooling_allowed_when_axis_survives(self):
        cfg = ResNetConfig(num_block=2, downsample_gap=1)
        net = ResNet1D(4, 5, cfg)  # 5 -> 2 -> 1
        out = net(torch.randn(3, 4, 5))
        assert out.shape == (3, 1)

    def test_channel_doubling_schedule(self):
        cfg = ResNetConfig(num_block=3, increasefilter_gap=1)
        net = ResNet1D(4, 8, cfg)
        convs = [b.conv1 for b in net.blocks if hasattr(b, "conv1")]
        assert [c.out_channels for c in convs] == [64, 128, 256]

    def test_gap_zero_disables_schedules(self):
        cfg = ResNetConfig(num_block=3, increasefilter_gap=0, downsample_gap=0)
        net = ResNet1D(4, 8, cfg)
        convs = [b.conv1 for b in net.blocks if hasattr(b, "conv1")]
        assert [c.out_channels for c in convs] == [64, 64, 64]
        assert not any(isinstance(m, (nn.MaxPool1d, nn.AvgPool1d)) for m in net.blocks)

    def test_head_layer_count(self):
        cfg = ResNetConfig(num_block=1, num_linear=3)
        net = ResNet1D(4, 6, cfg)
        assert len([m for m in net.head if isinstance(m, nn.Linear)]) == 3

    def test_eval_deterministic(self):
        cfg = ResNetConfig(num_block=2, use_norm=True, use_dropout=True, dropout_prob=0.4)
        net = ResNet1D(3, 7, cfg)
        net.train()
        net(torch.randn(12, 3, 7))  # populate batch-norm running stats
        net.eval()
        x = torch.randn(6, 3, 7)
        assert torch.equal(net(x), net(x))


class TestGradients:
    """Central-difference checks for every differentiable layer."""

    def test_linear(self):
        check_module_grads(nn.Linear(4, 3), torch.randn(5, 4))

    def test_conv1d_odd_and_even_kernels(self):
        for k in (1, 2, 3):
            check_module_grads(nn.Conv1d(2, 3, k, padding="same"), torch.randn(4, 2, 6))

    def test_batchnorm_train_mode(self):
        bn = nn.BatchNorm1d(3)
        bn.train()
        check_module_grads(bn, torch.randn(6, 3))

    def test_groupnorm_layer_style(self):
        check_module_grads(nn.GroupNorm(1, 3), torch.randn(5, 3, 4))

    def test_activations(self):
        check_module_grads(nn.ReLU(), torch.randn(6, 5) + 0.1)
        check_module_grads(nn.LeakyReLU(), torch.randn(6, 5) + 0.1)

    def test_dropout_with_frozen_mask(self):
        drop = nn.Dropout(0.5)
        drop.train()
        check_module_grads(drop, torch.randn(6, 5), seed=123)

    def test_pools(self):
        check_module_grads(nn.MaxPool1d(2), torch.randn(4, 3, 8))
        check_module_grads(nn.AvgPool1d(2), torch.randn(4, 3, 8))

    def test_mean_over_features(self):
        class MeanLast(nn.Module):
            def forward(self, x):
                return x.mean(dim=-1)

        check_module_grads(MeanLast(), torch.randn(4, 3, 6))

    def test_lff_layers(self):
        for variant in (CONV1X1, LINEAR):
            layer = LearnedFourierFeatures(
                LffConfig(variant=variant, embed_dim=32), d=3, seed=2, dtype=torch.float64
            )
            check_module_grads(layer, torch.randn(4, 3))

    def test_losses(self):
        torch.manual_seed(4)
        for task in ("classification", "regression"):
            pred = torch.randn(12, dtype=torch.float64, requires_grad=True)
            y = (torch.rand(12) > 0.5).double() if task == "classification" else torch.randn(12).double()
            loss = loss_fn(pred, y, task)
            loss.backward()
            idx = list(range(pred.numel()))
            ref = numeric_grad_at(lambda: loss_fn(pred, y, task).item(), pred.data, idx)
            scale = max(ref.abs().max().item(), 1e-8)
            assert ((pred.grad - ref).abs().max().item() / scale) <= 1e-4

    def test_bce_gradient_closed_form(self):
        pred = torch.zeros(1, dtype=torch.float64, requires_grad=True)
        y = torch.ones(1, dtype=torch.float64)
        loss_fn(pred, y, "classification").backward()
        assert pred.grad.item() == pytest.approx(-0.5, abs=1e-12)

    def test_full_mlp_backbone(self):
        cfg = MlpConfig(depth=2, width=128, batch_norm=True, activation="LeakyReLU")
        check_module_grads(Mlp(3, cfg), torch.randn(5, 3))

    def test_full_resnet_backbone(self):
        cfg = ResNetConfig(num_block=2, use_norm=True, norm_type="layer", kernel_fraction=0.5)
        check_module_grads(ResNet1D(3, 6, cfg), torch.randn(4, 3, 6))


class TestLossValues:
    def test_bce_at_zero_logit(self):
        pred = torch.zeros(3)
        y = torch.ones(3)
        assert loss_fn(pred, y, "classification").item() == pytest.approx(math.log(2), rel=1e-6)

    def test_mse_perfect(self):
        y = torch.randn(5)
        assert loss_fn(y, y, "regression").item() == 0.0


class TestTabularModel:
    def test_static_mlp_flattens(self):
        backbone = build_backbone("mlp", MlpConfig(depth=2, width=128), n_features=3, channel_depth=4)
        model = TabularModel("mlp", backbone, "static")
        out = model(torch.randn(6, 3, 4))
        assert out.shape == (6, 1)

    def test_static_resnet_permutes_channels(self):
        backbone = build_backbone("resnet", ResNetConfig(num_block=1), n_features=3, channel_depth=4)
        model = TabularModel("resnet", backbone, "static")
        out = model(torch.randn(6, 3, 4))
        assert out.shape == (6, 1)

    def test_lff_arm(self):
        lff = LearnedFourierFeatures(LffConfig(variant=CONV1X1, embed_dim=32), d=3, seed=0)
        backbone = build_backbone("mlp", MlpConfig(depth=2, width=128), n_features=3, channel_depth=64)
        model = TabularModel("mlp", backbone, "lff", lff=lff)
        assert model(torch.randn(5, 3)).shape == (5, 1)

    def test_combined_arm_pads_and_concatenates(self):
        lff = LearnedFourierFeatures(LffConfig(variant=CONV1X1, embed_dim=32), d=2, seed=0)
        depth = max(64, 5)
        backbone = build_backbone("mlp", MlpConfig(depth=2, width=128), n_features=4, channel_depth=depth)
        model = TabularModel("mlp", backbone, "combined", lff=lff, d_num=2, d_cat=2, m_cat=5)
        x = torch.cat([torch.randn(7, 2), torch.randn(7, 10)], dim=1)
        assert model(x).shape == (7, 1)

    def test_missing_lff_rejected(self):
        backbone = build_backbone("mlp", MlpConfig(depth=2, width=128), 3, 1)
        with pytest.raises(ConfigurationError):
            TabularModel("mlp", backbone, "lff")
