"""Training loop with early stopping, the AdamW update, the cosine
warm-restart schedule, and model snapshot serialization.

The loop runs minibatch epochs (batch 256; a smaller training set is a
single full batch), evaluates the selection criterion on the
early-stopping rows after every epoch, snapshots on strict improvement,
and stops after 40 epochs without improvement or at the 400-epoch cap.
A non-finite loss aborts the run as a divergence and the caller records
the worst-possible score for it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
import torch
from torch.nn import functional as F

from .data import CLASSIFICATION, REGRESSION
from .errors import ConfigurationError, DataError
from .metrics import metric_accuracy, metric_mae
from .transforms import TargetTransform, identity_transform

__all__ = [
    "T0_CHOICES",
    "T_MULT_CHOICES",
    "OptimizerConfig",
    "AdamWState",
    "adamw_step",
    "cosine_warm_restart_lr",
    "loss_fn",
    "TrainState",
    "train",
    "predict",
    "save_snapshot",
    "load_snapshot",
]

T0_CHOICES = (10, 20, 30, 50, 75, 100)
T_MULT_CHOICES = (1, 2)

MAX_EPOCHS = 400
PATIENCE = 40
BATCH_SIZE = 256

_BETA1 = 0.9
_BETA2 = 0.999
_SNAP_MAGIC = b"ICFS"
_SNAP_VERSION = 1


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.01
    eps: float = 1e-8
    weight_decay: float = 0.0001
    t0: int = 50
    t_mult: int = 1

    def __post_init__(self) -> None:
        if not 0.001 <= self.learning_rate <= 0.1:
            raise ConfigurationError(f"learning_rate out of range: {self.learning_rate}")
        if not 1e-8 <= self.eps <= 1e-4:
            raise ConfigurationError(f"eps out of range: {self.eps}")
        if not 0.0001 <= self.weight_decay <= 0.6:
            raise ConfigurationError(f"weight_decay out of range: {self.weight_decay}")
        if self.t0 not in T0_CHOICES:
            raise ConfigurationError(f"t0 must be one of {T0_CHOICES}, got {self.t0}")
        if self.t_mult not in T_MULT_CHOICES:
            raise ConfigurationError(f"t_mult must be one of {T_MULT_CHOICES}")


@dataclass
class AdamWState:
    step: int = 0
    m: list[torch.Tensor] = field(default_factory=list)
    v: list[torch.Tensor] = field(default_factory=list)


def adamw_step(
    params: list[torch.Tensor],
    grads: list[torch.Tensor],
    state: AdamWState,
    cfg: OptimizerConfig,
    lr_t: float,
) -> AdamWState:
    """One decoupled-weight-decay Adam update, in place.

    Order per parameter: multiplicative decay p <- p - lr_t * wd * p,
    then the bias-corrected moment update with beta1=0.9, beta2=0.999
    and the configured eps added outside the square root's argument:
    p <- p - lr_t * m_hat / (sqrt(v_hat) + eps).
    """
    if not state.m:
        state.m = [torch.zeros_like(p) for p in params]
        state.v = [torch.zeros_like(p) for p in params]
    state.step += 1
    bc1 = 1.0 - _BETA1 ** state.step
    bc2 = 1.0 - _BETA2 ** state.step
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            if cfg.weight_decay:
                p.mul_(1.0 - lr_t * cfg.weight_decay)
            m.mul_(_BETA1).add_(g, alpha=1.0 - _BETA1)
            v.mul_(_BETA2).addcmul_(g, g, value=1.0 - _BETA2)
            denom = (v / bc2).sqrt_().add_(cfg.eps)
            p.addcdiv_(m, denom, value=-lr_t / bc1)
    return state


def cosine_warm_restart_lr(epoch: int, t0: int, t_mult: int, lr_max: float) -> float:
    """Cosine annealing with warm restarts, eta_min 0, stepped per epoch.

    Cycle i has length t0 * t_mult**i; within a cycle,
    lr = 0.5 * lr_max * (1 + cos(pi * t_cur / T_i)), and each restart
    resets t_cur to zero (so the restart epoch runs at lr_max again).
    """
    if epoch < 0:
        raise ConfigurationError("epoch must be nonnegative")
    t_cur = epoch
    t_i = t0
    while t_cur >= t_i:
        t_cur -= t_i
        t_i *= t_mult
    return 0.5 * lr_max * (1.0 + math.cos(math.pi * t_cur / t_i))


def loss_fn(pred: torch.Tensor, y: torch.Tensor, task: str) -> torch.Tensor:
    """Binary cross-entropy with logits for classification (stable
    log-sum-exp form), mean squared error for regression."""
    if task == CLASSIFICATION:
        return F.binary_cross_entropy_with_logits(pred, y)
    if task == REGRESSION:
        return F.mse_loss(pred, y)
    raise ConfigurationError(f"unknown task {task!r}")


@dataclass
class TrainState:
    best_criterion: float | None
    best_epoch: int
    epochs_run: int
    stop_reason: str  # "patience" | "max_epochs" | "divergence"
    snapshot: dict[str, torch.Tensor] | None


def predict(model: torch.nn.Module, x: torch.Tensor, batch: int = 4096) -> torch.Tensor:
    """Eval-mode forward over row batches; returns a flat (N,) tensor."""
    model.eval()
    outs = []
    with torch.no_grad():
        for i in range(0, x.shape[0], batch):
            outs.append(model(x[i : i + batch]).reshape(-1))
    return torch.cat(outs)


def _criterion(
    model: torch.nn.Module,
    task: str,
    x_es: torch.Tensor,
    y_es_raw: np.ndarray,
    transform: TargetTransform,
) -> float:
    preds = predict(model, x_es)
    if task == CLASSIFICATION:
        labels = (preds > 0).to(torch.float64).numpy()
        return metric_accuracy(labels, y_es_raw)
    values = transform.inverse(preds.to(torch.float64).numpy())
    return metric_mae(values, y_es_raw)


def _improved(task: str, candidate: float, best: float | None) -> bool:
    if not math.isfinite(candidate):
        return False
    if best is None:
        return True
    return candidate > best if task == CLASSIFICATION else candidate < best


def train(
    model: torch.nn.Module,
    task: str,
    x_train: torch.Tensor,
    y_train: torch.Tensor,
    x_earlystop: torch.Tensor,
    y_earlystop_raw: np.ndarray,
    opt_cfg: OptimizerConfig,
    seed: int,
    target_transform: TargetTransform | None = None,
    max_epochs: int = MAX_EPOCHS,
    patience: int = PATIENCE,
    batch_size: int = BATCH_SIZE,
    eval_hook=None,
) -> TrainState:
    """Train with early stopping on the held-out early-stopping rows.

    The criterion is validation accuracy (maximized) for classification
    and validation MAE on the untransformed target scale (minimized) for
    regression; regression predictions pass through the inverse target
    transform before scoring. The snapshot of the best epoch is restored
    into the model before returning. eval_hook, when given, replaces the
    criterion computation (used to exercise the stopping protocol).
    """
    if task not in (CLASSIFICATION, REGRESSION):
        raise ConfigurationError(f"unknown task {task!r}")
    transform = target_transform or identity_transform()
    torch.manual_seed(seed)  # dropout masks; one trial owns the model
    gen = torch.Generator().manual_seed(seed ^ 0x5EED)
    params = [p for p in model.parameters() if p.requires_grad]
    state = AdamWState()
    n = x_train.shape[0]
    best: float | None = None
    best_epoch = 0
    snapshot: dict[str, torch.Tensor] | None = None

    for epoch in range(1, max_epochs + 1):
        lr_t = cosine_warm_restart_lr(epoch - 1, opt_cfg.t0, opt_cfg.t_mult, opt_cfg.learning_rate)
        model.train()
        order = torch.randperm(n, generator=gen)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            if idx.numel() == 1 and n > 1:
                continue  # batch-norm cannot normalize a single row
            pred = model(x_train[idx]).reshape(-1)
            loss = loss_fn(pred, y_train[idx], task)
            if not torch.isfinite(loss):
                return TrainState(
                    best_criterion=None,
                    best_epoch=0,
                    epochs_run=epoch,
                    stop_reason="divergence",
                    snapshot=None,
                )
            model.zero_grad(set_to_none=True)
            loss.backward()
            grads = [p.grad if p.grad is not None else torch.zeros_like(p) for p in params]
            adamw_step(params, grads, state, opt_cfg, lr_t)

        if eval_hook is not None:
            crit = eval_hook(model, epoch)
        else:
            crit = _criterion(model, task, x_earlystop, y_earlystop_raw, transform)
        if _improved(task, crit, best):
            best = crit
            best_epoch = epoch
            snapshot = {k: v.detach().clone() for k, v in model.state_dict().items()}
        if epoch - best_epoch >= patience:
            if snapshot is not None:
                model.load_state_dict(snapshot)
            return TrainState(best, best_epoch, epoch, "patience", snapshot)

    if snapshot is not None:
        model.load_state_dict(snapshot)
    return TrainState(best, best_epoch, max_epochs, "max_epochs", snapshot)


def save_snapshot(path, state_dict: dict[str, torch.Tensor]) -> None:
    """Versioned binary snapshot: a shape table followed by float64
    little-endian payloads, one entry per parameter/buffer."""
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write(struct.pack("<II", _SNAP_VERSION, len(state_dict)))
        for name, tensor in state_dict.items():
            raw = name.encode("utf-8")
            arr = tensor.detach().to(torch.float64).numpy()
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q" if arr.ndim else "<0Q", *arr.shape))
            fh.write(arr.astype("<f8").tobytes(order="C"))


def load_snapshot(path) -> dict[str, torch.Tensor]:
    with open(path, "rb") as fh:
        if fh.read(4) != _SNAP_MAGIC:
            raise DataError("not a snapshot file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _SNAP_VERSION:
            raise DataError(f"unsupported snapshot version {version}")
        out: dict[str, torch.Tensor] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)) if ndim else ()
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * size), dtype="<f8").reshape(shape)
            out[name] = torch.from_numpy(data.copy())
    return out
