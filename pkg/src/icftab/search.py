"""Random hyperparameter search harness.

Samples configurations from the documented parameter spaces, flips the
fair coin between the Fourier-embedding and categorical-detection arms
for the *-fc model kinds, runs trials end to end, and persists one JSON
record per run (append-only JSONL). Failed trials stay in the record
stream with a failure marker so budget simulations pay for them, and
diverged trials record worst-possible scores.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .data import CLASSIFICATION, REGRESSION, TEST, TRAIN, VALID, Dataset
from .encoding import CfdEncoder
from .errors import ConfigurationError, DataError, IcfTabError
from .icf import ANOVA, CHI2, MUTUAL_INFO, IcfConfig, run_icf
from .lff import LFF_DIMS, CONV1X1, LINEAR, LearnedFourierFeatures, LffConfig
from .metrics import metric_accuracy, metric_mae, metric_r2
from .models import (
    MLP_DROPOUTS,
    MLP_WIDTHS,
    RESNET_DROPOUTS,
    MlpConfig,
    ResNetConfig,
    TabularModel,
    build_backbone,
)
from .training import (
    T0_CHOICES,
    T_MULT_CHOICES,
    OptimizerConfig,
    TrainState,
    predict,
    train,
)
from .transforms import TargetTransform, fit_gaussian_target, identity_transform

__all__ = [
    "MODEL_KINDS",
    "HyperSample",
    "RunRecord",
    "uniform",
    "log_uniform",
    "log_uniform_int",
    "sample_hyperparams",
    "run_trial",
    "run_trials",
    "run_search",
    "select_best",
    "write_records",
    "read_records",
    "record_to_dict",
    "record_from_dict",
]

MODEL_KINDS = ("mlp", "resnet", "mlp-fc", "resnet-fc")

ARM_NONE = "none"
ARM_CFD = "cfd"
ARM_LFF = "lff"
ARM_COMBINED = "combined"

RECORD_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# sampling primitives

def uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(rng.uniform(lo, hi))


def log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    """exp of a uniform draw in log space."""
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def log_uniform_int(rng: np.random.Generator, lo: int, hi: int) -> int:
    """Rounded log-uniform draw, clipped to the inclusive range.

    No in-scope space needs it, but externally produced records (for
    example a gradient-boosting baseline) sample integer ranges this way.
    """
    return int(np.clip(round(log_uniform(rng, lo, hi)), lo, hi))


def _choice(rng: np.random.Generator, options):
    return options[int(rng.integers(0, len(options)))]


def sample_mlp_config(rng: np.random.Generator) -> MlpConfig:
    return MlpConfig(
        depth=int(rng.integers(2, 9)),
        width=_choice(rng, MLP_WIDTHS),
        activation=_choice(rng, ("ReLU", "LeakyReLU")),
        batch_norm=bool(rng.integers(0, 2)),
        dropout=_choice(rng, MLP_DROPOUTS),
    )


def sample_resnet_config(rng: np.random.Generator) -> ResNetConfig:
    return ResNetConfig(
        num_block=int(rng.integers(1, 4)),
        num_linear=int(rng.integers(1, 4)),
        use_norm=bool(rng.integers(0, 2)),
        norm_type=_choice(rng, ("batch", "layer")),
        use_dropout=bool(rng.integers(0, 2)),
        dropout_prob=_choice(rng, RESNET_DROPOUTS),
        downsample_gap=_choice(rng, (0, 1, 2)),
        increasefilter_gap=_choice(rng, (0, 1, 2)),
        pooling=_choice(rng, ("MaxPooling", "AvgPooling")),
        kernel_fraction=uniform(rng, 0.0, 1.0),
        activation=_choice(rng, ("ReLU", "LeakyReLU")),
    )


def sample_optimizer_config(rng: np.random.Generator) -> OptimizerConfig:
    return OptimizerConfig(
        learning_rate=uniform(rng, 0.001, 0.1),
        eps=uniform(rng, 1e-8, 1e-4),
        weight_decay=uniform(rng, 0.0001, 0.6),
        t0=_choice(rng, T0_CHOICES),
        t_mult=_choice(rng, T_MULT_CHOICES),
    )


def sample_icf_config(rng: np.random.Generator, task: str) -> IcfConfig:
    if task == CLASSIFICATION:
        test = CHI2
    else:
        test = _choice(rng, (ANOVA, MUTUAL_INFO))
    return IcfConfig(
        test=test,
        chi_thresh=uniform(rng, 1e-50, 1e-3),
        anova_thresh=uniform(rng, 1e-30, 1e-3),
        mi_thresh=uniform(rng, 0.75, 1.50),
        min_cardinality=_choice(rng, (0, 10, 100)),
        max_cardinality=_choice(rng, (300, 500, 1000, 1500, 5000)),
        auto_low_card=bool(rng.integers(0, 2)),
    )


def sample_lff_config(rng: np.random.Generator) -> LffConfig:
    return LffConfig(
        variant=_choice(rng, (CONV1X1, LINEAR)),
        embed_dim=_choice(rng, LFF_DIMS),
        init_sigma=1.0,
    )


@dataclass(frozen=True)
class HyperSample:
    """One sampled configuration: the unit of random search."""

    model_family: str  # "mlp" | "resnet"
    preprocessing: str  # none | cfd | lff | combined
    optimizer: OptimizerConfig
    mlp: MlpConfig | None = None
    resnet: ResNetConfig | None = None
    icf: IcfConfig | None = None
    lff: LffConfig | None = None
    gaussian_target: bool = False
    seed: int = 0

    def to_dict(self) -> dict:
        out = asdict(self)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "HyperSample":
        return cls(
            model_family=d["model_family"],
            preprocessing=d["preprocessing"],
            optimizer=OptimizerConfig(**d["optimizer"]),
            mlp=MlpConfig(**d["mlp"]) if d.get("mlp") else None,
            resnet=ResNetConfig(**d["resnet"]) if d.get("resnet") else None,
            icf=IcfConfig(**d["icf"]) if d.get("icf") else None,
            lff=LffConfig(**d["lff"]) if d.get("lff") else None,
            gaussian_target=d.get("gaussian_target", False),
            seed=d["seed"],
        )


def sample_hyperparams(
    rng: np.random.Generator, model_kind: str, task: str, combined_mode: bool = False
) -> HyperSample:
    """Draw one configuration for the given model kind.

    Base kinds (mlp, resnet) use no preprocessing beyond one-hot of the
    dataset's explicit categorical annotations. The *-fc kinds flip a
    fair coin between the Fourier and categorical-detection arms per
    run, or always use the combined wiring when combined_mode is set.
    """
    if model_kind not in MODEL_KINDS:
        raise ConfigurationError(f"unknown model kind {model_kind!r}; choose from {MODEL_KINDS}")
    family = "mlp" if model_kind.startswith("mlp") else "resnet"
    if model_kind.endswith("-fc"):
        if combined_mode:
            arm = ARM_COMBINED
        else:
            arm = ARM_LFF if rng.integers(0, 2) == 0 else ARM_CFD
    else:
        arm = ARM_NONE
    sample = HyperSample(
        model_family=family,
        preprocessing=arm,
        optimizer=sample_optimizer_config(rng),
        mlp=sample_mlp_config(rng) if family == "mlp" else None,
        resnet=sample_resnet_config(rng) if family == "resnet" else None,
        icf=sample_icf_config(rng, task) if arm in (ARM_CFD, ARM_COMBINED) else None,
        lff=sample_lff_config(rng) if arm in (ARM_LFF, ARM_COMBINED) else None,
        gaussian_target=bool(rng.integers(0, 2)) if task == REGRESSION else False,
        seed=int(rng.integers(0, 2**31 - 1)),
    )
    return sample


# ---------------------------------------------------------------------------
# trial execution

@dataclass
class RunRecord:
    dataset_id: str
    model: str
    run_index: int
    sample: HyperSample
    status: str  # "completed" | "diverged" | "failed"
    arm: str
    val_criterion: float | None
    test_metric: float | None
    epochs_run: int
    stop_reason: str | None
    wall_time_s: float
    error: str | None = None
    schema_version: int = RECORD_SCHEMA_VERSION


def _clean_float(v):
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


def record_to_dict(rec: RunRecord) -> dict:
    return {
        "schema_version": rec.schema_version,
        "dataset_id": rec.dataset_id,
        "model": rec.model,
        "run_index": rec.run_index,
        "sample": rec.sample.to_dict(),
        "status": rec.status,
        "arm": rec.arm,
        "val_criterion": _clean_float(rec.val_criterion),
        "test_metric": _clean_float(rec.test_metric),
        "epochs_run": rec.epochs_run,
        "stop_reason": rec.stop_reason,
        "wall_time_s": rec.wall_time_s,
        "error": rec.error,
    }


def record_from_dict(d: dict) -> RunRecord:
    return RunRecord(
        dataset_id=d["dataset_id"],
        model=d["model"],
        run_index=d["run_index"],
        sample=HyperSample.from_dict(d["sample"]),
        status=d["status"],
        arm=d["arm"],
        val_criterion=d.get("val_criterion"),
        test_metric=d.get("test_metric"),
        epochs_run=d.get("epochs_run", 0),
        stop_reason=d.get("stop_reason"),
        wall_time_s=d.get("wall_time_s", 0.0),
        error=d.get("error"),
        schema_version=d.get("schema_version", RECORD_SCHEMA_VERSION),
    )


def write_records(path: str | Path, records: list[RunRecord], append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


def read_records(path: str | Path) -> list[RunRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_from_dict(json.loads(line)))
    return out


def validation_halves(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Split the validation rows into a fixed early-stopping half and a
    selection half (first/second half in row order). Tiny validation
    sets fall back to using all rows for both."""
    idx = np.flatnonzero(ds.mask(VALID))
    half = idx.size // 2
    if half == 0:
        return idx, idx
    return idx[:half], idx[half:]


def _fit_transform(ds: Dataset, sample: HyperSample) -> TargetTransform:
    if ds.task == REGRESSION and sample.gaussian_target:
        return fit_gaussian_target(ds.y[ds.mask(TRAIN)])
    return identity_transform()


def _build_inputs_and_model(ds: Dataset, sample: HyperSample, dtype=torch.float32):
    """Assemble per-arm input tensors and the trial model."""
    model_cfg = sample.mlp if sample.model_family == "mlp" else sample.resnet
    arm = sample.preprocessing
    d = ds.n_cols
    torch.manual_seed(sample.seed)  # weight initialization

    if arm in (ARM_NONE, ARM_CFD):
        if arm == ARM_CFD:
            report = run_icf(ds, sample.icf)
            icf_set = set(report.icf_indices)
        else:
            icf_set = set(ds.categorical_indices)
        enc = CfdEncoder().fit(ds, icf_set)
        tensor = enc.transform(ds.X)
        x_all = torch.from_numpy(tensor.data).to(dtype)
        backbone = build_backbone(sample.model_family, model_cfg, d, tensor.M)
        model = TabularModel(sample.model_family, backbone, "static")
        return x_all, model

    if arm == ARM_LFF:
        enc = CfdEncoder().fit(ds, set())  # standardize every column
        x_all = torch.from_numpy(enc.transform(ds.X).data[:, :, 0]).to(dtype)
        lff = LearnedFourierFeatures(sample.lff, d=d, seed=sample.seed, dtype=dtype)
        backbone = build_backbone(sample.model_family, model_cfg, d, lff.out_channels)
        model = TabularModel(sample.model_family, backbone, "lff", lff=lff)
        return x_all, model

    if arm == ARM_COMBINED:
        report = run_icf(ds, sample.icf)
        cat = sorted(set(report.icf_indices))
        num = [j for j in range(d) if j not in cat]
        enc = CfdEncoder().fit(ds, set(cat))
        tensor = enc.transform(ds.X)
        if not cat:
            lff = LearnedFourierFeatures(sample.lff, d=d, seed=sample.seed, dtype=dtype)
            x_all = torch.from_numpy(tensor.data[:, :, 0]).to(dtype)
            backbone = build_backbone(sample.model_family, model_cfg, d, lff.out_channels)
            return x_all, TabularModel(sample.model_family, backbone, "lff", lff=lff)
        if not num:
            x_all = torch.from_numpy(tensor.data).to(dtype)
            backbone = build_backbone(sample.model_family, model_cfg, d, tensor.M)
            return x_all, TabularModel(sample.model_family, backbone, "static")
        m_cat = tensor.M
        num_part = tensor.data[:, num, 0]
        cat_part = tensor.data[:, cat, :].reshape(ds.n_rows, len(cat) * m_cat)
        x_all = torch.from_numpy(np.concatenate([num_part, cat_part], axis=1)).to(dtype)
        lff = LearnedFourierFeatures(sample.lff, d=len(num), seed=sample.seed, dtype=dtype)
        depth = max(lff.out_channels, m_cat)
        backbone = build_backbone(sample.model_family, model_cfg, d, depth)
        model = TabularModel(
            sample.model_family, backbone, "combined",
            lff=lff, d_num=len(num), d_cat=len(cat), m_cat=m_cat,
        )
        return x_all, model

    raise ConfigurationError(f"unknown preprocessing arm {arm!r}")


def run_trial(
    ds: Dataset,
    sample: HyperSample,
    model_kind: str = "",
    run_index: int = 0,
    snapshot_path: str | Path | None = None,
) -> RunRecord:
    """Execute one trial end to end and return its record.

    Build or data errors mark the trial failed (kept in the stream,
    excluded from selection); a non-finite training loss marks it
    diverged and records worst-possible scores. When snapshot_path is
    given, a completed trial writes its best-epoch model snapshot there.
    """
    t0 = time.perf_counter()
    torch.set_flush_denormal(True)  # heavy weight decay drives weights subnormal
    arm = sample.preprocessing
    try:
        transform = _fit_transform(ds, sample)
        x_all, model = _build_inputs_and_model(ds, sample)
    except IcfTabError as exc:
        return RunRecord(
            dataset_id=ds.dataset_id, model=model_kind, run_index=run_index,
            sample=sample, status="failed", arm=arm,
            val_criterion=None, test_metric=None, epochs_run=0, stop_reason=None,
            wall_time_s=time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}",
        )

    train_idx = np.flatnonzero(ds.mask(TRAIN))
    es_idx, sel_idx = validation_halves(ds)
    test_idx = np.flatnonzero(ds.mask(TEST))
    y_train_t = torch.from_numpy(transform.transform(ds.y[train_idx])).to(x_all.dtype)

    state: TrainState = train(
        model,
        ds.task,
        x_all[train_idx],
        y_train_t,
        x_all[es_idx],
        ds.y[es_idx],
        sample.optimizer,
        seed=sample.seed,
        target_transform=transform,
    )

    if state.stop_reason == "divergence":
        # worst-possible criterion (0 accuracy / unbounded MAE) and the
        # normalization lower bound as the test sentinel
        val = 0.0 if ds.task == CLASSIFICATION else None
        return RunRecord(
            dataset_id=ds.dataset_id, model=model_kind, run_index=run_index,
            sample=sample, status="diverged", arm=arm,
            val_criterion=val, test_metric=0.0,
            epochs_run=state.epochs_run, stop_reason=state.stop_reason,
            wall_time_s=time.perf_counter() - t0,
        )

    if snapshot_path is not None:
        from .training import save_snapshot

        save_snapshot(snapshot_path, model.state_dict())

    sel_pred = predict(model, x_all[sel_idx])
    test_pred = predict(model, x_all[test_idx])
    if ds.task == CLASSIFICATION:
        val = metric_accuracy((sel_pred > 0).to(torch.float64).numpy(), ds.y[sel_idx])
        test = metric_accuracy((test_pred > 0).to(torch.float64).numpy(), ds.y[test_idx])
    else:
        val = metric_mae(transform.inverse(sel_pred.to(torch.float64).numpy()), ds.y[sel_idx])
        test = metric_r2(transform.inverse(test_pred.to(torch.float64).numpy()), ds.y[test_idx])

    return RunRecord(
        dataset_id=ds.dataset_id, model=model_kind, run_index=run_index,
        sample=sample, status="completed", arm=arm,
        val_criterion=val, test_metric=test,
        epochs_run=state.epochs_run, stop_reason=state.stop_reason,
        wall_time_s=time.perf_counter() - t0,
    )


def _worker_trial(args):
    ds, sample, model_kind, run_index, threads = args
    torch.set_num_threads(threads)
    return run_trial(ds, sample, model_kind, run_index)


def run_trials(
    ds: Dataset,
    samples: list[HyperSample],
    model_kind: str = "",
    workers: int = 1,
) -> list[RunRecord]:
    """Execute explicit samples, returning records in sample order.

    Trials are independent; with workers > 1 they execute in separate
    spawned processes (one torch thread each). Per-trial seeding makes
    the results identical to a serial run.
    """
    if workers > 1:
        import multiprocessing as mp
        from concurrent.futures.process import BrokenProcessPool

        jobs = [(ds, s, model_kind, i, 1) for i, s in enumerate(samples)]
        ctx = mp.get_context("spawn")
        try:
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                return list(pool.map(_worker_trial, jobs))
        except BrokenProcessPool:
            # spawn re-imports __main__; interactive callers without an
            # importable main module fall back to serial execution
            logging.getLogger(__name__).warning(
                "worker pool unavailable (unimportable __main__?); running trials serially"
            )
    return [run_trial(ds, s, model_kind, i) for i, s in enumerate(samples)]


def run_search(
    ds: Dataset,
    model_kind: str,
    runs: int,
    seed: int,
    out_path: str | Path | None = None,
    combined_mode: bool = False,
    workers: int = 1,
) -> list[RunRecord]:
    """Sample and execute a full random search, in run-index order."""
    if runs < 1:
        raise ConfigurationError("need at least one run")
    rng = np.random.default_rng(seed)
    samples = [sample_hyperparams(rng, model_kind, ds.task, combined_mode) for _ in range(runs)]
    records = run_trials(ds, samples, model_kind, workers)
    if out_path is not None:
        write_records(out_path, records)
    return records


def _selection_key(task: str):
    def key(rec: RunRecord):
        v = rec.val_criterion
        if task == CLASSIFICATION:
            return -(v if v is not None else -np.inf)
        return v if v is not None else np.inf

    return key


def select_best(records: list[RunRecord], task: str) -> RunRecord:
    """Best completed/diverged record by validation criterion only
    (max accuracy or min MAE); ties break to the earliest run index."""
    eligible = sorted(
        (r for r in records if r.status != "failed"), key=lambda r: r.run_index
    )
    if not eligible:
        raise DataError("no completed records to select from")
    key = _selection_key(task)
    best = eligible[0]
    for rec in eligible[1:]:
        if key(rec) < key(best):
            best = rec
    return best
