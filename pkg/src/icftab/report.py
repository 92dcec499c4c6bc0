"""Evaluation machinery over search records.

Scores are normalized per dataset between a random-baseline lower bound
(0.5 accuracy for binary classification, r2 of 0 for regression) and the
best test score any supplied model reached on that dataset. Datasets
where no model clears the lower bound, or where the best normalized
score stays at or below 0.1, are excluded from aggregation. On top of
the normalized scores: budget curves from simulated search orders,
performance profiles over the top-k runs, and per-dataset heatmap
matrices of the top-k scores.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import CLASSIFICATION, REGRESSION
from .errors import ConfigurationError, DataError
from .search import RunRecord

__all__ = [
    "NormalizedScore",
    "normalize",
    "exclude_degenerate",
    "budget_curve",
    "performance_profile",
    "export_heatmap",
    "Report",
    "build_report",
    "write_report",
]

EXCLUSION_THRESHOLD = 0.1


@dataclass(frozen=True)
class NormalizedScore:
    raw: float
    low: float
    high: float

    @property
    def value(self) -> float:
        return min(1.0, max(0.0, (self.raw - self.low) / (self.high - self.low)))


def _lower_bound(task: str) -> float:
    if task == CLASSIFICATION:
        return 0.5
    if task == REGRESSION:
        return 0.0
    raise ConfigurationError(f"unknown task {task!r}")


def normalize(
    records: list[RunRecord], task: str
) -> tuple[list[NormalizedScore | None], set[str]]:
    """Score each record against its dataset's pooled best.

    Returns one entry per record (None for failed records and for
    records on degenerate datasets) plus the set of datasets where no
    model beat the random baseline.
    """
    if not records:
        raise DataError("no records to normalize")
    low = _lower_bound(task)
    high_by_ds: dict[str, float] = {}
    for rec in records:
        if rec.status == "failed" or rec.test_metric is None:
            continue
        cur = high_by_ds.get(rec.dataset_id)
        high_by_ds[rec.dataset_id] = rec.test_metric if cur is None else max(cur, rec.test_metric)
    degenerate = {
        ds for ds in sorted({r.dataset_id for r in records})
        if high_by_ds.get(ds) is None or high_by_ds[ds] <= low
    }
    scores: list[NormalizedScore | None] = []
    for rec in records:
        if rec.status == "failed" or rec.test_metric is None or rec.dataset_id in degenerate:
            scores.append(None)
        else:
            scores.append(NormalizedScore(raw=rec.test_metric, low=low, high=high_by_ds[rec.dataset_id]))
    return scores, degenerate


def exclude_degenerate(best_normalized: dict[str, float]) -> set[str]:
    """Retain datasets whose best normalized score exceeds the 0.1 floor."""
    return {ds for ds, best in best_normalized.items() if best > EXCLUSION_THRESHOLD}


def _val_key(task: str):
    worst = -math.inf if task == CLASSIFICATION else math.inf

    def key(rec: RunRecord) -> float:
        v = rec.val_criterion if rec.val_criterion is not None else worst
        return -v if task == CLASSIFICATION else v

    return key


def _grouped(records: list[RunRecord], scores) -> dict[str, dict[str, list[tuple[RunRecord, float | None]]]]:
    """model -> dataset -> [(record, normalized value)] in run order."""
    out: dict[str, dict[str, list]] = {}
    for rec, ns in zip(records, scores):
        value = ns.value if ns is not None else None
        out.setdefault(rec.model, {}).setdefault(rec.dataset_id, []).append((rec, value))
    for per_ds in out.values():
        for pairs in per_ds.values():
            pairs.sort(key=lambda p: p[0].run_index)
    return out


def budget_curve(
    records: list[RunRecord],
    task: str,
    n_sims: int = 15,
    seed: int = 0,
    retained: set[str] | None = None,
) -> dict[str, list[float]]:
    """Mean normalized test score of the validation-selected run as a
    function of search budget, averaged over simulated search orders
    first and datasets second. Failed runs consume budget and score 0
    until a usable run appears."""
    scores, _ = normalize(records, task)
    groups = _grouped(records, scores)
    key = _val_key(task)
    rng = np.random.default_rng(seed)
    curves: dict[str, list[float]] = {}
    for model in sorted(groups):
        per_ds = groups[model]
        datasets = sorted(per_ds) if retained is None else sorted(set(per_ds) & retained)
        if not datasets:
            continue
        b_max = max(len(per_ds[ds]) for ds in datasets)
        per_dataset_curves = []
        for ds in datasets:
            pairs = per_ds[ds]
            n = len(pairs)
            sims = np.zeros((n_sims, b_max))
            for s in range(n_sims):
                order = rng.permutation(n)
                best_idx = -1
                best_val = None
                for b in range(b_max):
                    if b < n:
                        i = order[b]
                        rec, _ = pairs[i]
                        if rec.status != "failed":
                            v = key(rec)
                            if best_val is None or v < best_val:
                                best_val = v
                                best_idx = i
                    value = pairs[best_idx][1] if best_idx >= 0 else None
                    sims[s, b] = value if value is not None else 0.0
            per_dataset_curves.append(sims.mean(axis=0))
        curves[model] = np.mean(per_dataset_curves, axis=0).tolist()
    return curves


def _top_k(pairs, task: str, k: int):
    usable = [(rec, v) for rec, v in pairs if rec.status != "failed" and v is not None]
    usable.sort(key=lambda p: (_val_key(task)(p[0]), p[0].run_index))
    return usable[:k]


def performance_profile(
    records: list[RunRecord],
    task: str,
    k_top: int = 8,
    taus: np.ndarray | None = None,
    retained: set[str] | None = None,
) -> tuple[np.ndarray, dict[str, list[float]], dict[str, list[str]]]:
    """Fraction of (dataset, top-run) pairs scoring above each tau.

    The top k runs per (model, dataset) are ranked by validation
    criterion and treated as independent draws. Models with fewer than
    k usable runs on a dataset use what they have and are flagged.
    """
    if taus is None:
        taus = np.linspace(0.0, 1.0, 101)
    scores, _ = normalize(records, task)
    groups = _grouped(records, scores)
    fractions: dict[str, list[float]] = {}
    flags: dict[str, list[str]] = {}
    for model in sorted(groups):
        per_ds = groups[model]
        datasets = sorted(per_ds) if retained is None else sorted(set(per_ds) & retained)
        values = []
        short = []
        for ds in datasets:
            top = _top_k(per_ds[ds], task, k_top)
            if len(top) < k_top:
                short.append(ds)
            values.extend(v for _, v in top)
        if not values:
            continue
        arr = np.asarray(values)
        fractions[model] = [float((arr > t).mean()) for t in taus]
        if short:
            flags[model] = short
    return taus, fractions, flags


def export_heatmap(
    records: list[RunRecord],
    task: str,
    k_top: int = 8,
    retained: set[str] | None = None,
) -> tuple[list[str], list[str], np.ndarray]:
    """Matrix of rank-ordered top-k normalized scores.

    Rows are datasets; each model contributes k columns ordered by
    validation criterion (best first). Missing entries are NaN.
    """
    scores, _ = normalize(records, task)
    groups = _grouped(records, scores)
    models = sorted(groups)
    datasets = sorted({ds for per_ds in groups.values() for ds in per_ds})
    if retained is not None:
        datasets = [ds for ds in datasets if ds in retained]
    matrix = np.full((len(datasets), len(models) * k_top), np.nan)
    for mi, model in enumerate(models):
        for di, ds in enumerate(datasets):
            pairs = groups[model].get(ds, [])
            top = _top_k(pairs, task, k_top)
            for r, (_, v) in enumerate(top):
                matrix[di, mi * k_top + r] = v
    return datasets, models, matrix


@dataclass
class Report:
    task: str
    models: list[str]
    datasets_retained: list[str]
    datasets_excluded: list[str]
    budget: dict[str, list[float]]
    taus: np.ndarray
    profile: dict[str, list[float]]
    profile_flags: dict[str, list[str]]
    heatmap_datasets: list[str]
    heatmap_models: list[str]
    heatmap: np.ndarray
    selection: dict = field(default_factory=dict)
    n_sims: int = 15
    k_top: int = 8
    seed: int = 0


def build_report(
    records: list[RunRecord],
    task: str,
    n_sims: int = 15,
    k_top: int = 8,
    seed: int = 0,
) -> Report:
    """Aggregate records from one or more searches into every artifact."""
    scores, degenerate = normalize(records, task)
    best_by_ds: dict[str, float] = {}
    for rec, ns in zip(records, scores):
        if ns is not None:
            best_by_ds[rec.dataset_id] = max(best_by_ds.get(rec.dataset_id, 0.0), ns.value)
    for ds in degenerate:
        best_by_ds.setdefault(ds, 0.0)
    retained = exclude_degenerate(best_by_ds)
    all_datasets = sorted({r.dataset_id for r in records})
    excluded = sorted(set(all_datasets) - retained)

    groups = _grouped(records, scores)
    key = _val_key(task)
    selection: dict[str, dict] = {}
    for model in sorted(groups):
        selection[model] = {}
        for ds in sorted(groups[model]):
            pairs = [(r, v) for r, v in groups[model][ds] if r.status != "failed"]
            if not pairs:
                continue
            best = min(pairs, key=lambda p: (key(p[0]), p[0].run_index))
            selection[model][ds] = {
                "run_index": best[0].run_index,
                "val_criterion": best[0].val_criterion,
                "test_metric": best[0].test_metric,
                "normalized": best[1],
            }

    budget = budget_curve(records, task, n_sims=n_sims, seed=seed, retained=retained)
    taus, profile, flags = performance_profile(records, task, k_top=k_top, retained=retained)
    hm_ds, hm_models, matrix = export_heatmap(records, task, k_top=k_top, retained=retained)
    return Report(
        task=task,
        models=sorted(groups),
        datasets_retained=sorted(retained),
        datasets_excluded=excluded,
        budget=budget,
        taus=taus,
        profile=profile,
        profile_flags=flags,
        heatmap_datasets=hm_ds,
        heatmap_models=hm_models,
        heatmap=matrix,
        selection=selection,
        n_sims=n_sims,
        k_top=k_top,
        seed=seed,
    )


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def write_report(report: Report, out_dir: str | Path) -> list[Path]:
    """Emit budget.csv, profile.csv, one heatmap CSV per dataset, and
    summary.json into out_dir; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / "budget.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        models = sorted(report.budget)
        writer.writerow(["budget"] + models)
        b_max = max((len(v) for v in report.budget.values()), default=0)
        for b in range(b_max):
            row = [b + 1]
            for m in models:
                series = report.budget[m]
                row.append(f"{series[min(b, len(series) - 1)]:.6f}")
            writer.writerow(row)
    written.append(path)

    path = out_dir / "profile.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        models = sorted(report.profile)
        writer.writerow(["tau"] + models)
        for i, t in enumerate(report.taus):
            writer.writerow([f"{t:.4f}"] + [f"{report.profile[m][i]:.6f}" for m in models])
    written.append(path)

    for di, ds in enumerate(report.heatmap_datasets):
        path = out_dir / f"heatmap_{_safe_name(ds)}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model"] + [f"rank{r + 1}" for r in range(report.k_top)])
            for mi, model in enumerate(report.heatmap_models):
                cells = report.heatmap[di, mi * report.k_top : (mi + 1) * report.k_top]
                writer.writerow([model] + ["" if math.isnan(c) else f"{c:.6f}" for c in cells])
        written.append(path)

    path = out_dir / "summary.json"
    payload = {
        "task": report.task,
        "models": report.models,
        "datasets_retained": report.datasets_retained,
        "datasets_excluded": report.datasets_excluded,
        "selection": report.selection,
        "profile_flags": report.profile_flags,
        "n_sims": report.n_sims,
        "k_top": report.k_top,
        "seed": report.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    written.append(path)
    return written


def render_plots(report: Report, out_dir: str | Path) -> list[Path]:
    """Optional static figures (budget curves, profiles, heatmap)."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover
        raise ConfigurationError("plot rendering needs matplotlib installed") from exc
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    for model, series in sorted(report.budget.items()):
        ax.plot(range(1, len(series) + 1), series, label=model)
    ax.set_xlabel("budget (runs)")
    ax.set_ylabel("mean normalized test score")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "budget.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for model, series in sorted(report.profile.items()):
        ax.plot(report.taus, series, label=model)
    ax.set_xlabel("tau")
    ax.set_ylabel("fraction of (dataset, run) pairs > tau")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "profile.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if report.heatmap.size:
        fig, ax = plt.subplots(figsize=(8, max(2, 0.4 * len(report.heatmap_datasets) + 1)))
        im = ax.imshow(report.heatmap, aspect="auto", vmin=0.0, vmax=1.0, cmap="viridis")
        ax.set_yticks(range(len(report.heatmap_datasets)), report.heatmap_datasets)
        ax.set_xticks(
            [mi * report.k_top + report.k_top / 2 - 0.5 for mi in range(len(report.heatmap_models))],
            report.heatmap_models,
        )
        fig.colorbar(im, ax=ax, label="normalized score")
        fig.tight_layout()
        path = out_dir / "heatmap.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
