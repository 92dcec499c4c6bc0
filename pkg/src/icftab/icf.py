"""Implicitly-categorical feature detection.

A numerically-stored column is flagged when its association with the
target survives categorization (all numeric ordering removed). Three
detectors are available: chi-square independence against a binary
classification target, one-way ANOVA of target groups per distinct
feature value, and the ratio of average mutual information under
categorical vs binned encodings of the column. Cardinality gates bound
which columns are tested at all, and every decision uses training rows
only.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import CLASSIFICATION, REGRESSION, TRAIN, Dataset
from .errors import ConfigurationError
from .stats import anova_oneway, avg_mutual_info, categorize, chi2_independence, quantile_bin

__all__ = [
    "GATE_SKIP",
    "GATE_AUTO",
    "GATE_TEST",
    "IcfConfig",
    "ColumnDecision",
    "IcfReport",
    "cardinality_gate",
    "detect_classification",
    "detect_regression_anova",
    "detect_regression_mi",
    "run_icf",
]

GATE_SKIP = "skipped_high_card"
GATE_AUTO = "auto_categorical"
GATE_TEST = "tested"

CHI2 = "chi2"
ANOVA = "anova"
MUTUAL_INFO = "mutual_info"

_RATIO_FLOOR = 1e-12


@dataclass(frozen=True)
class IcfConfig:
    """Detector choice, thresholds, and cardinality gates.

    Threshold ranges match the sampled search space; values outside are
    rejected so persisted configurations stay replayable.
    """

    test: str = CHI2
    chi_thresh: float = 1e-3
    anova_thresh: float = 1e-3
    mi_thresh: float = 1.25
    min_cardinality: int = 10
    max_cardinality: int = 5000
    auto_low_card: bool = False
    mi_bins: int = 16

    def __post_init__(self) -> None:
        if self.test not in (CHI2, ANOVA, MUTUAL_INFO):
            raise ConfigurationError(f"unknown test {self.test!r}")
        if not 1e-50 <= self.chi_thresh <= 1e-3:
            raise ConfigurationError(f"chi_thresh out of range: {self.chi_thresh}")
        if not 1e-30 <= self.anova_thresh <= 1e-3:
            raise ConfigurationError(f"anova_thresh out of range: {self.anova_thresh}")
        if not 0.75 <= self.mi_thresh <= 1.50:
            raise ConfigurationError(f"mi_thresh out of range: {self.mi_thresh}")
        if self.min_cardinality < 0 or self.max_cardinality < 1:
            raise ConfigurationError("cardinality gates must be nonnegative")
        if self.mi_bins < 2:
            raise ConfigurationError("mi_bins must be >= 2")


@dataclass(frozen=True)
class ColumnDecision:
    index: int
    name: str
    gate: str
    flagged: bool
    statistic: float | None = None
    p_value: float | None = None
    mi_ratio: float | None = None


@dataclass
class IcfReport:
    """Per-column outcomes plus the final implicitly-categorical index set.

    icf_indices is the union of flagged columns and the dataset's
    explicit categorical annotations.
    """

    test: str
    columns: list[ColumnDecision]
    icf_indices: list[int]
    config: IcfConfig = field(repr=False, default=IcfConfig())

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        payload = {
            "test": self.test,
            "icf_indices": self.icf_indices,
            "columns": [{k: clean(v) for k, v in asdict(c).items()} for c in self.columns],
            "config": asdict(self.config),
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "IcfReport":
        payload = json.loads(text)
        return cls(
            test=payload["test"],
            columns=[ColumnDecision(**c) for c in payload["columns"]],
            icf_indices=list(payload["icf_indices"]),
            config=IcfConfig(**payload["config"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "IcfReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def cardinality_gate(col_cardinality: int, cfg: IcfConfig) -> str:
    """Skip above the upper gate, auto-flag at or below the lower gate
    (when enabled), test everything in between."""
    if col_cardinality < 1:
        raise ConfigurationError("cardinality must be >= 1")
    if col_cardinality > cfg.max_cardinality:
        return GATE_SKIP
    if cfg.auto_low_card and col_cardinality <= cfg.min_cardinality:
        return GATE_AUTO
    return GATE_TEST


def _train_matrix(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    mask = ds.mask(TRAIN)
    return ds.X[mask], ds.y[mask]


def _numeric_columns(ds: Dataset) -> list[int]:
    return [c.index for c in ds.columns if c.declared_kind == "numerical"]


def detect_classification(ds: Dataset, cfg: IcfConfig) -> IcfReport:
    """Chi-square detector: categorize the column, test independence
    against the binary target, flag when p < chi_thresh."""
    if ds.task != CLASSIFICATION:
        raise ConfigurationError("chi-square detection needs a classification task")
    if cfg.test != CHI2:
        raise ConfigurationError(f"config selects {cfg.test!r}, not chi2")
    Xtr, ytr = _train_matrix(ds)
    y_codes = ytr.astype(np.int64)
    decisions = []
    for j in _numeric_columns(ds):
        card = ds.columns[j].cardinality
        gate = cardinality_gate(card, cfg)
        name = ds.columns[j].name
        if gate == GATE_SKIP:
            decisions.append(ColumnDecision(j, name, gate, flagged=False))
            continue
        if gate == GATE_AUTO:
            decisions.append(ColumnDecision(j, name, gate, flagged=True))
            continue
        codes, _ = categorize(Xtr[:, j])
        res = chi2_independence(codes, y_codes)
        decisions.append(
            ColumnDecision(
                j, name, gate, flagged=res.p_value < cfg.chi_thresh,
                statistic=res.statistic, p_value=res.p_value,
            )
        )
    return _assemble(ds, cfg, decisions)


def detect_regression_anova(ds: Dataset, cfg: IcfConfig) -> IcfReport:
    """ANOVA detector: group target values by distinct feature value and
    flag when the F-test p-value falls below anova_thresh.

    Singleton groups are retained; they add no within-group variance but
    consume a degree of freedom. Columns with fewer than two groups, or
    with every group a singleton, cannot be tested and are not flagged.
    """
    if ds.task != REGRESSION:
        raise ConfigurationError("ANOVA detection needs a regression task")
    if cfg.test != ANOVA:
        raise ConfigurationError(f"config selects {cfg.test!r}, not anova")
    Xtr, ytr = _train_matrix(ds)
    decisions = []
    for j in _numeric_columns(ds):
        card = ds.columns[j].cardinality
        gate = cardinality_gate(card, cfg)
        name = ds.columns[j].name
        if gate == GATE_SKIP:
            decisions.append(ColumnDecision(j, name, gate, flagged=False))
            continue
        if gate == GATE_AUTO:
            decisions.append(ColumnDecision(j, name, gate, flagged=True))
            continue
        codes, _ = categorize(Xtr[:, j])
        k = int(codes.max()) + 1
        if k < 2 or len(codes) <= k:
            decisions.append(ColumnDecision(j, name, gate, flagged=False, statistic=0.0, p_value=1.0))
            continue
        groups = [ytr[codes == c] for c in range(k)]
        res = anova_oneway(groups)
        decisions.append(
            ColumnDecision(
                j, name, gate, flagged=res.p_value < cfg.anova_thresh,
                statistic=res.statistic, p_value=res.p_value,
            )
        )
    return _assemble(ds, cfg, decisions)


def detect_regression_mi(ds: Dataset, cfg: IcfConfig) -> IcfReport:
    """Mutual-information ratio detector.

    Numerator: average MI between the categorized column and each
    context vector (every other column discretized, plus the binned
    target). Denominator: the same with the column quantile-binned.
    A ratio above mi_thresh means categorization preserves association
    that binning destroys. A vanishing denominator counts as infinite
    ratio only when the numerator is itself non-vanishing.
    """
    if ds.task != REGRESSION:
        raise ConfigurationError("mutual-information detection needs a regression task")
    if cfg.test != MUTUAL_INFO:
        raise ConfigurationError(f"config selects {cfg.test!r}, not mutual_info")
    Xtr, ytr = _train_matrix(ds)
    q = cfg.mi_bins

    def discretize(idx: int) -> np.ndarray:
        if ds.columns[idx].declared_kind == "categorical":
            return categorize(Xtr[:, idx])[0]
        return quantile_bin(Xtr[:, idx], q)

    y_binned = quantile_bin(ytr, q)
    decisions = []
    for j in _numeric_columns(ds):
        card = ds.columns[j].cardinality
        gate = cardinality_gate(card, cfg)
        name = ds.columns[j].name
        if gate == GATE_SKIP:
            decisions.append(ColumnDecision(j, name, gate, flagged=False))
            continue
        if gate == GATE_AUTO:
            decisions.append(ColumnDecision(j, name, gate, flagged=True))
            continue
        context = [discretize(o) for o in range(ds.n_cols) if o != j]
        context.append(y_binned)
        numer = avg_mutual_info(categorize(Xtr[:, j])[0], context)
        denom = avg_mutual_info(quantile_bin(Xtr[:, j], q), context)
        if denom < _RATIO_FLOOR:
            flagged = numer > _RATIO_FLOOR
            ratio = math.inf if flagged else 0.0
        else:
            ratio = numer / denom
            flagged = ratio > cfg.mi_thresh
        decisions.append(ColumnDecision(j, name, gate, flagged=flagged, mi_ratio=ratio))
    return _assemble(ds, cfg, decisions)


def _assemble(ds: Dataset, cfg: IcfConfig, decisions: list[ColumnDecision]) -> IcfReport:
    explicit = ds.categorical_indices
    for j in explicit:
        decisions.append(ColumnDecision(j, ds.columns[j].name, GATE_AUTO, flagged=True))
    decisions.sort(key=lambda d: d.index)
    flagged = {d.index for d in decisions if d.flagged}
    return IcfReport(
        test=cfg.test,
        columns=decisions,
        icf_indices=sorted(flagged | set(explicit)),
        config=cfg,
    )


def run_icf(ds: Dataset, cfg: IcfConfig) -> IcfReport:
    """Dispatch to the detector matching the configured test.

    The test must suit the task: chi2 for classification, anova or
    mutual_info for regression. Explicit categorical annotations are
    always merged into the final index set.
    """
    if ds.task == CLASSIFICATION:
        if cfg.test != CHI2:
            raise ConfigurationError(
                f"test {cfg.test!r} is not valid for classification; use {CHI2!r}"
            )
        return detect_classification(ds, cfg)
    if cfg.test == ANOVA:
        return detect_regression_anova(ds, cfg)
    if cfg.test == MUTUAL_INFO:
        return detect_regression_mi(ds, cfg)
    raise ConfigurationError(f"test {cfg.test!r} is not valid for regression")
