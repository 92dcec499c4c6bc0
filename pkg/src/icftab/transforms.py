"""Feature standardization and the rank-based Gaussian target transform."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .special import norm_cdf, norm_ppf

__all__ = ["Standardizer", "TargetTransform", "fit_standardizer", "fit_gaussian_target", "identity_transform"]

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Standardizer:
    """Per-column (mean, std) transform fitted on training rows.

    Population std; columns with std below 1e-12 map to all-zeros so
    degenerate samples cannot blow up a search run.
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        safe = np.where(self.std < _STD_FLOOR, 1.0, self.std)
        out = (X - self.mean) / safe
        out[..., self.std < _STD_FLOOR] = 0.0
        return out


def fit_standardizer(train_cols: np.ndarray) -> Standardizer:
    """Fit on training rows only; train_cols is (n_train, d)."""
    train_cols = np.asarray(train_cols, dtype=np.float64)
    if train_cols.ndim == 1:
        train_cols = train_cols[:, None]
    return Standardizer(mean=train_cols.mean(axis=0), std=train_cols.std(axis=0))


@dataclass(frozen=True)
class TargetTransform:
    """Monotone map of regression targets to normal scores.

    kind "gaussian" holds the fitted quantile table: distinct sorted
    training values, their mid-rank probabilities, and the matching
    z-scores. kind "identity" passes values through (also the fallback
    when all training targets are equal).
    """

    kind: str  # "identity" | "gaussian"
    values: np.ndarray = field(default_factory=lambda: np.empty(0))
    ranks: np.ndarray = field(default_factory=lambda: np.empty(0))
    zscores: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_train: int = 0

    def transform(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "identity":
            return y.copy()
        lo = 0.5 / self.n_train
        r = np.interp(y, self.values, self.ranks, left=lo, right=1.0 - lo)
        return np.array([norm_ppf(float(p)) for p in r])

    def inverse(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "identity":
            return z.copy()
        r = np.array([norm_cdf(float(v)) for v in z])
        return np.interp(r, self.ranks, self.values)


def identity_transform() -> TargetTransform:
    return TargetTransform(kind="identity")


def fit_gaussian_target(y_train: np.ndarray) -> TargetTransform:
    """Rank-based inverse-normal transform of the training targets.

    Each training value maps to Phi^-1((rank - 0.5) / N) using mid-ranks
    for ties; unseen values interpolate ranks linearly and clamp to
    [0.5/N, 1 - 0.5/N]. All-equal targets disable the transform and the
    identity is used instead.
    """
    y_train = np.asarray(y_train, dtype=np.float64)
    n = y_train.size
    if n < 2:
        raise DataError("need at least 2 training targets to fit the transform")
    values, counts = np.unique(y_train, return_counts=True)
    if values.size == 1:
        return identity_transform()
    # mid-rank of each tied block, as a probability
    ends = np.cumsum(counts)
    starts = ends - counts
    mid = (starts + 1 + ends) / 2.0
    ranks = (mid - 0.5) / n
    zscores = np.array([norm_ppf(float(p)) for p in ranks])
    return TargetTransform(kind="gaussian", values=values, ranks=ranks, zscores=zscores, n_train=n)
