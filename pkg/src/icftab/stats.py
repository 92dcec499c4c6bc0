"""Statistical primitives for implicitly-categorical feature detection.

Chi-square test of independence, one-way ANOVA, and a plug-in discrete
mutual information estimator, together with the categorization and
equal-frequency binning they operate on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import chi2_sf, f_sf

__all__ = [
    "TestResult",
    "categorize",
    "quantile_bin",
    "chi2_independence",
    "anova_oneway",
    "mutual_info_discrete",
    "avg_mutual_info",
]


@dataclass(frozen=True)
class TestResult:
    """Outcome of one hypothesis test."""

    statistic: float
    p_value: float
    dof: int | tuple[int, int] | None = None


def categorize(column: np.ndarray) -> tuple[np.ndarray, dict[float, int]]:
    """Map each distinct value to a dense code by sorted order.

    Returns the code vector and the value -> code table. Categorization
    deliberately forgets the numeric spacing between values; only
    identity survives.
    """
    column = np.asarray(column, dtype=np.float64)
    values, codes = np.unique(column, return_inverse=True)
    table = {float(v): int(i) for i, v in enumerate(values)}
    return codes.astype(np.int64), table


def quantile_bin(column: np.ndarray, q: int) -> np.ndarray:
    """Equal-frequency binning into at most ``q`` bins.

    Bin edges are the 1/q ... (q-1)/q quantiles of the column itself;
    values equal to an edge go to the lower bin. Columns with fewer
    distinct values than bins end up with one bin per distinct value.
    """
    if q < 2:
        raise ValueError(f"bin count must be >= 2, got {q}")
    column = np.asarray(column, dtype=np.float64)
    edges = np.quantile(column, np.arange(1, q) / q)
    return np.searchsorted(edges, column, side="left").astype(np.int64)


def _contingency(x_codes: np.ndarray, y_codes: np.ndarray) -> np.ndarray:
    _, xi = np.unique(x_codes, return_inverse=True)
    _, yi = np.unique(y_codes, return_inverse=True)
    r = int(xi.max()) + 1
    c = int(yi.max()) + 1
    return np.bincount(xi * c + yi, minlength=r * c).reshape(r, c)


def chi2_independence(x_codes: np.ndarray, y_codes: np.ndarray) -> TestResult:
    """Pearson chi-square test of independence on two code vectors.

    A variable with a single observed category makes the test vacuous;
    that case returns the degenerate (statistic 0, p 1) result so a
    caller can simply decline to flag the column.
    """
    x_codes = np.asarray(x_codes)
    y_codes = np.asarray(y_codes)
    if x_codes.shape != y_codes.shape:
        raise ValueError("x and y must have equal length")
    if x_codes.size == 0:
        raise ValueError("empty input")
    counts = _contingency(x_codes, y_codes)
    r, c = counts.shape
    if r < 2 or c < 2:
        return TestResult(statistic=0.0, p_value=1.0, dof=0)
    n = counts.sum()
    expected = np.outer(counts.sum(axis=1), counts.sum(axis=0)) / n
    mask = expected > 0
    statistic = float((((counts - expected) ** 2)[mask] / expected[mask]).sum())
    dof = (r - 1) * (c - 1)
    return TestResult(statistic=statistic, p_value=chi2_sf(statistic, dof), dof=dof)


def anova_oneway(groups: list[np.ndarray]) -> TestResult:
    """One-way ANOVA F test across groups of real values.

    Perfect separation (zero within-group variance, unequal means) is
    reported as p = 0 with an infinite statistic; zero variance with
    equal means degenerates to (0, 1).
    """
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    k = len(groups)
    if k < 2:
        raise ValueError("need at least 2 groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("groups must be nonempty")
    n = sum(g.size for g in groups)
    if n <= k:
        raise ValueError("total observations must exceed the group count")
    grand = sum(float(g.sum()) for g in groups) / n
    ss_between = sum(g.size * (float(g.mean()) - grand) ** 2 for g in groups)
    ss_within = sum(float(((g - g.mean()) ** 2).sum()) for g in groups)
    if ss_within == 0.0:
        if ss_between == 0.0:
            return TestResult(statistic=0.0, p_value=1.0, dof=(k - 1, n - k))
        return TestResult(statistic=math.inf, p_value=0.0, dof=(k - 1, n - k))
    statistic = (ss_between / (k - 1)) / (ss_within / (n - k))
    return TestResult(
        statistic=float(statistic),
        p_value=f_sf(statistic, k - 1, n - k),
        dof=(k - 1, n - k),
    )


def mutual_info_discrete(a_codes: np.ndarray, b_codes: np.ndarray) -> float:
    """Plug-in mutual information between two code vectors, in nats.

    Empty joint cells contribute zero. The log argument is formed from
    integer counts, so exact product distributions give exactly 0.
    """
    a_codes = np.asarray(a_codes)
    b_codes = np.asarray(b_codes)
    if a_codes.shape != b_codes.shape:
        raise ValueError("a and b must have equal length")
    if a_codes.size == 0:
        raise ValueError("empty input")
    counts = _contingency(a_codes, b_codes)
    n = counts.sum()
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    mi = 0.0
    rows, cols = np.nonzero(counts)
    for i, j in zip(rows.tolist(), cols.tolist()):
        c_ij = counts[i, j]
        mi += (c_ij / n) * math.log((c_ij * n) / (row[i] * col[j]))
    return max(0.0, mi)


def avg_mutual_info(x_codes: np.ndarray, context: list[np.ndarray]) -> float:
    """Mean mutual information between ``x_codes`` and each context vector."""
    if not context:
        raise ValueError("context must be nonempty")
    return sum(mutual_info_discrete(x_codes, c) for c in context) / len(context)
