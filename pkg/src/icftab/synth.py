"""Synthetic dataset generators used by the verification suite and CLI.

Two constructions: a classification table with one planted
implicitly-categorical column (integer codes whose permuted parity
drives the label, so numeric order carries no signal), and a 1-D
high-frequency regression task that punishes overly smooth fits.
"""

from __future__ import annotations

import numpy as np

from .data import CLASSIFICATION, REGRESSION, ColumnMeta, Dataset

__all__ = ["gen_planted_icf", "gen_nonsmooth_regression"]


def gen_planted_icf(
    n: int, k: int, d_noise: int = 4, flip_prob: float = 0.0, seed: int = 0
) -> Dataset:
    """Classification dataset with a planted categorical column.

    Column 0 holds uniform integer codes 0..k-1. The label is the parity
    of a seeded random permutation of the code, flipped with probability
    flip_prob. Noise columns are standard normal, independent of the
    label. A lookup classifier reaches accuracy 1 - flip_prob; anything
    that relies on the numeric ordering of the codes sees almost no
    correlation with the target.
    """
    if k < 2:
        raise ValueError(f"need at least 2 categories, got k={k}")
    if n < 10 * k:
        raise ValueError(f"need n >= 10k rows for stable category counts, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, k, size=n)
    perm = rng.permutation(k)
    y = (perm[codes] % 2).astype(np.float64)
    flips = rng.random(n) < flip_prob
    y = np.where(flips, 1.0 - y, y)
    noise = rng.standard_normal((n, d_noise))
    X = np.column_stack([codes.astype(np.float64), noise]) if d_noise else codes.astype(np.float64)[:, None]
    names = ["code"] + [f"noise{j}" for j in range(d_noise)]
    columns = tuple(
        ColumnMeta(name=names[j], declared_kind="numerical", index=j, cardinality=int(np.unique(X[:, j]).size))
        for j in range(X.shape[1])
    )
    return Dataset(
        X=X,
        y=y,
        task=CLASSIFICATION,
        columns=columns,
        split=np.zeros(n, dtype=np.int8),
        dataset_id=f"planted_icf_n{n}_k{k}_s{seed}",
    )


def gen_nonsmooth_regression(
    n: int, frequency: float, noise_std: float = 0.0, seed: int = 0
) -> Dataset:
    """Regression dataset y = sin(2 pi f x) + noise with x ~ U[0, 1]."""
    if frequency < 1:
        raise ValueError(f"frequency must be >= 1, got {frequency}")
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    y = np.sin(2.0 * np.pi * frequency * x) + noise_std * rng.standard_normal(n)
    columns = (
        ColumnMeta(name="x", declared_kind="numerical", index=0, cardinality=int(np.unique(x).size)),
    )
    return Dataset(
        X=x[:, None],
        y=y,
        task=REGRESSION,
        columns=columns,
        split=np.zeros(n, dtype=np.int8),
        dataset_id=f"nonsmooth_f{frequency}_s{seed}",
    )
