"""Padded one-hot channel encoding for detected categorical columns.

Every column becomes an M-deep channel vector: categorical columns get a
one-hot of their training-fitted bin code, zero-padded up to the largest
bin count M across categorical columns; numerical columns carry their
standardized value in channel 0 and zeros elsewhere. Values never seen
in training encode as all-zeros, the unique vector orthogonal to every
training category. MLPs consume the row-major flattened view.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import TRAIN, Dataset
from .errors import DataError
from .stats import categorize
from .transforms import Standardizer, fit_standardizer

__all__ = [
    "BinMap",
    "EncodedTensor",
    "fit_binmaps",
    "channel_depth",
    "encode",
    "flatten",
    "CfdEncoder",
    "write_tensor",
    "read_tensor",
]

_MAGIC = b"ICFE"


@dataclass(frozen=True)
class BinMap:
    """Training-fitted value -> dense code table for one column."""

    index: int
    table: dict[float, int]
    bin_count: int


@dataclass(frozen=True)
class EncodedTensor:
    """N x D x M channel tensor plus its categorical layout."""

    data: np.ndarray
    M: int
    cat_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or self.data.shape[2] != self.M:
            raise DataError(f"tensor shape {self.data.shape} does not match M={self.M}")


def fit_binmaps(ds: Dataset, icf_set: set[int] | list[int]) -> list[BinMap]:
    """One BinMap per flagged column, fitted from training rows."""
    icf_set = sorted(set(icf_set))
    bad = [j for j in icf_set if not 0 <= j < ds.n_cols]
    if bad:
        raise DataError(f"flagged indices out of range: {bad}")
    Xtr = ds.X[ds.mask(TRAIN)]
    maps = []
    for j in icf_set:
        _, table = categorize(Xtr[:, j])
        maps.append(BinMap(index=j, table=table, bin_count=len(table)))
    return maps


def channel_depth(binmaps: list[BinMap], append_raw: bool = False) -> int:
    """M is the largest bin count across categorical columns (1 when no
    column is categorical); appending the raw value adds one channel."""
    m = max((b.bin_count for b in binmaps), default=1)
    return m + 1 if (append_raw and binmaps) else m


def encode(
    X: np.ndarray,
    binmaps: list[BinMap],
    M: int,
    append_raw: bool = False,
    raw_values: np.ndarray | None = None,
) -> EncodedTensor:
    """Build the channel tensor for rows whose numerical columns are
    already standardized and categorical columns still hold raw values.

    With append_raw, channel 0 of a categorical column carries the
    standardized raw value (supplied via raw_values) and the one-hot
    shifts up by one.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    by_col = {b.index: b for b in binmaps}
    if M < channel_depth(binmaps, append_raw):
        raise DataError(f"M={M} is smaller than the largest bin count")
    if append_raw and binmaps and raw_values is None:
        raise DataError("append_raw needs the standardized raw categorical values")
    out = np.zeros((n, d, M), dtype=np.float64)
    shift = 1 if (append_raw and binmaps) else 0
    for j in range(d):
        bm = by_col.get(j)
        if bm is None:
            out[:, j, 0] = X[:, j]
            continue
        if shift:
            out[:, j, 0] = raw_values[:, j]
        for i in range(n):
            code = bm.table.get(float(X[i, j]))
            if code is not None:
                out[i, j, code + shift] = 1.0
    return EncodedTensor(data=out, M=M, cat_indices=tuple(sorted(by_col)))


def flatten(t: EncodedTensor) -> np.ndarray:
    """Row-major (feature, channel) flatten: (N, D, M) -> (N, D*M)."""
    n, d, m = t.data.shape
    return t.data.reshape(n, d * m)


class CfdEncoder:
    """Fit-once encoder: binmaps on flagged columns, standardizer on the
    rest, all from training rows; transform any row set afterwards."""

    def __init__(self, append_raw: bool = False):
        self.append_raw = append_raw
        self.binmaps: list[BinMap] = []
        self.M = 1
        self._num_idx: list[int] = []
        self._num_std: Standardizer | None = None
        self._raw_std: Standardizer | None = None

    def fit(self, ds: Dataset, icf_set: set[int] | list[int]) -> "CfdEncoder":
        icf = sorted(set(icf_set))
        self.binmaps = fit_binmaps(ds, icf)
        self.M = channel_depth(self.binmaps, self.append_raw)
        self._num_idx = [j for j in range(ds.n_cols) if j not in icf]
        Xtr = ds.X[ds.mask(TRAIN)]
        if self._num_idx:
            self._num_std = fit_standardizer(Xtr[:, self._num_idx])
        if self.append_raw and icf:
            self._raw_std = fit_standardizer(Xtr[:, icf])
        return self

    def transform(self, X: np.ndarray) -> EncodedTensor:
        X = np.asarray(X, dtype=np.float64)
        work = X.copy()
        if self._num_idx and self._num_std is not None:
            work[:, self._num_idx] = self._num_std.transform(X[:, self._num_idx])
        raw = None
        if self.append_raw and self.binmaps and self._raw_std is not None:
            cat_idx = [b.index for b in self.binmaps]
            raw = np.zeros_like(X)
            raw[:, cat_idx] = self._raw_std.transform(X[:, cat_idx])
        return encode(work, self.binmaps, self.M, append_raw=self.append_raw, raw_values=raw)


def write_tensor(path: str | Path, t: EncodedTensor) -> None:
    """Binary tensor file: magic, u32 N/D/M, a D-bit categorical layout
    bitmap (LSB-first per byte), then float32 little-endian values in
    row-major N, D, M order."""
    n, d, m = t.data.shape
    bitmap = bytearray((d + 7) // 8)
    for j in t.cat_indices:
        bitmap[j // 8] |= 1 << (j % 8)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", n, d, m))
        fh.write(bytes(bitmap))
        fh.write(t.data.astype("<f4").tobytes(order="C"))


def read_tensor(path: str | Path) -> EncodedTensor:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise DataError(f"not a tensor file: bad magic {magic!r}")
        n, d, m = struct.unpack("<III", fh.read(12))
        bitmap = fh.read((d + 7) // 8)
        cat = tuple(j for j in range(d) if bitmap[j // 8] >> (j % 8) & 1)
        payload = fh.read(n * d * m * 4)
        if len(payload) != n * d * m * 4:
            raise DataError("tensor file truncated")
        data = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(n, d, m)
    return EncodedTensor(data=data, M=m, cat_indices=cat)
