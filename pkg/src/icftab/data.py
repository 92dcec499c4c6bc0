"""Dataset representation, CSV + schema ingestion, and seeded splitting.

A dataset is an immutable N x D float matrix with a target vector, a
task kind, per-column metadata, and a per-row split assignment. All
cells must parse as numbers; categorical columns store integer codes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, ParseError, SchemaError

__all__ = [
    "TRAIN",
    "VALID",
    "TEST",
    "ColumnMeta",
    "Dataset",
    "load_csv",
    "load_schema",
    "split_dataset",
    "save_csv",
]

TRAIN, VALID, TEST = 0, 1, 2

CLASSIFICATION = "classification"
REGRESSION = "regression"


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    declared_kind: str  # "numerical" | "categorical"
    index: int
    cardinality: int  # distinct values among training rows

    def __post_init__(self) -> None:
        if self.declared_kind not in ("numerical", "categorical"):
            raise ConfigurationError(f"unknown column kind {self.declared_kind!r}")
        if self.cardinality < 1:
            raise DataError(f"column {self.name!r} has no values")


@dataclass(frozen=True)
class Dataset:
    """Immutable table: features X, target y, task kind, column metadata,
    and a per-row split assignment (TRAIN / VALID / TEST)."""

    X: np.ndarray
    y: np.ndarray
    task: str
    columns: tuple[ColumnMeta, ...]
    split: np.ndarray
    dataset_id: str = "dataset"

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise DataError(f"X must be a nonempty 2-D matrix, got shape {self.X.shape}")
        n, d = self.X.shape
        if self.y.shape != (n,):
            raise DataError("y length must match the number of rows")
        if self.split.shape != (n,):
            raise DataError("every row needs a split assignment")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ConfigurationError(f"unknown task {self.task!r}")
        if len(self.columns) != d:
            raise DataError("column metadata must cover every column")
        if len({c.index for c in self.columns}) != d:
            raise DataError("column indices must be unique")
        if self.task == CLASSIFICATION and not np.isin(self.y, (0.0, 1.0)).all():
            raise DataError("classification targets must be exactly {0, 1}")
        if not np.isfinite(self.X).all() or not np.isfinite(self.y).all():
            raise DataError("dataset contains non-finite values")
        for arr in (self.X, self.y, self.split):
            arr.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_cols(self) -> int:
        return self.X.shape[1]

    def mask(self, part: int) -> np.ndarray:
        return self.split == part

    def rows(self, part: int) -> tuple[np.ndarray, np.ndarray]:
        m = self.mask(part)
        return self.X[m], self.y[m]

    @property
    def categorical_indices(self) -> tuple[int, ...]:
        return tuple(c.index for c in self.columns if c.declared_kind == "categorical")


def load_schema(schema: dict | str | Path) -> dict:
    """Accept a schema dict or a path to the JSON sidecar."""
    if isinstance(schema, (str, Path)):
        with open(schema, "r", encoding="utf-8") as fh:
            schema = json.load(fh)
    if not isinstance(schema, dict):
        raise SchemaError("schema must be a JSON object")
    schema = dict(schema)  # never mutate the caller's dict
    for key in ("target", "task"):
        if key not in schema:
            raise SchemaError(f"schema is missing the {key!r} key")
    if schema["task"] not in (CLASSIFICATION, REGRESSION):
        raise SchemaError(f"unknown task {schema['task']!r}")
    schema.setdefault("categorical", [])
    return schema


def _fit_cardinalities(
    X: np.ndarray, names: list[str], kinds: list[str], train_mask: np.ndarray
) -> tuple[ColumnMeta, ...]:
    train_rows = X[train_mask]
    return tuple(
        ColumnMeta(
            name=names[j],
            declared_kind=kinds[j],
            index=j,
            cardinality=int(np.unique(train_rows[:, j]).size),
        )
        for j in range(X.shape[1])
    )


def load_csv(path: str | Path, schema: dict | str | Path, dataset_id: str | None = None) -> Dataset:
    """Load a CSV (header row, RFC-4180, no missing cells) with its schema.

    The schema names the target column and task and lists categorical
    columns; an optional "columns" key pins the exact feature set, in
    which case extra or missing columns raise SchemaError. All rows are
    initially assigned to TRAIN; use split_dataset for real splits.
    """
    schema = load_schema(schema)
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = list(reader)
    if not rows:
        raise DataError(f"{path} has no data rows")

    target = schema["target"]
    if target not in header:
        raise SchemaError(f"target column {target!r} not found in {path}")
    for name in schema["categorical"]:
        if name not in header:
            raise SchemaError(f"categorical column {name!r} not found in {path}")
    if "columns" in schema:
        expected = set(schema["columns"]) | {target}
        actual = set(header)
        if expected - actual:
            raise SchemaError(f"columns missing from CSV: {sorted(expected - actual)}")
        if actual - expected:
            raise SchemaError(f"unexpected columns in CSV: {sorted(actual - expected)}")

    t_idx = header.index(target)
    feature_names = [h for i, h in enumerate(header) if i != t_idx]
    values = np.empty((len(rows), len(header)), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {i + 2}: expected {len(header)} cells, got {len(row)}")
        for j, cell in enumerate(row):
            if cell == "":
                raise DataError(f"missing value at row {i + 2}, column {header[j]!r}")
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric cell {cell!r} at row {i + 2}, column {header[j]!r}",
                    row=i + 2,
                    column=header[j],
                ) from None

    y = values[:, t_idx].copy()
    X = np.delete(values, t_idx, axis=1)
    cat = set(schema["categorical"])
    kinds = ["categorical" if n in cat else "numerical" for n in feature_names]
    n = X.shape[0]
    split = np.zeros(n, dtype=np.int8)
    columns = _fit_cardinalities(X, feature_names, kinds, np.ones(n, dtype=bool))
    return Dataset(
        X=X,
        y=y,
        task=schema["task"],
        columns=columns,
        split=split,
        dataset_id=dataset_id or path.stem,
    )


def _apportion(n: int, fractions: tuple[float, ...]) -> list[int]:
    """Largest-remainder apportionment of n rows over the fractions."""
    raw = [n * f for f in fractions]
    base = [math.floor(r) for r in raw]
    leftover = n - sum(base)
    order = sorted(range(len(fractions)), key=lambda i: raw[i] - base[i], reverse=True)
    for i in order[:leftover]:
        base[i] += 1
    return base


def split_dataset(ds: Dataset, fractions: tuple[float, float, float], seed: int) -> Dataset:
    """Assign rows to train/valid/test by a seeded permutation partition.

    Classification splits are stratified per class so each split's class
    ratio stays within one sample of the global ratio. Column
    cardinalities are refitted on the resulting training rows.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ConfigurationError(f"fractions must be three positive numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"fractions must sum to 1, got {sum(fractions)}")
    n = ds.n_rows
    rng = np.random.default_rng(seed)
    split = np.empty(n, dtype=np.int8)
    if ds.task == CLASSIFICATION:
        for cls in (0.0, 1.0):
            idx = np.flatnonzero(ds.y == cls)
            rng.shuffle(idx)
            sizes = _apportion(idx.size, tuple(fractions))
            bounds = np.cumsum(sizes)
            split[idx[: bounds[0]]] = TRAIN
            split[idx[bounds[0] : bounds[1]]] = VALID
            split[idx[bounds[1] :]] = TEST
    else:
        idx = rng.permutation(n)
        sizes = _apportion(n, tuple(fractions))
        bounds = np.cumsum(sizes)
        split[idx[: bounds[0]]] = TRAIN
        split[idx[bounds[0] : bounds[1]]] = VALID
        split[idx[bounds[1] :]] = TEST
    counts = [int((split == part).sum()) for part in (TRAIN, VALID, TEST)]
    if min(counts) == 0:
        raise ConfigurationError(f"a split received zero rows: train/valid/test = {counts}")
    names = [c.name for c in ds.columns]
    kinds = [c.declared_kind for c in ds.columns]
    columns = _fit_cardinalities(ds.X, names, kinds, split == TRAIN)
    return replace(ds, X=ds.X.copy(), y=ds.y.copy(), columns=columns, split=split)


def save_csv(ds: Dataset, csv_path: str | Path, schema_path: str | Path, target_name: str = "y") -> None:
    """Write a dataset back out as the CSV + JSON schema sidecar pair."""
    names = [c.name for c in ds.columns]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + [target_name])
        for i in range(ds.n_rows):
            writer.writerow([repr(float(v)) for v in ds.X[i]] + [repr(float(ds.y[i]))])
    schema = {
        "target": target_name,
        "task": ds.task,
        "categorical": [c.name for c in ds.columns if c.declared_kind == "categorical"],
        "columns": names,
    }
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2)
        fh.write("\n")
