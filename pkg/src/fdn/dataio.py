"""Tabular dataset loading, subsampling and mini-batch iteration.

Datasets hold a dense float block, an integer block of categorical indices
(already clamped to their vocabularies, index 0 reserved for unknown), and
one label column per task. Everything is immutable after load; batching and
subsampling return views or fresh copies driven by seeded permutations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .rng import Rng, derive_seed

TASK_KINDS = ("regression", "binary")


class DataError(ValueError):
    """Raised for malformed schemas, headers or unusable datasets."""


@dataclass(frozen=True)
class Schema:
    """Column layout: task labels, categorical vocabularies, dense fields."""

    tasks: tuple[tuple[str, str], ...]
    categorical_fields: tuple[tuple[str, int], ...] = ()
    dense_fields: tuple[str, ...] = ()
    embedding_dim: int = 8

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple((str(n), str(k)) for n, k in self.tasks))
        object.__setattr__(self, "categorical_fields",
                           tuple((str(n), int(v)) for n, v in self.categorical_fields))
        object.__setattr__(self, "dense_fields", tuple(str(n) for n in self.dense_fields))
        if not self.tasks:
            raise DataError("schema needs at least one task")
        if not self.categorical_fields and not self.dense_fields:
            raise DataError("schema needs at least one field")
        for name, kind in self.tasks:
            if kind not in TASK_KINDS:
                raise DataError(f"unknown task kind {kind!r} for task {name!r}")
        for name, vocab in self.categorical_fields:
            if vocab < 1:
                raise DataError(f"vocabulary size must be >= 1 for field {name!r}, got {vocab}")
        if self.embedding_dim < 1:
            raise DataError(f"embedding_dim must be >= 1, got {self.embedding_dim}")

    @property
    def task_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.tasks)

    @property
    def task_kinds(self) -> tuple[str, ...]:
        return tuple(kind for _, kind in self.tasks)

    def to_json_dict(self) -> dict:
        return {
            "tasks": [list(t) for t in self.tasks],
            "categorical_fields": [list(f) for f in self.categorical_fields],
            "dense_fields": list(self.dense_fields),
            "embedding_dim": self.embedding_dim,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Schema":
        return cls(
            tasks=tuple((t[0], t[1]) for t in d["tasks"]),
            categorical_fields=tuple((f[0], int(f[1])) for f in d.get("categorical_fields", [])),
            dense_fields=tuple(d.get("dense_fields", [])),
            embedding_dim=int(d.get("embedding_dim", 8)),
        )


@dataclass(frozen=True)
class Dataset:
    """Loaded samples: dense block [n, n_dense], categorical ids [n, n_cat],
    one float label column per task."""

    dense: np.ndarray
    categorical: np.ndarray
    labels: tuple[np.ndarray, ...]
    task_kinds: tuple[str, ...]
    name: str = "external"

    def __post_init__(self):
        n = self.dense.shape[0]
        if self.categorical.shape[0] != n:
            raise DataError("dense and categorical row counts differ")
        if len(self.labels) != len(self.task_kinds):
            raise DataError("labels and task_kinds lengths differ")
        if n == 0:
            raise DataError("dataset has no rows")
        for col, kind in zip(self.labels, self.task_kinds):
            if col.shape != (n,):
                raise DataError(f"label column has shape {col.shape}, expected ({n},)")
            if kind == "binary" and not np.isin(col, (0.0, 1.0)).all():
                raise DataError("binary task labels must be 0 or 1")

    @property
    def n(self) -> int:
        return self.dense.shape[0]

    @property
    def n_tasks(self) -> int:
        return len(self.labels)

    def rows(self, index: np.ndarray | Sequence[int]) -> "Dataset":
        idx = np.asarray(index, dtype=np.int64)
        return Dataset(
            dense=self.dense[idx].copy(),
            categorical=self.categorical[idx].copy(),
            labels=tuple(col[idx].copy() for col in self.labels),
            task_kinds=self.task_kinds,
            name=self.name,
        )

    def split(self, n_first: int) -> tuple["Dataset", "Dataset"]:
        """Head/tail split into (first n_first rows, remainder)."""
        if not (0 < n_first < self.n):
            raise DataError(f"split point {n_first} outside (0, {self.n})")
        return self.rows(np.arange(n_first)), self.rows(np.arange(n_first, self.n))


@dataclass(frozen=True)
class Batch:
    dense: np.ndarray
    categorical: np.ndarray
    labels: tuple[np.ndarray, ...]

    @property
    def size(self) -> int:
        return self.dense.shape[0]


def _parse_row(row: list[str], dense_idx: list[int], cat_idx: list[int],
               vocabs: list[int], label_idx: list[int],
               kinds: Sequence[str]) -> tuple | None:
    """One CSV row -> (dense values, cat indices, labels), or None if malformed."""
    try:
        dense = [float(row[i]) for i in dense_idx]
        cats = []
        for i, vocab in zip(cat_idx, vocabs):
            raw = int(row[i])
            cats.append(raw if 0 <= raw < vocab else 0)
        labels = [float(row[i]) for i in label_idx]
    except (ValueError, IndexError):
        return None
    if not all(np.isfinite(v) for v in dense + labels):
        return None
    for kind, y in zip(kinds, labels):
        if kind == "binary" and y not in (0.0, 1.0):
            return None
    return dense, cats, labels


def load_csv(path: str | Path, schema: Schema) -> tuple[Dataset, int]:
    """Parse a CSV into a Dataset; returns (dataset, count of skipped rows).

    The header must contain every schema column by name; extra columns are
    ignored. Rows that fail to parse (wrong width, non-numeric values,
    non-finite values, non-0/1 binary labels) are skipped and counted.
    Out-of-vocabulary categorical ids map to the reserved index 0.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        col = {name: i for i, name in enumerate(header)}
        missing = [name for name in
                   list(schema.dense_fields)
                   + [n for n, _ in schema.categorical_fields]
                   + list(schema.task_names)
                   if name not in col]
        if missing:
            raise DataError(f"{path}: header is missing columns {missing}")

        dense_idx = [col[n] for n in schema.dense_fields]
        cat_idx = [col[n] for n, _ in schema.categorical_fields]
        vocabs = [v for _, v in schema.categorical_fields]
        label_idx = [col[n] for n in schema.task_names]
        kinds = schema.task_kinds

        dense_rows, cat_rows, label_rows = [], [], []
        skipped = 0
        for row in reader:
            parsed = _parse_row(row, dense_idx, cat_idx, vocabs, label_idx, kinds)
            if parsed is None:
                skipped += 1
                continue
            dense_rows.append(parsed[0])
            cat_rows.append(parsed[1])
            label_rows.append(parsed[2])

    if not dense_rows:
        raise DataError(f"{path}: no usable rows ({skipped} skipped)")
    n = len(dense_rows)
    labels = np.array(label_rows, dtype=np.float64).reshape(n, len(kinds))
    dataset = Dataset(
        dense=np.array(dense_rows, dtype=np.float64).reshape(n, len(dense_idx)),
        categorical=np.array(cat_rows, dtype=np.int64).reshape(n, len(cat_idx)),
        labels=tuple(labels[:, t] for t in range(len(kinds))),
        task_kinds=kinds,
    )
    return dataset, skipped


def sample_without_replacement(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Seeded uniform subset of n distinct rows via partial Fisher-Yates."""
    if not (1 <= n <= dataset.n):
        raise DataError(f"cannot sample {n} of {dataset.n} rows")
    rng = Rng(derive_seed(seed, 0x5A17))
    pool = np.arange(dataset.n)
    for i in range(n):
        j = i + rng.randint_below(dataset.n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return dataset.rows(pool[:n])


def batches(dataset: Dataset, batch_size: int,
            shuffle_seed: int | None) -> Iterator[Batch]:
    """Seeded shuffle then contiguous slices; the final short batch is kept.

    shuffle_seed None iterates in stored order (evaluation).
    """
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    if shuffle_seed is None:
        order = np.arange(dataset.n)
    else:
        order = Rng(derive_seed(shuffle_seed, 0xB47C)).permutation(dataset.n)
    for start in range(0, dataset.n, batch_size):
        idx = order[start:start + batch_size]
        yield Batch(
            dense=dataset.dense[idx],
            categorical=dataset.categorical[idx],
            labels=tuple(col[idx] for col in dataset.labels),
        )
