"""Tabular data: CSV ingestion, preprocessing and synthetic blobs.

Numeric columns are standardized with training statistics; categorical
columns are one-hot encoded, one column per category, and decoded by argmax
on the way back.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CSVParseError, InvalidArgumentError, InvalidDatasetError
from .ot import EmpiricalSample

__all__ = [
    "Table",
    "Split",
    "Preprocessor",
    "load_csv",
    "table_from_arrays",
    "preprocess",
    "make_synthetic",
]

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass
class Table:
    """Column-typed table; numeric columns hold floats, others strings."""

    columns: dict[str, list]
    kinds: dict[str, str]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise InvalidArgumentError("columns differ in length")
        if set(self.kinds) != set(self.columns):
            raise InvalidArgumentError("kinds must name every column")

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, len(self.columns)

    def take(self, rows) -> "Table":
        rows = list(rows)
        return Table({k: [v[i] for i in rows] for k, v in self.columns.items()}, dict(self.kinds))


def _parse_float(cell: str) -> float:
    value = float(cell)
    if not np.isfinite(value):
        raise ValueError(cell)
    return value


def load_csv(path, schema: Mapping[str, str] | None = None) -> Table:
    """Read a CSV file with a header row into a :class:`Table`.

    ``schema`` maps column names to ``"numeric"`` or ``"categorical"``;
    unlisted columns are numeric when every cell parses as a finite float.
    Parse errors cite the 1-based data row (header excluded) and the column.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    schema = dict(schema or {})
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CSVParseError(f"{path}: empty file, header row expected") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise CSVParseError(f"{path}: duplicate column names in header")
        unknown = set(schema) - set(header)
        if unknown:
            raise CSVParseError(f"{path}: schema names unknown columns {sorted(unknown)}")
        for kind in schema.values():
            if kind not in (NUMERIC, CATEGORICAL):
                raise CSVParseError(f"{path}: unknown column kind {kind!r}")
        cells: list[list[str]] = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise CSVParseError(
                    f"{path}: row {row_no} has {len(row)} fields, expected {len(header)}", row=row_no)
            cells.append([c.strip() for c in row])

    columns: dict[str, list] = {}
    kinds: dict[str, str] = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in cells]
        kind = schema.get(name)
        if kind is None:
            try:
                [_parse_float(c) for c in raw]
                kind = NUMERIC
            except ValueError:
                kind = CATEGORICAL
        if kind == NUMERIC:
            values = []
            for i, c in enumerate(raw, start=1):
                try:
                    values.append(_parse_float(c))
                except ValueError:
                    raise CSVParseError(
                        f"{path}: row {i}, column {name!r}: expected a number, got {c!r}",
                        row=i, column=name) from None
            columns[name] = values
        else:
            columns[name] = raw
        kinds[name] = kind
    return Table(columns, kinds)


def table_from_arrays(points, labels, feature_names: Sequence[str] | None = None, label: str = "label") -> Table:
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    names = list(feature_names or getattr(points, "feature_names", None) or [f"x{j}" for j in range(pts.shape[1])])
    columns = {name: pts[:, j].tolist() for j, name in enumerate(names)}
    columns[label] = np.asarray(labels, dtype=float).tolist()
    return Table(columns, {name: NUMERIC for name in columns})


@dataclass
class Preprocessor:
    """Fitted encoding: per-feature mean/std, category tables, label classes."""

    numeric: list[str]
    means: np.ndarray
    stds: np.ndarray
    categories: dict[str, list[str]]
    order: list[str]
    label: str
    classes: list
    ratio: float = 0.8
    feature_names: list[str] = field(default_factory=list)
    feature_kinds: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.feature_names:
            for name in self.order:
                if name in self.categories:
                    for cat in self.categories[name]:
                        self.feature_names.append(f"{name}={cat}")
                        self.feature_kinds.append(name)
                else:
                    self.feature_names.append(name)
                    self.feature_kinds.append(NUMERIC)

    def transform(self, table: Table) -> EmpiricalSample:
        cols = []
        for name in self.order:
            if name not in table.columns:
                raise InvalidArgumentError(f"column {name!r} missing")
            if name in self.categories:
                cats = self.categories[name]
                vals = table.columns[name]
                block = np.zeros((len(vals), len(cats)))
                for i, v in enumerate(vals):
                    # unseen categories encode as all zeros
                    if v in cats:
                        block[i, cats.index(v)] = 1.0
                cols.append(block)
            else:
                k = self.numeric.index(name)
                v = np.asarray(table.columns[name], dtype=float)
                cols.append(((v - self.means[k]) / self.stds[k])[:, None])
        return EmpiricalSample(np.hstack(cols), list(self.feature_names), list(self.feature_kinds))

    def labels(self, table: Table) -> np.ndarray:
        vals = table.columns[self.label]
        return np.array([self.classes.index(v) for v in vals], dtype=float)

    def inverse_transform(self, points) -> dict[str, list]:
        """Map encoded points back to original columns, argmax-decoding groups."""
        pts = np.asarray(getattr(points, "points", points), dtype=float)
        if pts.ndim != 2 or pts.shape[1] != len(self.feature_names):
            raise InvalidArgumentError(f"expected {len(self.feature_names)} encoded columns")
        out: dict[str, list] = {}
        j = 0
        for name in self.order:
            if name in self.categories:
                cats = self.categories[name]
                block = pts[:, j:j + len(cats)]
                out[name] = [cats[i] for i in np.argmax(block, axis=1)]
                j += len(cats)
            else:
                k = self.numeric.index(name)
                out[name] = (pts[:, j] * self.stds[k] + self.means[k]).tolist()
                j += 1
        return out

    def numeric_raw(self, points) -> np.ndarray:
        """Original-unit values of the numeric columns only."""
        pts = np.asarray(getattr(points, "points", points), dtype=float)
        idx = [self.feature_names.index(name) for name in self.numeric]
        return pts[:, idx] * self.stds + self.means

    def to_json(self) -> dict:
        return {
            "numeric": self.numeric,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "categories": self.categories,
            "order": self.order,
            "label": self.label,
            "classes": self.classes,
            "ratio": self.ratio,
        }


@dataclass
class Split:
    x: EmpiricalSample
    y: np.ndarray


def _label_classes(values: list) -> list:
    classes = sorted(set(values))
    if len(classes) < 2:
        raise InvalidDatasetError("label column has a single class")
    if len(classes) > 2:
        raise InvalidDatasetError(f"label column has {len(classes)} classes; binary labels expected")
    return classes


def preprocess(table: Table, label: str, seed: int = 0, ratio: float = 0.8) -> tuple[Split, Split, Preprocessor]:
    """Shuffle, split ``ratio : 1 - ratio``, fit encoders on train, encode both.

    The larger label value (or later category in sort order) is class 1.
    Constant numeric columns keep a unit scale.
    """
    if label not in table.columns:
        raise InvalidArgumentError(f"label column {label!r} not found")
    if not 0.0 < ratio < 1.0:
        raise InvalidArgumentError("split ratio must lie in (0, 1)")
    n = table.n_rows
    if n < 2:
        raise InvalidDatasetError("need at least two rows")
    classes = _label_classes(table.columns[label])
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(ratio * n)), 1), n - 1)
    train_t, test_t = table.take(perm[:n_train]), table.take(perm[n_train:])

    order = [c for c in table.names if c != label]
    if not order:
        raise InvalidDatasetError("no feature columns")
    numeric = [c for c in order if table.kinds[c] == NUMERIC]
    cats = {c: sorted(set(train_t.columns[c])) for c in order if table.kinds[c] != NUMERIC}
    if numeric:
        block = np.column_stack([np.asarray(train_t.columns[c], dtype=float) for c in numeric])
        means = block.mean(axis=0)
        stds = block.std(axis=0)
        stds[stds == 0.0] = 1.0
    else:
        means = stds = np.zeros(0)
    prep = Preprocessor(numeric, means, stds, cats, order, label, classes, ratio)
    train = Split(prep.transform(train_t), prep.labels(train_t))
    test = Split(prep.transform(test_t), prep.labels(test_t))
    return train, test, prep


def make_synthetic(n: int, d: int, sep: float, seed: int = 0) -> tuple[EmpiricalSample, np.ndarray]:
    """Two unit-variance Gaussian blobs whose means are ``sep`` apart.

    Class 0 is centered at the origin and class 1 at ``sep * 1 / sqrt(d)``;
    labels are balanced (class 1 gets the odd point) and rows are shuffled.
    """
    if n < 2 or d < 1:
        raise InvalidArgumentError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    labels = np.r_[np.zeros(n // 2), np.ones(n - n // 2)]
    rng.shuffle(labels)
    pts = rng.standard_normal((n, d)) + labels[:, None] * (sep / np.sqrt(d))
    return EmpiricalSample(pts), labels
