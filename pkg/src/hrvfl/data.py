"""Dataset ingestion, scaling, fold splitting and label-noise injection."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DataError
from .seeding import make_rng


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary classification data with labels in {-1, +1}.

    ``classes[0]`` is the original label mapped to -1 and ``classes[1]``
    the one mapped to +1.
    """

    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"
    classes: tuple = (-1, 1)

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(f"X shape {X.shape} does not match {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise DataError("labels must be -1 or +1")
        if len(np.unique(y)) != 2:
            raise DataError("both classes must be present")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def label_mapping(self) -> dict:
        return {self.classes[0]: -1, self.classes[1]: 1}

    def class_counts(self) -> dict:
        return {str(c): int(np.sum(self.y == s)) for c, s in zip(self.classes, (-1.0, 1.0))}

    def subset(self, idx) -> "Dataset":
        """Rows ``idx``; the result may hold a single class."""
        return _unchecked(self.X[idx], self.y[idx], self.name, self.classes)


def _unchecked(X, y, name, classes) -> Dataset:
    ds = object.__new__(Dataset)
    for k, v in (("X", X), ("y", y), ("name", name), ("classes", classes)):
        object.__setattr__(ds, k, v)
    return ds


# ---------------------------------------------------------------- CSV


def _label_order(values: Sequence[str]) -> list[str]:
    try:
        return sorted(values, key=float)
    except ValueError:
        return sorted(values)


def load_csv(
    path,
    label_column: Union[int, str] = -1,
    header: bool = False,
    delimiter: str = ",",
    name: Optional[str] = None,
    skip_bad_rows: bool = False,
) -> Dataset:
    """Read a two-class CSV file.

    Labels may be any two distinct strings; they are mapped to -1/+1 by
    sorted order (numeric order when both parse as numbers). Any feature
    cell that does not parse as a finite float raises :class:`DataError`
    listing ``(line, column, value)`` locations, unless ``skip_bad_rows``
    is set, in which case those rows are dropped.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter)]
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"{path}: cannot read: {exc}") from exc
    first_line = 1
    if header:
        if not rows:
            raise DataError(f"{path}: empty file")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    else:
        names = None
    lines = [(first_line + i, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not lines:
        raise DataError(f"{path}: no data rows")

    width = len(lines[0][1])
    if isinstance(label_column, str):
        if names is None or label_column not in names:
            raise DataError(f"{path}: label column {label_column!r} not found in header")
        lab = names.index(label_column)
    else:
        lab = label_column if label_column >= 0 else width + label_column
        if not 0 <= lab < width:
            raise DataError(f"{path}: label column {label_column} out of range for {width} columns")

    feats, labels, bad = [], [], []
    for line_no, row in lines:
        if len(row) != width:
            bad.append((line_no, None, f"expected {width} fields, got {len(row)}"))
            continue
        vals, ok = [], True
        for j, cell in enumerate(row):
            if j == lab:
                continue
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                bad.append((line_no, j, cell))
                ok = False
                continue
            vals.append(v)
        if ok:
            feats.append(vals)
            labels.append(row[lab].strip())
    if bad and not skip_bad_rows:
        shown = "; ".join(f"line {ln} col {c}: {v!r}" for ln, c, v in bad[:10])
        err = DataError(f"{path}: {len(bad)} unparseable cell(s): {shown}")
        err.locations = bad
        raise err
    if not feats:
        raise DataError(f"{path}: no valid rows")

    classes = _label_order(sorted(set(labels)))
    if len(classes) != 2:
        raise DataError(f"{path}: expected exactly two classes, found {len(classes)}: {classes[:5]}")
    y = np.where(np.array(labels) == classes[1], 1.0, -1.0)
    X = np.array(feats, dtype=np.float64).reshape(len(feats), width - 1)
    return Dataset(X, y, name or path.stem, tuple(classes))


def save_csv(ds: Dataset, path, delimiter: str = ",") -> None:
    """Write with a header row; the label is the last column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(ds.m)] + ["label"])
        for row, s in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in row] + [ds.classes[int(s > 0)]])


def write_manifest(entries: Sequence[tuple[Dataset, str]], path, header: bool = True) -> None:
    """JSON index of datasets: name, path, n, m and class counts.

    ``header`` records whether the listed files start with a header row,
    which is the case for files written by :func:`save_csv`.
    """
    records = [
        {"name": ds.name, "path": str(p), "n": ds.n, "m": ds.m, "class_counts": ds.class_counts(),
         "header": header, "label_column": -1}
        for ds, p in entries
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"datasets": records}, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        records = json.load(fh)["datasets"]
    base = os.path.dirname(os.path.abspath(path))
    for r in records:
        if not os.path.isabs(r["path"]):
            r["path"] = os.path.join(base, r["path"])
    return records


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-feature min-max scaling fitted on training data."""

    minimum: np.ndarray
    span: np.ndarray

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.minimum.shape[0]:
            raise DataError(f"expected {self.minimum.shape[0]} features, got {X.shape[-1]}")
        safe = np.where(self.span > 0, self.span, 1.0)
        return np.where(self.span > 0, (X - self.minimum) / safe, 0.0)

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "span": self.span.tolist()}

    @classmethod
    def from_dict(cls, d) -> "NormStats":
        return cls(np.array(d["minimum"], dtype=np.float64), np.array(d["span"], dtype=np.float64))


def fit_minmax(X) -> NormStats:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot fit scaling on an empty matrix")
    lo = X.min(axis=0)
    return NormStats(lo, X.max(axis=0) - lo)


def normalize(train: Dataset, others: Sequence[Dataset] = ()) -> tuple[Dataset, list[Dataset], NormStats]:
    """Scale features to [0, 1] using ``train`` statistics only.

    Constant features map to 0. Values in ``others`` outside the training
    range are not clipped.
    """
    stats = fit_minmax(train.X)
    return (
        _unchecked(stats.transform(train.X), train.y, train.name, train.classes),
        [_unchecked(stats.transform(o.X), o.y, o.name, o.classes) for o in others],
        stats,
    )


# ---------------------------------------------------------------- folds


@dataclass(frozen=True)
class KFold:
    """``folds`` is a list of sorted ``(train_idx, test_idx)`` pairs.

    ``stratified`` is False when some class had fewer than ``k`` members
    and the split fell back to a plain shuffle.
    """

    folds: list
    stratified: bool

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)

    def __getitem__(self, i):
        return self.folds[i]


def kfold_split(y, k: int, seed: int) -> KFold:
    """Seeded, stratified k-fold split of ``range(len(y))``.

    Within each class the indices are shuffled, the classes are laid end
    to end and position ``j`` goes to fold ``j % k``. Every fold therefore
    holds ``floor`` or ``ceil`` of ``n_c / k`` members of each class.
    """
    if isinstance(y, Dataset):
        y = y.y
    y = np.asarray(y)
    n = y.shape[0]
    if int(k) != k or k < 2:
        raise ConfigError(f"k must be an integer >= 2, got {k}")
    if n < k:
        raise ConfigError(f"cannot split {n} samples into {k} folds")
    rng = make_rng(seed)
    classes, counts = np.unique(y, return_counts=True)
    stratified = bool(np.all(counts >= k))
    if stratified:
        order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in classes])
    else:
        order = rng.permutation(n)
    assign = np.empty(n, dtype=np.int64)
    assign[order] = np.arange(n) % k
    folds = []
    for f in range(k):
        test = np.flatnonzero(assign == f)
        train = np.flatnonzero(assign != f)
        folds.append((train, test))
    return KFold(folds, stratified)


# ---------------------------------------------------------------- noise


@dataclass(frozen=True)
class NoiseSpec:
    rate: float = 0.0
    seed: int = 0
    scope: str = "train_only"

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"noise rate must lie in [0, 1), got {self.rate}")
        if self.scope != "train_only":
            raise ConfigError(f"unsupported noise scope {self.scope!r}")


def flip_count(rate: float, n: int) -> int:
    """``floor(rate * n)`` with ``rate`` read as its shortest decimal form."""
    return math.floor(Fraction(repr(float(rate))) * n)


def flip_labels(y, rate: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Negate exactly ``floor(rate * n)`` labels chosen without replacement."""
    y = np.asarray(y, dtype=np.float64)
    n_flip = flip_count(rate, y.shape[0])
    idx = np.sort(make_rng(seed).choice(y.shape[0], size=n_flip, replace=False))
    out = y.copy()
    out[idx] = -out[idx]
    return out, idx


def inject_label_noise(ds: Dataset, spec: NoiseSpec) -> tuple[Dataset, np.ndarray]:
    """Return a corrupted copy of ``ds`` and the sorted flipped indices."""
    y, idx = flip_labels(ds.y, spec.rate, spec.seed)
    return _unchecked(ds.X, y, ds.name, ds.classes), idx
