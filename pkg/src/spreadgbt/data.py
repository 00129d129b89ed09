"""Dataset files: delimited text with a header row, or libsvm-style sparse rows."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise InputError("instances and labels disagree in length")
        if not set(np.unique(self.y)).issubset({-1, 1}):
            raise InputError("labels must be +1/-1")

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.y[idx])


def map_labels(raw) -> np.ndarray:
    """``{0,1}`` becomes ``{-1,+1}``; ``{-1,+1}`` passes through; anything else fails."""
    raw = np.asarray(raw, dtype=float)
    vals = set(np.unique(raw).tolist())
    if vals <= {0.0, 1.0}:
        return np.where(raw > 0, 1, -1)
    if vals <= {-1.0, 1.0}:
        return raw.astype(int)
    raise InputError(f"labels must be 0/1 or -1/+1, found {sorted(vals)[:5]}")


def read_csv(path, label: str = "label", delimiter: str = ",") -> LabeledDataset:
    rows, labels = [], []
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from None
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label not in header:
            raise InputError(f"{path}: no label column {label!r} in header")
        li = header.index(label)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as e:
                raise InputError(f"{path}:{lineno}: {e}") from None
            labels.append(vals.pop(li))
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows), map_labels(labels))


def read_libsvm(path, n_features: int | None = None, zero_based: bool = False) -> LabeledDataset:
    """Sparse ``label idx:value ...`` rows; indices are 1-based unless ``zero_based``."""
    labels, entries = [], []
    width = 0
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
            row = {}
            for tok in parts[1:]:
                i, v = tok.split(":")
                i = int(i) - (0 if zero_based else 1)
                if i < 0:
                    raise ValueError(f"bad feature index in {tok!r}")
                row[i] = float(v)
                width = max(width, i + 1)
        except ValueError as e:
            raise InputError(f"{path}:{lineno}: {e}") from None
        entries.append(row)
    if not entries:
        raise InputError(f"{path}: no data rows")
    d = width if n_features is None else n_features
    if width > d:
        raise InputError(f"{path}: feature index {width - 1} exceeds n_features={d}")
    X = np.zeros((len(entries), d))
    for r, row in enumerate(entries):
        for i, v in row.items():
            X[r, i] = v
    return LabeledDataset(X, map_labels(labels))


def load_dataset(path, fmt: str | None = None, label: str = "label",
                 n_features: int | None = None) -> LabeledDataset:
    """Read ``path``; ``fmt`` is ``csv`` or ``libsvm`` (guessed from the suffix)."""
    if fmt is None:
        suffix = Path(path).suffix.lower()
        fmt = "csv" if suffix in (".csv", ".tsv", ".txt") else "libsvm"
        if suffix == ".txt" and _looks_sparse(path):
            fmt = "libsvm"
    if fmt == "csv":
        delim = "\t" if str(path).endswith(".tsv") else ","
        return read_csv(path, label, delim)
    if fmt == "libsvm":
        return read_libsvm(path, n_features)
    raise InputError(f"unknown dataset format {fmt!r}")


def _looks_sparse(path) -> bool:
    try:
        with open(path) as fh:
            first = fh.readline()
    except OSError:
        return False
    return ":" in first


def write_csv(ds: LabeledDataset, path, label: str = "label") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{i}" for i in range(ds.n_features)] + [label])
        for row, lab in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def stratified_split(ds: LabeledDataset, fractions=(0.55, 0.15, 0.30), seed: int = 0):
    """Split into parts with the given fractions, preserving class ratios."""
    fr = np.asarray(fractions, dtype=float)
    if np.any(fr < 0) or not np.isclose(fr.sum(), 1.0):
        raise InputError("split fractions must be non-negative and sum to 1")
    rng = np.random.default_rng(seed)
    parts = [[] for _ in fr]
    for cls in (-1, 1):
        idx = np.flatnonzero(ds.y == cls)
        rng.shuffle(idx)
        cuts = np.round(np.cumsum(fr)[:-1] * len(idx)).astype(int)
        for j, chunk in enumerate(np.split(idx, cuts)):
            parts[j].extend(chunk.tolist())
    return [ds.subset(np.sort(np.array(p, dtype=int))) for p in parts]
