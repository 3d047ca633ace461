"""Sample containers, file loaders and synthetic toy generators."""

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple, Union

import numpy as np

from .exceptions import ParseError, ValidationError

TOY_KINDS = ("two_moons", "gaussian_supervised", "gaussian_da")


def _freeze(arr):
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def _check_features(features):
    if features.ndim != 2:
        raise ValidationError(f"features must be a 2-d array, got shape {features.shape}")
    if features.shape[0] == 0:
        raise ValidationError("sample is empty")
    if features.shape[1] == 0:
        raise ValidationError("features have zero dimension")
    if not np.all(np.isfinite(features)):
        raise ValidationError("features contain non-finite values")
    norms = np.linalg.norm(features, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValidationError(f"zero-norm feature vector at row {int(zero[0])}")
    return norms


@dataclass(frozen=True, eq=False)
class UnlabeledSample:
    features: np.ndarray

    def __post_init__(self):
        feats = _freeze(self.features)
        norms = _check_features(feats)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "_norms", _freeze(norms))

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def norms(self) -> np.ndarray:
        return self._norms

    @cached_property
    def normalized(self) -> np.ndarray:
        """Rows divided by their euclidean norm."""
        return _freeze(self.features / self._norms[:, None])

    def __len__(self):
        return self.size

    def subset(self, indices) -> "UnlabeledSample":
        return UnlabeledSample(self.features[np.asarray(indices, dtype=int)])


@dataclass(frozen=True, eq=False)
class LabeledSample(UnlabeledSample):
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        super().__post_init__()
        if self.labels is None:
            raise ValidationError("labels are required")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != self.features.shape[0]:
            raise ValidationError("labels must be a vector with one entry per example")
        if not np.all(np.isin(labels, (-1, 1))):
            bad = labels[~np.isin(labels, (-1, 1))][0]
            raise ValidationError(f"labels must be -1 or +1, found {bad!r}")
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def unlabeled(self) -> UnlabeledSample:
        return UnlabeledSample(self.features)

    def subset(self, indices) -> "LabeledSample":
        idx = np.asarray(indices, dtype=int)
        return LabeledSample(self.features[idx], self.labels[idx])


Sample = Union[LabeledSample, UnlabeledSample]


# --------------------------------------------------------------------------
# File ingestion


def _read_text(path):
    # newline="" keeps "\r" so CRLF files parse identically after splitlines
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return fh.read()


def load_svmlight(path) -> LabeledSample:
    """Read ``label idx:val ...`` lines (1-based indices) into a dense sample.

    Labels > 0 map to +1, labels <= 0 to -1. Blank lines and ``#`` comments
    are skipped.
    """
    rows = []
    labels = []
    max_index = 0
    for lineno, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"invalid label {tokens[0]!r}", lineno) from None
        entries = {}
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"malformed feature {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"feature index must be >= 1, got {idx}", lineno)
            if idx <= prev:
                raise ParseError(f"feature indices must be ascending ({idx} after {prev})", lineno)
            if not np.isfinite(val):
                raise ParseError(f"non-finite feature value {tok!r}", lineno)
            prev = idx
            entries[idx] = val
        if not any(v != 0.0 for v in entries.values()):
            raise ValidationError(f"line {lineno}: zero-norm feature vector")
        max_index = max(max_index, prev)
        rows.append(entries)
        labels.append(1 if label > 0 else -1)
    if not rows:
        raise ValidationError(f"{path}: no examples")
    X = np.zeros((len(rows), max_index))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    return LabeledSample(X, np.array(labels))


def load_csv(path, label_column: Optional[str] = None) -> Sample:
    """Read a numeric CSV with a header row.

    With ``label_column`` the named column becomes ±1 labels and the rest are
    features; otherwise every column is a feature.
    """
    reader = csv.reader(io.StringIO(_read_text(path)))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValidationError(f"{path}: empty CSV") from None
    if label_column is not None and label_column not in header:
        raise ValidationError(f"{path}: no column named {label_column!r}")
    label_pos = header.index(label_column) if label_column is not None else None
    values = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValidationError(
                f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
        try:
            values.append([float(c) for c in row])
        except ValueError:
            raise ValidationError(f"{path}: line {lineno} has a non-numeric cell") from None
    if not values:
        raise ValidationError(f"{path}: no data rows")
    table = np.array(values)
    if label_pos is None:
        return UnlabeledSample(table)
    raw_labels = table[:, label_pos]
    if not np.all(np.isin(raw_labels, (-1.0, 1.0))):
        raise ValidationError(f"{path}: labels must be -1 or +1")
    feats = np.delete(table, label_pos, axis=1)
    return LabeledSample(feats, raw_labels.astype(np.int64))


def write_csv(path, sample: Sample, label_column: str = "label"):
    """Write ``sample`` with header x1..xd (+ label column); 17 significant digits."""
    d = sample.dim
    header = [f"x{j + 1}" for j in range(d)]
    labeled = isinstance(sample, LabeledSample)
    if labeled:
        header.append(label_column)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(sample.size):
            cells = [f"{v:.17g}" for v in sample.features[i]]
            if labeled:
                cells.append(str(int(sample.labels[i])))
            fh.write(",".join(cells) + "\n")


# --------------------------------------------------------------------------
# Toy generators


@dataclass(frozen=True)
class ToySpec:
    kind: str
    n_per_class: int = 100
    noise_sigma: float = 0.1
    rotation_deg: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TOY_KINDS:
            raise ValidationError(f"unknown toy kind {self.kind!r}; expected one of {TOY_KINDS}")
        if int(self.n_per_class) != self.n_per_class or self.n_per_class < 1:
            raise ValidationError("n_per_class must be a positive integer")
        if not self.noise_sigma >= 0:
            raise ValidationError("noise_sigma must be >= 0")


def _gaussian_classes(rng, n, mean_pos, mean_neg):
    pos = rng.standard_normal((n, 2)) + np.asarray(mean_pos, dtype=float)
    neg = rng.standard_normal((n, 2)) + np.asarray(mean_neg, dtype=float)
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(n, dtype=np.int64), -np.ones(n, dtype=np.int64)])
    return X, y


def _moons(rng, n, sigma):
    t_up = rng.uniform(0.0, np.pi, n)
    t_low = rng.uniform(0.0, np.pi, n)
    upper = np.column_stack([np.cos(t_up), np.sin(t_up)])
    lower = np.column_stack([1.0 - np.cos(t_low), 0.5 - np.sin(t_low)])
    X = np.vstack([upper, lower])
    if sigma > 0:
        X = X + sigma * rng.standard_normal(X.shape)
    y = np.concatenate([np.ones(n, dtype=np.int64), -np.ones(n, dtype=np.int64)])
    return X, y


def rotation_matrix(degrees: float) -> np.ndarray:
    t = np.deg2rad(degrees)
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


def gen_toy(spec: ToySpec) -> Tuple[LabeledSample, LabeledSample]:
    """Draw a (source, target) pair for one of the toy problems.

    Target labels are kept so experiments can score the adapted classifier;
    learners only ever receive ``target.unlabeled()``.
    """
    rng = np.random.default_rng(spec.seed)
    n = int(spec.n_per_class)
    if spec.kind == "gaussian_supervised":
        X, y = _gaussian_classes(rng, n, (-1, -1), (-1, 1))
        src = LabeledSample(X, y)
        return src, LabeledSample(X, y)
    if spec.kind == "gaussian_da":
        Xs, ys = _gaussian_classes(rng, n, (-1, -1), (-1, 1))
        Xt, yt = _gaussian_classes(rng, n, (-1, -1), (1, 1))
        return LabeledSample(Xs, ys), LabeledSample(Xt, yt)
    Xs, ys = _moons(rng, n, spec.noise_sigma)
    Xt, yt = _moons(rng, n, spec.noise_sigma)
    Xt = Xt @ rotation_matrix(spec.rotation_deg).T
    return LabeledSample(Xs, ys), LabeledSample(Xt, yt)


def gaussian_da_holdout(n_per_class: int, seed: int) -> LabeledSample:
    """Fresh labeled draw from the gaussian_da target distribution."""
    rng = np.random.default_rng(seed)
    X, y = _gaussian_classes(rng, n_per_class, (-1, -1), (1, 1))
    return LabeledSample(X, y)


# --------------------------------------------------------------------------
# Folds


def kfold_split(sample_or_size, k: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold partition; returns (train_indices, test_indices) pairs."""
    m = sample_or_size if isinstance(sample_or_size, (int, np.integer)) else len(sample_or_size)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > m:
        raise ValueError(f"k={k} exceeds sample size {m}")
    perm = np.random.default_rng(seed).permutation(m)
    folds = np.array_split(perm, k)
    out = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(test)))
    return out
