"""Datasets, file loaders, one-class splits and feature scaling.

Labels are stored as a boolean array where ``True`` marks the target
(in-class) samples and ``False`` marks outliers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    DimensionMismatch,
    DomainError,
    EmptyDataset,
    IndexOrderError,
    NoTargetSamples,
    ParseError,
)

SCALER_MODES = ("minmax", "zscore", "none")


def as_samples(X, name="X") -> np.ndarray:
    """Validate a sample matrix: 2-D, float64, finite, at least one row."""
    return check_array(
        X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True, input_name=name
    )


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 stream for ``seed``, split by integer ``keys``.

    ``derive_rng(s)`` and ``derive_rng(s, k)`` never share state, so module
    level randomness (splits, noise, probes) can be derived from the single
    user-facing seed without coupling.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = ""
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyDataset("a dataset needs at least one sample")
        if X.shape[1] == 0:
            raise DimensionMismatch("samples must have at least one feature")
        if not np.all(np.isfinite(X)):
            raise ParseError("non-finite feature value")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            y = np.array(self.labels, dtype=bool, copy=True)
            if y.shape != (X.shape[0],):
                raise DimensionMismatch(
                    f"{y.size} labels for {X.shape[0]} samples"
                )
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)
        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != X.shape[1]:
                raise DimensionMismatch(
                    f"{len(names)} feature names for {X.shape[1]} features"
                )
            object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def subset(self, index, name=None) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.X[index],
            None if self.labels is None else self.labels[index],
            self.name if name is None else name,
            self.feature_names,
        )

    def replace_X(self, X) -> "Dataset":
        return Dataset(X, self.labels, self.name, self.feature_names)

    def targets(self) -> "Dataset":
        if self.labels is None:
            return self
        idx = np.flatnonzero(self.labels)
        if idx.size == 0:
            raise NoTargetSamples(f"dataset {self.name!r} has no target samples")
        return self.subset(idx)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None
            and other.labels is not None
            and np.array_equal(self.labels, other.labels)
        )
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and same_labels
            and self.feature_names == other.feature_names
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _parse_float(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", row, column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", row, column)
    return value


def load_csv(
    path,
    label_column=None,
    target_label="1",
    header=True,
    delimiter=",",
    name=None,
) -> Dataset:
    """Load a dense numeric CSV file.

    Parameters
    ----------
    path : path-like
    label_column : str or int, optional
        Column holding class labels, by header name or 0-based position.
    target_label : str
        Label text marking the target class; every other label is an outlier.
        Numeric labels compare numerically, so ``"1"`` matches ``"1.0"``.
    header : bool
        Whether the first row holds column names.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    first_data_row = 1
    names = None
    if header and rows:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_data_row = 2
    if not rows:
        raise EmptyDataset(f"{path} contains no samples")
    width = len(names) if names is not None else len(rows[0])

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, int) or (
            isinstance(label_column, str) and label_column.lstrip("-").isdigit() and (names is None or label_column not in names)
        ):
            label_idx = int(label_column) % width
        elif names is not None and label_column in names:
            label_idx = names.index(label_column)
        else:
            raise ParseError(f"label column {label_column!r} not found in header")

    X = np.empty((len(rows), width - (label_idx is not None)), dtype=np.float64)
    raw_labels = []
    for i, row in enumerate(rows):
        line = i + first_data_row
        if len(row) != width:
            raise DimensionMismatch(
                f"row {line} has {len(row)} fields, expected {width}"
            )
        k = 0
        for j, cell in enumerate(row):
            if j == label_idx:
                raw_labels.append(cell.strip())
                continue
            X[i, k] = _parse_float(cell.strip(), line, j + 1)
            k += 1

    labels = None
    if label_idx is not None:
        labels = np.array([_label_matches(v, target_label) for v in raw_labels])
    feature_names = None
    if names is not None:
        feature_names = [n for j, n in enumerate(names) if j != label_idx]
    return Dataset(X, labels, name or path.stem, feature_names)


def _label_matches(value: str, target: str) -> bool:
    if value == target:
        return True
    try:
        return float(value) == float(target)
    except ValueError:
        return False


def save_csv(ds: Dataset, path, label_column="class", target_label="1", outlier_label="0"):
    """Write ``ds`` as CSV with a header row; floats use shortest round-trip text."""
    path = Path(path)
    names = list(ds.feature_names) if ds.feature_names else [f"x{j}" for j in range(ds.n_features)]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + ([label_column] if ds.has_labels else []))
        for i in range(ds.n_samples):
            row = [repr(float(v)) for v in ds.X[i]]
            if ds.has_labels:
                row.append(target_label if ds.labels[i] else outlier_label)
            writer.writerow(row)


def load_libsvm(path, target_label="1", name=None) -> Dataset:
    """Load sparse ``label idx:val ...`` text into a dense dataset.

    Indices are 1-based and must increase strictly within a line. Missing
    entries are zero; the dimension is the largest index in the file.
    """
    path = Path(path)
    entries = []
    raw_labels = []
    dim = 0
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            # U+2212 minus sign shows up in copy-pasted files
            raw_labels.append(tokens[0].replace("−", "-"))
            row = {}
            last = 0
            for col, tok in enumerate(tokens[1:], start=2):
                if ":" not in tok:
                    raise ParseError(f"expected idx:val, got {tok!r}", line_no, col)
                idx_text, val_text = tok.split(":", 1)
                try:
                    idx = int(idx_text)
                except ValueError:
                    raise ParseError(f"bad feature index {idx_text!r}", line_no, col) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} < 1", line_no, col)
                if idx <= last:
                    raise IndexOrderError(
                        f"index {idx} does not increase after {last}", line_no, col
                    )
                last = idx
                row[idx - 1] = _parse_float(val_text, line_no, col)
            dim = max(dim, last)
            entries.append(row)
    if not entries:
        raise EmptyDataset(f"{path} contains no samples")
    if dim == 0:
        raise DimensionMismatch(f"{path} has no feature entries")
    X = np.zeros((len(entries), dim))
    for i, row in enumerate(entries):
        for j, v in row.items():
            X[i, j] = v
    labels = np.array([_label_matches(v, target_label) for v in raw_labels])
    return Dataset(X, labels, name or path.stem)


def load_dataset(path, **kwargs) -> Dataset:
    """Dispatch on suffix: ``.libsvm``/``.svm``/``.txt`` sparse, anything else CSV."""
    path = Path(path)
    if path.suffix.lower() in (".libsvm", ".svm", ".txt"):
        kwargs = {k: v for k, v in kwargs.items() if k in ("target_label", "name")}
        return load_libsvm(path, **kwargs)
    return load_csv(path, **kwargs)


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    target_train_fraction: float = 0.8
    seed: int = 42
    test_includes_train: bool = False

    def __post_init__(self):
        if not (0.0 < self.target_train_fraction <= 1.0):
            raise DomainError("target_train_fraction must lie in (0, 1]")
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")


def n_train_targets(n_target: int, fraction: float) -> int:
    # round half up; reproduces 77 -> 62 and 147 -> 118 in the UCI table
    return max(1, min(n_target, int(math.floor(fraction * n_target + 0.5))))


def split_one_class(ds: Dataset, spec: SplitSpec = SplitSpec()):
    """Split into a target-only training set and a mixed test set.

    Returns ``(train, test)``. The test set always holds every outlier plus
    the held-out targets; with ``spec.test_includes_train`` it also repeats
    the training targets.
    """
    if ds.labels is None:
        raise NoTargetSamples("split_one_class needs labelled data")
    target_idx = np.flatnonzero(ds.labels)
    if target_idx.size == 0:
        raise NoTargetSamples(f"dataset {ds.name!r} has no target samples")
    outlier_idx = np.flatnonzero(~ds.labels)
    rng = derive_rng(spec.seed, 0)
    perm = rng.permutation(target_idx)
    n_train = n_train_targets(target_idx.size, spec.target_train_fraction)
    train_idx = np.sort(perm[:n_train])
    held = perm if spec.test_includes_train else perm[n_train:]
    test_idx = np.concatenate([np.sort(held), outlier_idx])
    return ds.subset(train_idx, f"{ds.name}:train"), ds.subset(test_idx, f"{ds.name}:test")


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalerParams:
    mode: str
    offset: np.ndarray = field(default=None)
    scale: np.ndarray = field(default=None)
    constant: np.ndarray = field(default=None)

    def to_dict(self):
        return {
            "mode": self.mode,
            "offset": None if self.offset is None else self.offset.tolist(),
            "scale": None if self.scale is None else self.scale.tolist(),
            "constant": None if self.constant is None else self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        def arr(v, dtype=np.float64):
            return None if v is None else np.asarray(v, dtype=dtype)

        return cls(d["mode"], arr(d.get("offset")), arr(d.get("scale")), arr(d.get("constant"), bool))


def fit_scaler(data, mode="minmax") -> ScalerParams:
    """Per-feature scaling parameters from training data.

    ``minmax`` stores (min, max - min), ``zscore`` stores (mean, std).
    Constant features are flagged and map to 0.
    """
    if mode not in SCALER_MODES:
        raise DomainError(f"unknown scaler mode {mode!r}; expected one of {SCALER_MODES}")
    if mode == "none":
        return ScalerParams("none")
    X = data.X if isinstance(data, Dataset) else as_samples(data)
    if mode == "minmax":
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        constant = span <= 0
    else:
        lo = X.mean(axis=0)
        span = X.std(axis=0)
        constant = span <= 1e-12 * np.maximum(1.0, np.abs(lo))
    span = np.where(constant, 1.0, span)
    return ScalerParams(mode, lo, span, constant)


def apply_scaler(data, params: ScalerParams):
    """Apply fitted parameters; returns the same container type it was given."""
    X = data.X if isinstance(data, Dataset) else as_samples(data)
    if params.mode == "none":
        out = X.copy()
    else:
        if X.shape[1] != params.offset.shape[0]:
            raise DimensionMismatch(
                f"scaler fitted on {params.offset.shape[0]} features, got {X.shape[1]}"
            )
        out = (X - params.offset) / params.scale
        out[:, params.constant] = 0.0
    return data.replace_X(out) if isinstance(data, Dataset) else out


class FeatureScaler(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`fit_scaler` / :func:`apply_scaler`."""

    def __init__(self, mode="minmax"):
        self.mode = mode

    def fit(self, X, y=None):
        X = as_samples(X)
        self.params_ = fit_scaler(X, self.mode)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return apply_scaler(as_samples(X), self.params_)


def dataset_from_arrays(X, labels: Optional[Sequence] = None, name="") -> Dataset:
    return Dataset(as_samples(X), labels, name)
