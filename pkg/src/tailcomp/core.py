"""Domain types and the normalized vector algebra shared by every module.

Matrices follow the column convention used throughout: classifier weights and
prototypes are ``(F, N)`` arrays whose column ``i`` belongs to class ``i``;
features are ``(M, F)`` arrays with one sample per row. All arithmetic is
float64.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import AbsentClass, DimensionMismatch, ZeroVectorError

EPS = 1e-12


class ClassGroup(enum.Enum):
    MANY = "many"
    MEDIUM = "medium"
    FEW = "few"


@dataclass(frozen=True)
class GroupThresholds:
    """Class-group boundaries: many-shot iff ``n >= many``, few-shot iff ``n <= few``."""

    many: int = 100
    few: int = 20

    def __post_init__(self):
        if self.few >= self.many:
            raise ValueError("few-shot threshold must be below the many-shot threshold")


DEFAULT_THRESHOLDS = GroupThresholds()


class HeadKind(enum.IntEnum):
    # values double as the HEAD file kind byte
    COSINE = 0
    DOT = 1
    PROTOTYPE = 2
    HYBRID = 3
    CONTINUAL = 4


class Source(enum.Enum):
    TRAIN = "train"
    VALIDATION = "val"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def l2_normalize(v):
    """Return ``v / ||v||``; raises :class:`ZeroVectorError` for ``||v|| <= EPS``."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if not norm > EPS:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm:g}")
    return v / norm


def normalize_rows(x):
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if x.size and not np.all(norms > EPS):
        raise ZeroVectorError("zero-norm row")
    return x / norms


def normalize_columns(w):
    w = np.asarray(w, dtype=np.float64)
    norms = np.linalg.norm(w, axis=0, keepdims=True)
    if w.size and not np.all(norms > EPS):
        bad = np.flatnonzero(~(norms[0] > EPS))
        raise ZeroVectorError(f"zero-norm column(s) {bad.tolist()}")
    return w / norms


def column_present(w):
    """Boolean mask of columns with non-degenerate norm."""
    return np.linalg.norm(np.asarray(w, dtype=np.float64), axis=0) > EPS


def cosine_score(f, w, s):
    return float(s) * float(l2_normalize(f) @ l2_normalize(w))


def softmax(z):
    """Row-wise softmax; ``-inf`` entries get exactly zero probability."""
    z = np.asarray(z, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def logits(weights, scale, f, kind=HeadKind.COSINE, present=None):
    """Class scores for one feature vector or a batch of row vectors.

    Cosine-like kinds score ``scale * cos(f, w_i)``; ``HeadKind.DOT`` scores the
    raw inner product. Columns outside ``present`` score ``-inf``.
    """
    w = np.asarray(weights, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    single = f.ndim == 1
    x = f[None, :] if single else f
    if x.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"feature dim {x.shape[1]} != weight dim {w.shape[0]}")
    if present is None:
        cols = slice(None)
    else:
        cols = np.asarray(present, dtype=bool)
        if not cols.any():
            raise AbsentClass("no class has a representation")
    if kind == HeadKind.DOT:
        sub = x @ w[:, cols]
    else:
        sub = float(scale) * (normalize_rows(x) @ normalize_columns(w[:, cols]))
    if present is None:
        z = sub
    else:
        z = np.full((x.shape[0], w.shape[1]), -np.inf)
        z[:, cols] = sub
    return z[0] if single else z


def predict(weights, scale, f, kind=HeadKind.COSINE, present=None):
    """Softmax class probabilities; see :func:`logits`."""
    return softmax(logits(weights, scale, f, kind, present))


def class_group(n, thresholds=DEFAULT_THRESHOLDS):
    if n >= thresholds.many:
        return ClassGroup.MANY
    if n <= thresholds.few:
        return ClassGroup.FEW
    return ClassGroup.MEDIUM


def class_groups(counts, thresholds=DEFAULT_THRESHOLDS):
    return [class_group(int(n), thresholds) for n in counts]


@dataclass(frozen=True, eq=False)
class EmbeddingDataset:
    """Labeled embedding vectors.

    ``train_counts`` defaults to the per-class label histogram. Evaluation
    splits never carry authoritative counts; pass the training split's counts
    wherever class groups matter.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    train_counts: np.ndarray = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2:
            raise ValueError("features must be an (M, F) matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise DimensionMismatch("labels length must equal feature row count")
        if features.shape[1] < 1 or self.num_classes < 1:
            raise ValueError("dim and num_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("label out of range")
        if features.size and not np.all(np.linalg.norm(features, axis=1) > EPS):
            raise ZeroVectorError("dataset contains a zero feature row")
        counts = self.train_counts
        if counts is None:
            counts = np.bincount(labels.astype(np.int64), minlength=self.num_classes)
        counts = np.asarray(counts)
        if counts.shape != (self.num_classes,) or (counts < 0).any():
            raise ValueError("train_counts must be N non-negative integers")
        object.__setattr__(self, "features", _frozen(features, np.float64))
        object.__setattr__(self, "labels", _frozen(labels, np.int64))
        object.__setattr__(self, "train_counts", _frozen(counts, np.int64))
        object.__setattr__(self, "num_classes", int(self.num_classes))

    @property
    def dim(self):
        return self.features.shape[1]

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, mask):
        """Rows selected by ``mask``; counts are recomputed from the kept labels."""
        mask = np.asarray(mask)
        return EmbeddingDataset(self.features[mask], self.labels[mask], self.num_classes)


@dataclass(frozen=True, eq=False)
class ClassifierHead:
    """Weight matrix ``(F, N)`` plus scale. All-zero columns mark classes the head never saw."""

    weights: np.ndarray
    scale: float = 16.0
    kind: HeadKind = HeadKind.COSINE

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("weights must be an (F, N) matrix")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "weights", _frozen(w, np.float64))
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "kind", HeadKind(self.kind))

    @property
    def dim(self):
        return self.weights.shape[0]

    @property
    def num_classes(self):
        return self.weights.shape[1]

    @property
    def present(self):
        return column_present(self.weights)

    def logits(self, x):
        return logits(self.weights, self.scale, x, self.kind, self.present)

    def predict_proba(self, x):
        return softmax(self.logits(x))


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """Raw (un-normalized) class means of unit features; absent classes hold zero columns."""

    prototypes: np.ndarray
    source: Source = Source.TRAIN
    present: np.ndarray = None

    def __post_init__(self):
        p = np.asarray(self.prototypes, dtype=np.float64)
        if p.ndim != 2:
            raise ValueError("prototypes must be an (F, N) matrix")
        present = column_present(p) if self.present is None else self.present
        object.__setattr__(self, "prototypes", _frozen(p, np.float64))
        object.__setattr__(self, "present", _frozen(present, bool))
        object.__setattr__(self, "source", Source(self.source))

    @property
    def dim(self):
        return self.prototypes.shape[0]

    @property
    def num_classes(self):
        return self.prototypes.shape[1]


@dataclass
class GroupReport:
    """Top-1 accuracies; a group with no evaluated samples reports ``None``."""

    acc_many: float | None
    acc_medium: float | None
    acc_few: float | None
    acc_total: float | None
    per_class_acc: np.ndarray
    counts: dict = field(default_factory=dict)

    def group_acc(self, group):
        return {
            ClassGroup.MANY: self.acc_many,
            ClassGroup.MEDIUM: self.acc_medium,
            ClassGroup.FEW: self.acc_few,
        }[ClassGroup(group)]

    def as_dict(self):
        return {
            "many": self.acc_many,
            "medium": self.acc_medium,
            "few": self.acc_few,
            "total": self.acc_total,
            "counts": dict(self.counts),
        }
