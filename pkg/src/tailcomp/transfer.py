"""Training-free knowledge transfer from common-class classifiers to rare classes.

For each class ``i`` a query (its normalized prototype, by default) attends
over the normalized classifier weights of the *eligible* classes, those with
more than ``k`` training samples. The attention-weighted combination is the
class's transfer vector; adding it to the normalized prototype and classifier
weight gives the hybrid classifier column, or to the prototype alone for the
continual classifier that needs no trained weight for class ``i``::

    alpha_i = softmax(tau * <p_i/|p_i|, w_j/|w_j|>)   over j with n_j > k
    kt_i    = sum_j alpha_ij * w_j/|w_j|
    hybrid_i    = kt_i/|kt_i| + p_i/|p_i| + w_i/|w_i|
    continual_i = kt_i/|kt_i| + p_i/|p_i|
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import EPS, HeadKind, normalize_columns, predict, softmax
from .data import head_to_bytes, read_head
from .errors import (
    AbsentClass,
    AbsentPrototype,
    ConfigInvalid,
    DimensionMismatch,
    EmptyEligibleSet,
    EmptyEnsemble,
    FormatError,
    ZeroVectorError,
)


class Direction(enum.Enum):
    """Query/value roles: ``P2W`` means prototype queries over classifier values."""

    P2W = "p2w"
    W2P = "w2p"
    W2W = "w2w"
    P2P = "p2p"

    @property
    def query_source(self):
        return self.value[0]

    @property
    def value_source(self):
        return self.value[2]


class Mode(enum.Enum):
    HYBRID = "hybrid"
    CONTINUAL = "continual"


DEFAULT_K_VALUES = (0, 20, 100)


@dataclass(frozen=True)
class TransferConfig:
    tau: float = 10.0
    k_values: tuple = DEFAULT_K_VALUES
    direction: Direction = Direction.P2W
    mode: Mode = Mode.HYBRID
    exclude_self: bool = False

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if not self.tau > 0:
            raise ConfigInvalid("tau must be > 0")
        ks = self.k_values
        if not ks:
            raise ConfigInvalid("k_values must be non-empty")
        if ks[0] < 0 or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigInvalid(f"k_values must be non-negative and strictly increasing, got {ks}")


def eligible_set(counts, k):
    """Indices of classes with strictly more than ``k`` training samples."""
    idx = np.flatnonzero(np.asarray(counts) > k)
    if idx.size == 0:
        raise EmptyEligibleSet(f"no class has more than {k} training samples")
    return idx


def attention_weights(query, keys, tau):
    """Softmax over ``tau``-scaled cosine similarities; ``keys`` holds one key per column."""
    keys = np.asarray(keys, dtype=np.float64)
    if keys.ndim == 1:
        keys = keys[:, None]
    q = np.asarray(query, dtype=np.float64)
    qn = np.linalg.norm(q)
    if not qn > EPS:
        raise ZeroVectorError("zero-norm attention query")
    return softmax(tau * ((q / qn) @ normalize_columns(keys)))


def _source(which, protos, head):
    if which == "p":
        return protos.prototypes, protos.present
    if head is None:
        return None, np.zeros(protos.num_classes, bool)
    return head.weights, head.present


def _queries(direction, protos, head, classes):
    mat, present = _source(direction.query_source, protos, head)
    missing = [int(c) for c in classes if not present[c]]
    if missing:
        err = AbsentPrototype if direction.query_source == "p" else AbsentClass
        raise err(f"class(es) {missing} have no {direction.query_source} query representation")
    return normalize_columns(mat[:, classes])


def transfer_matrix(protos, head, counts, k, cfg=TransferConfig(), classes=None):
    """Transfer vectors for ``classes`` (default all) as the columns of an ``(F, len(classes))`` array.

    Value sources without a representation (absent prototype, untrained head
    column) are never eligible, whatever their count.
    """
    n = protos.num_classes
    classes = np.arange(n) if classes is None else np.asarray(classes, dtype=np.int64)
    counts = np.asarray(counts)
    if counts.shape != (n,):
        raise DimensionMismatch("counts length must equal the number of classes")
    if head is not None and (head.num_classes != n or head.dim != protos.dim):
        raise DimensionMismatch("head and prototypes disagree on shape")
    vals, vpresent = _source(cfg.direction.value_source, protos, head)
    elig = eligible_set(np.where(vpresent, counts, -1), k)
    vn = normalize_columns(vals[:, elig])
    qn = _queries(cfg.direction, protos, head, classes)
    scores = cfg.tau * (qn.T @ vn)
    if cfg.exclude_self:
        scores[classes[:, None] == elig[None, :]] = -np.inf
        empty = np.isneginf(scores).all(axis=1)
        if empty.any():
            raise EmptyEligibleSet(f"class(es) {classes[empty].tolist()} have no eligible donor but themselves")
    alpha = softmax(scores)
    return vn @ alpha.T


def kt_vector(i, protos, head, counts, k, cfg=TransferConfig()):
    return transfer_matrix(protos, head, counts, k, cfg, classes=[i])[:, 0]


@dataclass(frozen=True, eq=False)
class HybridClassifier:
    weights: np.ndarray
    k: int
    tau: float
    direction: Direction
    mode: Mode
    scale: float

    @property
    def num_classes(self):
        return self.weights.shape[1]

    @property
    def kind(self):
        return HeadKind.HYBRID if self.mode is Mode.HYBRID else HeadKind.CONTINUAL

    def predict_proba(self, x):
        return predict(self.weights, self.scale, x)

    def metadata(self):
        return {
            "k": int(self.k),
            "tau": float(self.tau),
            "direction": self.direction.value,
            "mode": self.mode.value,
            "scale": float(self.scale),
        }


def build_hybrid(protos, head, counts, k, cfg=TransferConfig()):
    """Columns ``kt/|kt| + p/|p| + w/|w|``; every class needs a prototype and a classifier weight."""
    if not protos.present.all():
        raise AbsentPrototype(f"missing prototypes {np.flatnonzero(~protos.present).tolist()}")
    if not head.present.all():
        raise AbsentClass(f"missing classifier weights {np.flatnonzero(~head.present).tolist()}")
    kt = transfer_matrix(protos, head, counts, k, cfg)
    w = normalize_columns(kt) + normalize_columns(protos.prototypes) + normalize_columns(head.weights)
    return HybridClassifier(w, int(k), cfg.tau, cfg.direction, Mode.HYBRID, head.scale)


def build_continual(protos, head, counts, k, cfg=TransferConfig(), scale=None):
    """Columns ``kt/|kt| + p/|p|``; classes the head never saw only need a prototype.

    ``head`` may be None for prototype-only directions, in which case ``scale``
    must be given.
    """
    if not protos.present.all():
        raise AbsentPrototype(f"missing prototypes {np.flatnonzero(~protos.present).tolist()}")
    if scale is None:
        if head is None:
            raise ValueError("scale is required when no head is given")
        scale = head.scale
    kt = transfer_matrix(protos, head, counts, k, cfg)
    w = normalize_columns(kt) + normalize_columns(protos.prototypes)
    return HybridClassifier(w, int(k), cfg.tau, cfg.direction, Mode.CONTINUAL, float(scale))


def build_all(protos, head, counts, cfg=TransferConfig()):
    """One classifier per ``cfg.k_values`` in ``cfg.mode``."""
    build = build_hybrid if cfg.mode is Mode.HYBRID else build_continual
    return [build(protos, head, counts, k, cfg) for k in cfg.k_values]


def prototype_plus_classifier(protos, head):
    """Plain ``p/|p| + w/|w|`` combination with no transfer term."""
    w = normalize_columns(protos.prototypes) + normalize_columns(head.weights)
    return WeightClassifier(w, head.scale)


@dataclass(frozen=True, eq=False)
class WeightClassifier:
    """A bare cosine classifier over an arbitrary weight matrix."""

    weights: np.ndarray
    scale: float

    @property
    def num_classes(self):
        return self.weights.shape[1]

    def predict_proba(self, x):
        return predict(self.weights, self.scale, x)


def _as_member(m):
    if hasattr(m, "predict_proba"):
        return m
    weights, scale = m
    return WeightClassifier(np.asarray(weights, dtype=np.float64), float(scale))


@dataclass(eq=False)
class Ensemble:
    """Arithmetic mean of member softmax outputs."""

    members: list = field(default_factory=list)

    def __post_init__(self):
        self.members = [_as_member(m) for m in self.members]
        if not self.members:
            raise EmptyEnsemble("ensemble needs at least one member")
        sizes = {m.num_classes for m in self.members}
        if len(sizes) != 1:
            raise DimensionMismatch(f"members disagree on number of classes: {sorted(sizes)}")

    @property
    def num_classes(self):
        return self.members[0].num_classes

    def predict_proba(self, x):
        probs = [m.predict_proba(x) for m in self.members]
        return np.mean(np.stack(probs), axis=0)


def ensemble_predict(classifiers, f):
    return Ensemble(list(classifiers)).predict_proba(f)


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def save_hybrid(path, clf):
    path = Path(path)
    path.write_bytes(head_to_bytes(clf.kind, clf.weights, clf.scale))
    sidecar_path(path).write_text(json.dumps(clf.metadata(), indent=2, sort_keys=True) + "\n")


def load_hybrid(path):
    rec = read_head(path)
    if rec.kind not in (HeadKind.HYBRID, HeadKind.CONTINUAL):
        raise FormatError(f"{path}: kind {rec.kind.name} is not a transfer classifier")
    meta = json.loads(sidecar_path(path).read_text())
    return HybridClassifier(
        rec.weights, int(meta["k"]), float(meta["tau"]), Direction(meta["direction"]),
        Mode(meta["mode"]), rec.scale,
    )
