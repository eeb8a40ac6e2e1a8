"""Class prototypes: per-class means of unit-normalized embeddings."""
from __future__ import annotations

import numpy as np

from .core import HeadKind, PrototypeSet, Source, normalize_rows, predict
from .errors import AbsentClass


def compute_prototypes(dataset, source=Source.TRAIN):
    """Mean of the normalized features of each class, left un-normalized.

    Classes without samples in ``dataset`` get a zero column and are marked absent.
    """
    xn = normalize_rows(dataset.features)
    n = dataset.num_classes
    counts = np.bincount(dataset.labels, minlength=n)
    sums = np.zeros((n, dataset.dim))
    np.add.at(sums, dataset.labels, xn)
    present = counts > 0
    protos = np.zeros_like(sums)
    protos[present] = sums[present] / counts[present, None]
    return PrototypeSet(protos.T, source, present)


def prototype_predict(protos, scale, f, classes=None):
    """Cosine-classifier probabilities with prototypes in place of learned weights.

    ``classes`` restricts the candidate set; by default every class is a
    candidate and must be present.
    """
    candidates = np.ones(protos.num_classes, bool) if classes is None else _mask(classes, protos.num_classes)
    missing = candidates & ~protos.present
    if missing.any():
        raise AbsentClass(f"no prototype for class(es) {np.flatnonzero(missing).tolist()}")
    mask = None if candidates.all() else candidates
    return predict(protos.prototypes, scale, f, HeadKind.COSINE, mask)


def _mask(classes, n):
    classes = np.asarray(classes)
    if classes.dtype == bool:
        return classes
    m = np.zeros(n, bool)
    m[classes] = True
    return m


class PrototypeClassifier:
    """Adapter so a prototype set can be scored like any other classifier."""

    def __init__(self, protos, scale):
        self.protos = protos
        self.scale = float(scale)

    @property
    def num_classes(self):
        return self.protos.num_classes

    def predict_proba(self, x):
        return prototype_predict(self.protos, self.scale, x)
