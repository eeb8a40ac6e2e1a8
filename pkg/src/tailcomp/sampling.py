"""Class-rebalancing batch samplers for head training."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, EmptyDataset


class SamplerKind(enum.Enum):
    UNIFORM = "uniform"
    SQRT = "sqrt"
    CLASS_AWARE = "class-aware"


@dataclass(frozen=True)
class SamplerSpec:
    kind: SamplerKind = SamplerKind.SQRT
    samples_per_class: int = 4

    def __post_init__(self):
        object.__setattr__(self, "kind", SamplerKind(self.kind))
        if self.samples_per_class < 1:
            raise ConfigInvalid("samples_per_class must be >= 1")


def class_probabilities(kind, counts):
    """Per-class draw probabilities: proportional to ``n``, ``sqrt(n)``, or uniform over non-empty classes."""
    kind = SamplerKind(kind.kind if isinstance(kind, SamplerSpec) else kind)
    n = np.asarray(counts, dtype=np.float64)
    if n.size == 0 or n.sum() <= 0:
        raise EmptyDataset("no samples to draw from")
    if kind is SamplerKind.UNIFORM:
        weights = n
    elif kind is SamplerKind.SQRT:
        weights = np.sqrt(n)
    else:
        weights = (n > 0).astype(np.float64)
    return weights / weights.sum()


class BatchSampler:
    """Draws batches of sample indices from a labeled dataset.

    Uniform and square-root strategies draw each batch element's class i.i.d.
    then a sample within it. Class-aware draws a class uniformly and takes
    ``samples_per_class`` samples from it, repeating until the batch is full.
    Within-class draws are always with replacement.
    """

    def __init__(self, labels, num_classes, spec=SamplerSpec(), seed=0):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            raise EmptyDataset("cannot sample from an empty dataset")
        self.spec = spec if isinstance(spec, SamplerSpec) else SamplerSpec(spec)
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        counts = np.bincount(labels, minlength=num_classes)
        self.probs = class_probabilities(self.spec.kind, counts)
        order = np.argsort(labels, kind="stable")
        self._sorted = order
        self._starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        self._counts = counts

    def _within(self, classes):
        offs = np.floor(self.rng.random(classes.shape[0]) * self._counts[classes]).astype(np.int64)
        return self._sorted[self._starts[classes] + offs]

    def draw_classes(self, batch_size):
        if self.spec.kind is SamplerKind.CLASS_AWARE:
            per = self.spec.samples_per_class
            groups = -(-batch_size // per)
            picked = self.rng.choice(self.probs.size, size=groups, p=self.probs)
            return np.repeat(picked, per)[:batch_size]
        return self.rng.choice(self.probs.size, size=batch_size, p=self.probs)

    def next_batch(self, batch_size):
        if batch_size <= 0:
            return np.zeros(0, dtype=np.int64)
        return self._within(self.draw_classes(batch_size))
