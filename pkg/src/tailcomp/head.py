"""Classifier-head training on fixed embeddings.

The head is trained with mean cross-entropy, SGD with momentum, weight decay on
the raw weights and a cosine-decayed learning rate. Gradients are analytic;
for the cosine head they include the Jacobian of the column normalization.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ClassifierHead, HeadKind, normalize_columns, normalize_rows
from .errors import AbsentClass, ConfigInvalid, DivergedLoss, EmptyDataset
from .sampling import BatchSampler, SamplerSpec

log = logging.getLogger(__name__)

MIN_SCALE = 1e-3


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    scale_init: float = 16.0
    scale_learnable: bool = True
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    kind: HeadKind = HeadKind.COSINE
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ConfigInvalid("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigInvalid("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigInvalid("learning_rate must be > 0")
        if not self.scale_init > 0:
            raise ConfigInvalid("scale_init must be > 0")
        if not 0 <= self.momentum < 1:
            raise ConfigInvalid("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigInvalid("weight_decay must be >= 0")
        if HeadKind(self.kind) not in (HeadKind.COSINE, HeadKind.DOT):
            raise ConfigInvalid("only cosine and dot-product heads are trainable")
        return self


def forward_logits(head, f):
    return head.logits(f)


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def ce_loss_and_grads(head, x, y, scale_learnable=True):
    """Mean cross-entropy of ``head`` on a batch with its exact gradients.

    Returns ``(loss, grad_weights, grad_scale)``. ``grad_weights`` has the
    head's ``(F, N)`` shape, zero on absent columns, which also take no part in
    the softmax.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise EmptyDataset("empty batch")
    active = head.present
    idx = np.cumsum(active) - 1
    if not active[y].all():
        raise AbsentClass("batch label belongs to an absent head column")
    yc = idx[y]
    w = head.weights[:, active]
    b = y.shape[0]
    if head.kind == HeadKind.DOT:
        z = x @ w
    else:
        xn = normalize_rows(x)
        norms = np.linalg.norm(w, axis=0)
        wn = normalize_columns(w)
        cos = xn @ wn
        z = head.scale * cos
    logp = _log_softmax(z)
    rows = np.arange(b)
    loss = -logp[rows, yc].mean()
    g = np.exp(logp)
    g[rows, yc] -= 1.0
    g /= b
    if head.kind == HeadKind.DOT:
        gw = x.T @ g
        gs = 0.0
    else:
        g_wn = head.scale * (xn.T @ g)
        gw = (g_wn - wn * np.sum(wn * g_wn, axis=0)) / norms
        gs = float(np.sum(g * cos)) if scale_learnable else 0.0
    grad = np.zeros_like(head.weights)
    grad[:, active] = gw
    return float(loss), grad, gs


def init_head(dataset, cfg):
    """Unit-norm Gaussian columns for every class with training samples; zero columns elsewhere."""
    cfg.validate()
    counts = np.bincount(dataset.labels, minlength=dataset.num_classes)
    if counts.sum() == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    init_seed, _ = np.random.SeedSequence(cfg.seed).spawn(2)
    rng = np.random.default_rng(init_seed)
    w = rng.standard_normal((dataset.dim, dataset.num_classes))
    w /= np.linalg.norm(w, axis=0, keepdims=True)
    w[:, counts == 0] = 0.0
    return ClassifierHead(w, cfg.scale_init, HeadKind(cfg.kind))


def train_head(dataset, cfg=TrainConfig()):
    """Fit a classifier head and return it. Deterministic for a fixed ``cfg.seed``.

    Classes without training samples keep an all-zero column and are excluded
    from the softmax, which is how heads for the continual protocol are built.
    """
    head = init_head(dataset, cfg)
    counts = np.bincount(dataset.labels, minlength=dataset.num_classes)
    if (counts == 0).any():
        log.info("training head without %d empty class(es)", int((counts == 0).sum()))
    _, sampler_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    sampler = BatchSampler(dataset.labels, dataset.num_classes, cfg.sampler,
                           np.random.default_rng(sampler_seed))
    x, y = dataset.features, dataset.labels
    active = head.present
    w = np.array(head.weights)
    s = head.scale
    vel_w = np.zeros_like(w)
    vel_s = 0.0
    steps_per_epoch = math.ceil(len(dataset) / cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    kind = HeadKind(cfg.kind)
    for t in range(total):
        lr = 0.5 * cfg.learning_rate * (1.0 + math.cos(math.pi * t / total))
        batch = sampler.next_batch(cfg.batch_size)
        current = ClassifierHead(w, s, kind)
        loss, gw, gs = ce_loss_and_grads(current, x[batch], y[batch], cfg.scale_learnable)
        if not math.isfinite(loss) or not np.all(np.isfinite(gw)):
            raise DivergedLoss(f"non-finite loss at step {t}")
        gw[:, active] += cfg.weight_decay * w[:, active]
        vel_w = cfg.momentum * vel_w + gw
        w = w - lr * vel_w
        if cfg.scale_learnable:
            vel_s = cfg.momentum * vel_s + gs
            s = s - lr * vel_s
            if s <= MIN_SCALE:
                log.warning("scale %.3g projected to %.3g at step %d", s, MIN_SCALE, t)
                s = MIN_SCALE
                vel_s = 0.0
    return ClassifierHead(w, s, kind)
