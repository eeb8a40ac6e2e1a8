"""EMBD/HEAD binary formats and the synthetic long-tail embedding generator.

EMBD layout (little-endian)::

    b"EMBD" | u32 version=1 | u32 dim F | u32 num_classes N | u64 num_samples M
    | M x u32 labels | M*F x float32 features (row-major)

HEAD layout (little-endian)::

    b"HEAD" | u32 version=1 | u8 kind | u32 dim F | u32 num_classes N
    | float32 scale | N*F x float32 weights (one class after another)

Kind bytes: 0 cosine head, 1 dot-product head, 2 prototypes (scale 1.0),
3 hybrid, 4 continual. Absent classes are stored as all-zero columns.
"""
from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .core import ClassifierHead, EmbeddingDataset, HeadKind, PrototypeSet, Source
from .errors import (
    BadMagic,
    BadVersion,
    ConfigInvalid,
    FormatError,
    LabelOutOfRange,
    TruncatedFile,
)

EMBD_MAGIC = b"EMBD"
HEAD_MAGIC = b"HEAD"
VERSION = 1

_EMBD_HEADER = struct.Struct("<4sIIIQ")
_HEAD_HEADER = struct.Struct("<4sIBIIf")


def embd_nbytes(num_samples, dim):
    return _EMBD_HEADER.size + 4 * num_samples + 4 * num_samples * dim


def head_nbytes(num_classes, dim):
    return _HEAD_HEADER.size + 4 * num_classes * dim


def embd_to_bytes(dataset):
    m, f = dataset.features.shape
    header = _EMBD_HEADER.pack(EMBD_MAGIC, VERSION, f, dataset.num_classes, m)
    labels = dataset.labels.astype("<u4").tobytes()
    feats = np.ascontiguousarray(dataset.features, dtype="<f4").tobytes()
    return header + labels + feats


def embd_from_bytes(buf, train_counts=None):
    buf = bytes(buf)
    if len(buf) < 4:
        raise TruncatedFile("file shorter than magic")
    if buf[:4] != EMBD_MAGIC:
        raise BadMagic(f"expected {EMBD_MAGIC!r}, got {buf[:4]!r}")
    if len(buf) < _EMBD_HEADER.size:
        raise TruncatedFile("incomplete EMBD header")
    _, version, dim, num_classes, m = _EMBD_HEADER.unpack_from(buf)
    if version != VERSION:
        raise BadVersion(f"unsupported EMBD version {version}")
    if dim == 0 or num_classes == 0:
        raise FormatError("dim and num_classes must be positive")
    expected = embd_nbytes(m, dim)
    if len(buf) < expected:
        raise TruncatedFile(f"expected {expected} bytes, got {len(buf)}")
    if len(buf) > expected:
        raise FormatError(f"{len(buf) - expected} trailing bytes after EMBD payload")
    off = _EMBD_HEADER.size
    labels = np.frombuffer(buf, dtype="<u4", count=m, offset=off)
    if m and labels.max() >= num_classes:
        raise LabelOutOfRange(f"label {int(labels.max())} >= num_classes {num_classes}")
    feats = np.frombuffer(buf, dtype="<f4", count=m * dim, offset=off + 4 * m)
    if not np.all(np.isfinite(feats)):
        raise FormatError("non-finite feature value")
    feats = feats.reshape(m, dim).astype(np.float64)
    return EmbeddingDataset(feats, labels.astype(np.int64), num_classes, train_counts)


def save_embd(path, dataset):
    Path(path).write_bytes(embd_to_bytes(dataset))


def load_embd(path, train_counts=None):
    """Read an EMBD file. Counts come from the labels unless ``train_counts`` is given."""
    return embd_from_bytes(Path(path).read_bytes(), train_counts)


@dataclass(frozen=True)
class HeadRecord:
    kind: HeadKind
    weights: np.ndarray  # (F, N)
    scale: float


def head_to_bytes(kind, weights, scale):
    w = np.asarray(weights, dtype=np.float64)
    f, n = w.shape
    header = _HEAD_HEADER.pack(HEAD_MAGIC, VERSION, int(kind), f, n, float(scale))
    return header + np.ascontiguousarray(w.T, dtype="<f4").tobytes()


def head_from_bytes(buf):
    buf = bytes(buf)
    if len(buf) < 4:
        raise TruncatedFile("file shorter than magic")
    if buf[:4] != HEAD_MAGIC:
        raise BadMagic(f"expected {HEAD_MAGIC!r}, got {buf[:4]!r}")
    if len(buf) < _HEAD_HEADER.size:
        raise TruncatedFile("incomplete HEAD header")
    _, version, kind, dim, n, scale = _HEAD_HEADER.unpack_from(buf)
    if version != VERSION:
        raise BadVersion(f"unsupported HEAD version {version}")
    try:
        kind = HeadKind(kind)
    except ValueError:
        raise FormatError(f"unknown head kind {kind}") from None
    if dim == 0 or n == 0:
        raise FormatError("dim and num_classes must be positive")
    if not (math.isfinite(scale) and scale > 0):
        raise FormatError(f"invalid scale {scale}")
    expected = head_nbytes(n, dim)
    if len(buf) < expected:
        raise TruncatedFile(f"expected {expected} bytes, got {len(buf)}")
    if len(buf) > expected:
        raise FormatError(f"{len(buf) - expected} trailing bytes after HEAD payload")
    w = np.frombuffer(buf, dtype="<f4", count=n * dim, offset=_HEAD_HEADER.size)
    if not np.all(np.isfinite(w)):
        raise FormatError("non-finite weight value")
    w = w.reshape(n, dim).T.astype(np.float64)
    return HeadRecord(kind, w, float(scale))


def read_head(path):
    return head_from_bytes(Path(path).read_bytes())


def save_head(path, head):
    Path(path).write_bytes(head_to_bytes(head.kind, head.weights, head.scale))


def load_head(path):
    rec = read_head(path)
    if rec.kind not in (HeadKind.COSINE, HeadKind.DOT):
        raise FormatError(f"{path}: kind {rec.kind.name} is not a trained classifier head")
    return ClassifierHead(rec.weights, rec.scale, rec.kind)


def save_prototypes(path, protos):
    Path(path).write_bytes(head_to_bytes(HeadKind.PROTOTYPE, protos.prototypes, 1.0))


def load_prototypes(path, source=Source.TRAIN):
    rec = read_head(path)
    if rec.kind != HeadKind.PROTOTYPE:
        raise FormatError(f"{path}: kind {rec.kind.name} is not a prototype set")
    return PrototypeSet(rec.weights, source)


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic long-tail embedding benchmark.

    Superclusters sit on a sphere of radius ``supercluster_radius``; class
    ``i`` belongs to supercluster ``i % num_superclusters`` and owns
    ``clamp(round(count_max * (i + 1) ** -count_exponent), count_min, count_max)``
    training samples.
    """

    dim: int = 64
    num_superclusters: int = 10
    classes_per_supercluster: int = 10
    supercluster_radius: float = 1.0
    class_offset_sigma: float = 0.1
    sample_noise_sigma: float = 0.3
    count_max: int = 500
    count_min: int = 5
    count_exponent: float = 1.0
    test_per_class: int = 50
    val_per_class: int = 5
    seed: int = 0

    @property
    def num_classes(self):
        return self.num_superclusters * self.classes_per_supercluster

    def validate(self):
        problems = []
        if self.dim < 2:
            problems.append("dim must be >= 2")
        if self.num_superclusters < 1 or self.classes_per_supercluster < 1:
            problems.append("num_superclusters and classes_per_supercluster must be >= 1")
        if not (self.supercluster_radius > self.class_offset_sigma > 0):
            problems.append("need supercluster_radius > class_offset_sigma > 0")
        if not self.sample_noise_sigma > 0:
            problems.append("sample_noise_sigma must be > 0")
        if not (self.count_max >= self.count_min >= 1):
            problems.append("need count_max >= count_min >= 1")
        if not self.count_exponent > 0:
            problems.append("count_exponent must be > 0")
        if self.test_per_class < 0 or self.val_per_class < 0:
            problems.append("per-class split sizes must be non-negative")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def replace(self, **changes):
        return SynthConfig(**{**asdict(self), **changes})

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}


def class_counts(cfg):
    ranks = np.arange(1, cfg.num_classes + 1, dtype=np.float64)
    raw = cfg.count_max * ranks ** (-cfg.count_exponent)
    # round half up: deterministic and independent of banker's rounding
    n = np.floor(raw + 0.5).astype(np.int64)
    return np.clip(n, cfg.count_min, cfg.count_max)


def _draw(rng, centers, per_class, sigma):
    feats, labels = [], []
    for i, n in enumerate(per_class):
        feats.append(centers[i] + sigma * rng.standard_normal((int(n), centers.shape[1])))
        labels.append(np.full(int(n), i, dtype=np.int64))
    x = np.concatenate(feats) if feats else np.zeros((0, centers.shape[1]))
    # store-exact: values are float32-representable, so EMBD round trips are lossless
    return x.astype(np.float32).astype(np.float64), np.concatenate(labels)


def generate_synthetic(cfg):
    """Draw ``(train, val, test)`` splits. Uses ``numpy.random.default_rng(cfg.seed)`` (PCG64)."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_cls = cfg.num_classes
    directions = rng.standard_normal((cfg.num_superclusters, cfg.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    super_centers = cfg.supercluster_radius * directions
    assignment = np.arange(n_cls) % cfg.num_superclusters
    class_centers = super_centers[assignment] + cfg.class_offset_sigma * rng.standard_normal(
        (n_cls, cfg.dim)
    )
    counts = class_counts(cfg)
    sigma = cfg.sample_noise_sigma
    train = EmbeddingDataset(*_draw(rng, class_centers, counts, sigma), n_cls)
    val_n = np.minimum(cfg.val_per_class, counts)
    val = EmbeddingDataset(*_draw(rng, class_centers, val_n, sigma), n_cls)
    test_n = np.full(n_cls, cfg.test_per_class)
    test = EmbeddingDataset(*_draw(rng, class_centers, test_n, sigma), n_cls)
    return train, val, test


def supercluster_of(cfg):
    return np.arange(cfg.num_classes) % cfg.num_superclusters
