"""Group-wise accuracy and prototype/classifier diagnostics.

CSV columns (fixed order):

* group reports: ``classifier,split,group,accuracy,num_samples`` with groups
  ``many, medium, few, total``; an empty ``accuracy`` field marks a group
  with no evaluated samples.
* sharpness curves: ``curve,rank,mean_similarity`` with 0-based ranks.

Floats are written with 17 significant digits.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import (
    DEFAULT_THRESHOLDS,
    ClassGroup,
    GroupReport,
    class_groups,
    normalize_columns,
)
from .errors import AbsentClass, AbsentPrototype, DimensionMismatch, EmptyEligibleSet
from .prototypes import PrototypeClassifier
from .transfer import eligible_set

GROUP_ORDER = ("many", "medium", "few", "total")
REPORT_COLUMNS = ("classifier", "split", "group", "accuracy", "num_samples")
SHARPNESS_COLUMNS = ("curve", "rank", "mean_similarity")


def _acc(correct, mask):
    total = int(mask.sum())
    return (float(correct[mask].sum()) / total if total else None), total


def evaluate(classifier, split, train_counts, thresholds=DEFAULT_THRESHOLDS):
    """Top-1 accuracy over the whole split and per class group.

    Groups come from ``train_counts`` (the training split's cardinalities),
    never from the evaluated split. Argmax ties go to the lowest class index.
    """
    train_counts = np.asarray(train_counts)
    n = split.num_classes
    if train_counts.shape != (n,) or getattr(classifier, "num_classes", n) != n:
        raise DimensionMismatch("classifier, split and train_counts must agree on the number of classes")
    probs = classifier.predict_proba(split.features) if len(split) else np.zeros((0, n))
    pred = np.argmax(probs, axis=1)
    y = split.labels
    correct = pred == y
    group_of = np.array([g.value for g in class_groups(train_counts, thresholds)])
    sample_group = group_of[y] if len(y) else np.array([], dtype=group_of.dtype)
    per_class_n = np.bincount(y, minlength=n)
    per_class_hit = np.bincount(y, weights=correct.astype(np.float64), minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(per_class_n > 0, per_class_hit / np.maximum(per_class_n, 1), np.nan)
    accs, counts = {}, {}
    for g in ClassGroup:
        accs[g.value], counts[g.value] = _acc(correct, sample_group == g.value)
    accs["total"], counts["total"] = _acc(correct, np.ones_like(correct, dtype=bool))
    return GroupReport(accs["many"], accs["medium"], accs["few"], accs["total"], per_class, counts)


def _require_all(protos, head):
    if not protos.present.all():
        raise AbsentPrototype(f"missing prototypes {np.flatnonzero(~protos.present).tolist()}")
    if not head.present.all():
        raise AbsentClass(f"missing classifier weights {np.flatnonzero(~head.present).tolist()}")


def mismatch_count(protos, head):
    """Classes whose prototype is not (jointly) most cosine-similar to their own classifier weight."""
    _require_all(protos, head)
    sim = normalize_columns(protos.prototypes).T @ normalize_columns(head.weights)
    own = np.diag(sim)
    wrong = own < sim.max(axis=1)
    return int(wrong.sum()), np.flatnonzero(wrong).tolist()


def sharpness_curve(protos, head, counts, k=0):
    """Rank-wise mean of each prototype's descending cosine similarities to eligible classifier weights."""
    counts = np.asarray(counts)
    elig = eligible_set(np.where(head.present, counts, -1), k)
    rows = protos.present
    if not rows.any():
        raise EmptyEligibleSet("no prototypes to score")
    sim = normalize_columns(protos.prototypes[:, rows]).T @ normalize_columns(head.weights[:, elig])
    ranked = -np.sort(-sim, axis=1)
    return ranked.mean(axis=0)


def memorization_check(head, train, val_protos, thresholds=DEFAULT_THRESHOLDS):
    """Training-set accuracy when validation prototypes act as the classifier."""
    if not val_protos.present.all():
        raise AbsentPrototype(f"missing validation prototypes {np.flatnonzero(~val_protos.present).tolist()}")
    scale = head.scale if hasattr(head, "scale") else 1.0
    return evaluate(PrototypeClassifier(val_protos, scale), train, train.train_counts, thresholds)


def _fmt(x):
    return "" if x is None else format(float(x), ".17g")


def report_rows(reports):
    """Flatten ``(classifier_id, split, GroupReport)`` triples into CSV-ready rows."""
    rows = []
    for name, split, rep in reports:
        d = rep if isinstance(rep, dict) else rep.as_dict()
        for g in GROUP_ORDER:
            rows.append([name, split, g, _fmt(d[g]), str(d["counts"].get(g, 0))])
    return rows


def emit_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(report_rows(reports))


def emit_sharpness_csv(curves, path):
    """``curves`` maps a curve name to its per-rank values."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(SHARPNESS_COLUMNS)
        for name, curve in curves.items():
            for r, v in enumerate(curve):
                w.writerow([name, r, _fmt(v)])


def read_report_csv(path):
    """Parse a group-report CSV back into ``{(classifier, split, group): (accuracy, num_samples)}``."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            acc = float(row["accuracy"]) if row["accuracy"] else None
            out[(row["classifier"], row["split"], row["group"])] = (acc, int(row["num_samples"]))
    return out


def report_json(reports):
    return [
        {"classifier": name, "split": split, **(rep if isinstance(rep, dict) else rep.as_dict())}
        for name, split, rep in reports
    ]


def emit_json(reports, path):
    Path(path).write_text(json.dumps(report_json(reports), indent=2) + "\n")
