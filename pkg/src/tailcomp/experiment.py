"""End-to-end desk-scale protocol: generate, train, build prototypes, transfer, evaluate.

:func:`run_experiment` returns a JSON-ready dict. With ``continual=False`` the
``table`` rows are: cosine classifier, prototypes, prototypes + classifier,
one hybrid per k, and their ensemble. With ``continual=True`` the head is
trained without few-shot classes and the rows are: cosine classifier (few and
total not applicable), prototypes, one continual classifier per continual k,
and the ensemble of prototypes with those continual classifiers.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DEFAULT_THRESHOLDS, HeadKind, Source
from .data import SynthConfig, generate_synthetic
from .errors import ConfigInvalid
from .evaluation import evaluate, memorization_check, mismatch_count, sharpness_curve
from .head import TrainConfig, train_head
from .prototypes import PrototypeClassifier, compute_prototypes
from .sampling import SamplerKind, SamplerSpec
from .transfer import (
    Direction,
    Ensemble,
    Mode,
    TransferConfig,
    build_continual,
    build_hybrid,
    prototype_plus_classifier,
)

CONTINUAL_K_VALUES = (20, 100)


@dataclass(frozen=True)
class ExperimentConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    transfer: TransferConfig = field(default_factory=TransferConfig)
    continual: bool = False
    continual_k_values: tuple = CONTINUAL_K_VALUES
    ablation: bool = True
    seed: int = 0

    def seeded(self, seed=None):
        """Copy whose generator and trainer seeds are both set from ``seed``."""
        seed = self.seed if seed is None else seed
        return dataclasses.replace(
            self,
            seed=seed,
            synth=self.synth.replace(seed=seed),
            train=dataclasses.replace(self.train, seed=seed),
        )


def _row(name, rep):
    return {"classifier": name, **rep.as_dict()}


def _table_full(train, test, protos, head, tcfg):
    counts = train.train_counts
    rows = [
        _row("cosine classifier", evaluate(head, test, counts)),
        _row("prototypes", evaluate(PrototypeClassifier(protos, head.scale), test, counts)),
        _row("prototypes + classifier", evaluate(prototype_plus_classifier(protos, head), test, counts)),
    ]
    hybrids = [build_hybrid(protos, head, counts, k, tcfg) for k in tcfg.k_values]
    for h in hybrids:
        rows.append(_row(f"w^h({h.k})", evaluate(h, test, counts)))
    ks = ", ".join(f"w^h({k})" for k in tcfg.k_values)
    rows.append(_row(f"ensemble({ks})", evaluate(Ensemble(hybrids), test, counts)))
    return rows


def continual_members(protos, head, counts, tcfg, k_values=CONTINUAL_K_VALUES):
    cfg = dataclasses.replace(tcfg, mode=Mode.CONTINUAL)
    return [build_continual(protos, head, counts, k, cfg) for k in k_values]


def _table_continual(train, test, protos, head, tcfg, k_values):
    counts = train.train_counts
    head_rep = evaluate(head, test, counts)
    head_row = _row("cosine classifier", head_rep)
    head_row["few"] = None
    head_row["total"] = None
    proto_clf = PrototypeClassifier(protos, head.scale)
    rows = [head_row, _row("prototypes", evaluate(proto_clf, test, counts))]
    members = continual_members(protos, head, counts, tcfg, k_values)
    for m in members:
        rows.append(_row(f"w^hc({m.k})", evaluate(m, test, counts)))
    ks = ", ".join(f"w^hc({k})" for k in k_values)
    rows.append(_row(f"ensemble(prototypes, {ks})", evaluate(Ensemble([proto_clf, *members]), test, counts)))
    return rows


def _ablation(train, test, protos, head, tcfg):
    out = {}
    for d in Direction:
        cfg = dataclasses.replace(tcfg, direction=d, mode=Mode.HYBRID)
        ens = Ensemble([build_hybrid(protos, head, train.train_counts, k, cfg) for k in cfg.k_values])
        out[d.value] = evaluate(ens, test, train.train_counts).as_dict()
    return out


def _analysis(train, val, test, protos, val_protos, head):
    counts = train.train_counts
    n_mis, mis = mismatch_count(protos, head)
    quality = []
    for pname, p in (("train", protos), ("val", val_protos)):
        clf = PrototypeClassifier(p, head.scale)
        for sname, split in (("train", train), ("test", test)):
            quality.append({"prototypes": pname, "split": sname, **evaluate(clf, split, counts).as_dict()})
    return {
        "mismatch_count": n_mis,
        "mismatch_classes": mis,
        "sharpness_curve": sharpness_curve(protos, head, counts, 0).tolist(),
        "memorization": memorization_check(head, train, val_protos).as_dict(),
        "prototype_quality": quality,
    }


def run_on_splits(train, val, test, cfg=ExperimentConfig()):
    """Run the protocol on given splits (the generator is skipped)."""
    cfg.train.validate()
    protos = compute_prototypes(train, Source.TRAIN)
    val_protos = compute_prototypes(val, Source.VALIDATION)
    result = {"continual": cfg.continual}
    if cfg.continual:
        few = cfg_few_mask(train.train_counts)
        head = train_head(train.subset(~few[train.labels]), cfg.train)
        result["table"] = _table_continual(train, test, protos, head, cfg.transfer, cfg.continual_k_values)
        result["excluded_classes"] = np.flatnonzero(few).tolist()
    else:
        head = train_head(train, cfg.train)
        result["table"] = _table_full(train, test, protos, head, cfg.transfer)
        if cfg.ablation:
            result["ablation"] = _ablation(train, test, protos, head, cfg.transfer)
        result["analysis"] = _analysis(train, val, test, protos, val_protos, head)
    result["scale"] = head.scale
    return result


def cfg_few_mask(counts, thresholds=DEFAULT_THRESHOLDS):
    return np.asarray(counts) <= thresholds.few


def run_experiment(cfg=ExperimentConfig()):
    cfg = cfg.seeded()
    train, val, test = generate_synthetic(cfg.synth)
    result = run_on_splits(train, val, test, cfg)
    return {"config": config_dict(cfg), **result}


def _plain(v):
    if isinstance(v, enum.Enum):
        return v.value
    if dataclasses.is_dataclass(v):
        return {f.name: _plain(getattr(v, f.name)) for f in dataclasses.fields(v)}
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def config_dict(cfg):
    return _plain(cfg)


# flat key=value configuration -------------------------------------------------

_SYNTH_KEYS = {f.name for f in dataclasses.fields(SynthConfig)} - {"seed"}
_TRAIN_KEYS = {
    "epochs": int, "batch_size": int, "learning_rate": float, "momentum": float,
    "weight_decay": float, "scale_init": float,
}
_ALIASES = {"lr": "learning_rate", "k": "k_values", "classifier": "kind"}


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigInvalid(f"not a boolean: {text!r}")


def parse_k_values(text):
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise ConfigInvalid(f"k values must be comma-separated integers, got {text!r}") from None


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_config(values):
    """Assemble an :class:`ExperimentConfig` from flat string (or typed) values."""
    synth, train, transfer = {}, {}, {}
    top = {}
    sampler_kind, per_class = SamplerKind.SQRT, 4
    types = {f.name: f.default for f in dataclasses.fields(SynthConfig)}
    for raw_key, value in values.items():
        if value is None:
            continue
        key = _ALIASES.get(raw_key, raw_key)
        try:
            if key in _SYNTH_KEYS:
                synth[key] = type(types[key])(float(value)) if isinstance(types[key], int) else float(value)
            elif key in _TRAIN_KEYS:
                train[key] = _TRAIN_KEYS[key](value)
            elif key == "scale_learnable":
                train[key] = _bool(value)
            elif key == "kind":
                train["kind"] = {"cosine": HeadKind.COSINE, "dot": HeadKind.DOT}[str(value)]
            elif key == "sampler":
                sampler_kind = SamplerKind(str(value))
            elif key == "samples_per_class":
                per_class = int(value)
            elif key == "tau":
                transfer["tau"] = float(value)
            elif key == "k_values":
                transfer["k_values"] = value if isinstance(value, tuple) else parse_k_values(value)
            elif key == "direction":
                transfer["direction"] = Direction(str(value))
            elif key == "exclude_self":
                transfer["exclude_self"] = _bool(value)
            elif key == "continual":
                top["continual"] = _bool(value)
            elif key == "continual_k_values":
                top[key] = value if isinstance(value, tuple) else parse_k_values(value)
            elif key == "ablation":
                top["ablation"] = _bool(value)
            elif key == "seed":
                top["seed"] = int(value)
            else:
                raise ConfigInvalid(f"unknown configuration key {raw_key!r}")
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigInvalid):
                raise
            raise ConfigInvalid(f"bad value for {raw_key!r}: {value!r}") from None
    train["sampler"] = SamplerSpec(sampler_kind, per_class)
    cfg = ExperimentConfig(
        synth=SynthConfig(**synth).validate(),
        train=TrainConfig(**train).validate(),
        transfer=TransferConfig(**transfer),
        **top,
    )
    return cfg
