"""Command-line front end: ``tailcomp {gen,train,protos,transfer,evaluate,experiment}``.

Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.
``TAILCOMP_THREADS`` caps the BLAS thread pool.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .core import DEFAULT_THRESHOLDS, HeadKind, Source
from .data import (
    SynthConfig,
    generate_synthetic,
    load_embd,
    load_head,
    load_prototypes,
    read_head,
    save_embd,
    save_head,
    save_prototypes,
)
from .errors import ConfigInvalid, TailcompError
from .evaluation import emit_csv, emit_sharpness_csv, evaluate
from .experiment import ExperimentConfig, build_config, read_config_file, run_experiment
from .head import TrainConfig, train_head
from .prototypes import PrototypeClassifier, compute_prototypes
from .transfer import (
    DEFAULT_K_VALUES,
    Direction,
    Ensemble,
    Mode,
    TransferConfig,
    WeightClassifier,
    build_all,
    load_hybrid,
    save_hybrid,
)

log = logging.getLogger("tailcomp")

_SYNTH_DEFAULTS = SynthConfig()
_TRAIN_DEFAULTS = TrainConfig()
_TRANSFER_DEFAULTS = TransferConfig()

# (flag, config key, type, default shown in --help, choices)
SYNTH_OPTIONS = [
    ("--dim", "dim", int, _SYNTH_DEFAULTS.dim, None),
    ("--num-superclusters", "num_superclusters", int, _SYNTH_DEFAULTS.num_superclusters, None),
    ("--classes-per-supercluster", "classes_per_supercluster", int,
     _SYNTH_DEFAULTS.classes_per_supercluster, None),
    ("--supercluster-radius", "supercluster_radius", float, _SYNTH_DEFAULTS.supercluster_radius, None),
    ("--class-offset-sigma", "class_offset_sigma", float, _SYNTH_DEFAULTS.class_offset_sigma, None),
    ("--sample-noise-sigma", "sample_noise_sigma", float, _SYNTH_DEFAULTS.sample_noise_sigma, None),
    ("--count-max", "count_max", int, _SYNTH_DEFAULTS.count_max, None),
    ("--count-min", "count_min", int, _SYNTH_DEFAULTS.count_min, None),
    ("--count-exponent", "count_exponent", float, _SYNTH_DEFAULTS.count_exponent, None),
    ("--test-per-class", "test_per_class", int, _SYNTH_DEFAULTS.test_per_class, None),
    ("--val-per-class", "val_per_class", int, _SYNTH_DEFAULTS.val_per_class, None),
]
TRAIN_OPTIONS = [
    ("--classifier", "classifier", str, "cosine", ("cosine", "dot")),
    ("--sampler", "sampler", str, _TRAIN_DEFAULTS.sampler.kind.value, ("uniform", "sqrt", "class-aware")),
    ("--samples-per-class", "samples_per_class", int, _TRAIN_DEFAULTS.sampler.samples_per_class, None),
    ("--epochs", "epochs", int, _TRAIN_DEFAULTS.epochs, None),
    ("--batch-size", "batch_size", int, _TRAIN_DEFAULTS.batch_size, None),
    ("--lr", "learning_rate", float, _TRAIN_DEFAULTS.learning_rate, None),
    ("--momentum", "momentum", float, _TRAIN_DEFAULTS.momentum, None),
    ("--weight-decay", "weight_decay", float, _TRAIN_DEFAULTS.weight_decay, None),
    ("--scale-init", "scale_init", float, _TRAIN_DEFAULTS.scale_init, None),
]
TRANSFER_OPTIONS = [
    ("--tau", "tau", float, _TRANSFER_DEFAULTS.tau, None),
    ("--k", "k_values", str, ",".join(map(str, DEFAULT_K_VALUES)), None),
    ("--direction", "direction", str, _TRANSFER_DEFAULTS.direction.value, tuple(d.value for d in Direction)),
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_options(parser, options):
    for flag, key, typ, default, choices in options:
        parser.add_argument(flag, dest=key, type=typ, default=None, choices=choices,
                            help=f"(default: {default})")


def _add_seed_config(parser):
    parser.add_argument("--config", type=Path, help="flat key=value file; flags win on conflict")
    parser.add_argument("--seed", type=int, default=None, help="(default: 0)")


def _merged(args, keys):
    """Config-file values overlaid with explicitly given flags."""
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return values


def _keys(*option_lists):
    return [opt[1] for opts in option_lists for opt in opts]


def _experiment_config(args, keys):
    values = _merged(args, keys)
    cfg = build_config(values)
    return cfg.seeded()


def cmd_gen(args):
    cfg = _experiment_config(args, _keys(SYNTH_OPTIONS))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, split in zip(("train", "val", "test"), generate_synthetic(cfg.synth)):
        save_embd(out / f"{name}.embd", split)
        print(f"wrote {out / f'{name}.embd'} ({len(split)} samples)")
    return 0


def cmd_train(args):
    cfg = _experiment_config(args, _keys(TRAIN_OPTIONS))
    train = load_embd(args.train)
    if args.exclude_few:
        train = train.subset(train.train_counts[train.labels] > DEFAULT_THRESHOLDS.few)
    head = train_head(train, cfg.train)
    save_head(args.out, head)
    print(f"wrote {args.out} (kind={head.kind.name.lower()}, scale={head.scale:.6g})")
    return 0


def cmd_protos(args):
    split = load_embd(args.split)
    source = Source(args.source)
    protos = compute_prototypes(split, source)
    save_prototypes(args.out, protos)
    print(f"wrote {args.out} ({int(protos.present.sum())}/{protos.num_classes} classes present)")
    return 0


def cmd_transfer(args):
    values = {k: getattr(args, k) for k in _keys(TRANSFER_OPTIONS) if getattr(args, k) is not None}
    try:
        cfg = TransferConfig(
            tau=float(values.get("tau", _TRANSFER_DEFAULTS.tau)),
            k_values=_parse_k(values.get("k_values")),
            direction=Direction(values.get("direction", _TRANSFER_DEFAULTS.direction.value)),
            mode=Mode(args.mode),
            exclude_self=args.exclude_self,
        )
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from None
    head = load_head(args.head)
    protos = load_prototypes(args.protos)
    counts = load_embd(args.counts).train_counts
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for clf in build_all(protos, head, counts, cfg):
        path = out / f"{cfg.mode.value}_k{clf.k}.head"
        save_hybrid(path, clf)
        print(f"wrote {path}")
    return 0


def _parse_k(text):
    if text is None:
        return DEFAULT_K_VALUES
    try:
        return tuple(int(x) for x in str(text).split(","))
    except ValueError:
        raise ConfigInvalid(f"--k expects comma-separated integers, got {text!r}") from None


def _load_classifier(path, scale):
    rec = read_head(path)
    if rec.kind in (HeadKind.COSINE, HeadKind.DOT):
        return load_head(path)
    if rec.kind == HeadKind.PROTOTYPE:
        return PrototypeClassifier(load_prototypes(path), scale if scale is not None else 1.0)
    clf = load_hybrid(path)
    return clf if scale is None else WeightClassifier(clf.weights, scale)


def cmd_evaluate(args):
    counts = load_embd(args.counts).train_counts
    split = load_embd(args.split, counts)
    members = [_load_classifier(p, args.scale) for p in args.classifiers]
    clf = members[0] if len(members) == 1 else Ensemble(members)
    rep = evaluate(clf, split, counts)
    print(json.dumps(rep.as_dict(), indent=2))
    if args.csv:
        emit_csv([("+".join(Path(p).stem for p in args.classifiers), Path(args.split).stem, rep)], args.csv)
    return 0


def _fmt_acc(x):
    return "  N/A" if x is None else f"{100 * x:5.1f}"


def format_table(rows):
    width = max(len(r["classifier"]) for r in rows)
    lines = [f"{'classifier':<{width}}  many   med   few total"]
    for r in rows:
        cells = "  ".join(_fmt_acc(r[g]) for g in ("many", "medium", "few", "total"))
        lines.append(f"{r['classifier']:<{width}}  {cells}")
    return "\n".join(lines)


def cmd_experiment(args):
    keys = _keys(SYNTH_OPTIONS, TRAIN_OPTIONS, TRANSFER_OPTIONS)
    values = _merged(args, keys)
    if args.continual:
        values["continual"] = True
    cfg = build_config(values).seeded()
    report = run_experiment(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    emit_csv([(r["classifier"], "test", r) for r in report["table"]], out / "report.csv")
    if "analysis" in report:
        emit_sharpness_csv({"prototype_to_classifier": report["analysis"]["sharpness_curve"]},
                           out / "sharpness.csv")
    print(format_table(report["table"]))
    if "ablation" in report:
        print()
        print(format_table([{"classifier": f"ensemble[{d}]", **v} for d, v in report["ablation"].items()]))
    print(f"\nwrote {out / 'report.json'} and {out / 'report.csv'}")
    return 0


def build_parser():
    parser = _Parser(prog="tailcomp", description=__doc__.splitlines()[0],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write synthetic train/val/test EMBD files")
    _add_seed_config(p)
    _add_options(p, SYNTH_OPTIONS)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a classifier head on an EMBD file")
    p.add_argument("train", type=Path)
    _add_seed_config(p)
    _add_options(p, TRAIN_OPTIONS)
    p.add_argument("--exclude-few", action="store_true",
                   help="drop few-shot classes (n <= 20) before training, leaving zero columns")
    p.add_argument("--out", required=True, type=Path, help="output HEAD file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("protos", help="compute class prototypes from an EMBD file")
    p.add_argument("split", type=Path)
    p.add_argument("--source", choices=("train", "val"), default="train", help="(default: train)")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_protos)

    p = sub.add_parser("transfer", help="build hybrid or continual classifiers")
    p.add_argument("head", type=Path)
    p.add_argument("protos", type=Path)
    p.add_argument("counts", type=Path, help="training EMBD file providing per-class counts")
    _add_options(p, TRANSFER_OPTIONS)
    p.add_argument("--mode", choices=("hybrid", "continual"), default="hybrid", help="(default: hybrid)")
    p.add_argument("--exclude-self", action="store_true", help="(default: off)")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("evaluate", help="group accuracies of a classifier or an ensemble of several")
    p.add_argument("classifiers", nargs="+", type=Path)
    p.add_argument("--split", required=True, type=Path)
    p.add_argument("--counts", required=True, type=Path, help="training EMBD file")
    p.add_argument("--scale", type=float, default=None,
                   help="scale for prototype/transfer members (default: stored scale)")
    p.add_argument("--csv", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="end-to-end synthetic benchmark run")
    _add_seed_config(p)
    _add_options(p, SYNTH_OPTIONS + TRAIN_OPTIONS + TRANSFER_OPTIONS)
    p.add_argument("--continual", action="store_true", help="train the head without few-shot classes")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_experiment)
    return parser


def _thread_limit():
    raw = os.environ.get("TAILCOMP_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigInvalid(f"TAILCOMP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigInvalid("TAILCOMP_THREADS must be >= 1")
    return n


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        limit = _thread_limit()
        if limit is None:
            return args.func(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=limit):
            return args.func(args)
    except ConfigInvalid as exc:
        print(f"tailcomp: configuration error: {exc}", file=sys.stderr)
        return 2
    except (TailcompError, OSError) as exc:
        print(f"tailcomp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
