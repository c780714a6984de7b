"""Command line entry point: train, attack, defend, eval, sweep, export."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .. import net
from ..attacks import ATTACKS, AttackConfig, default_config, run_attack
from ..defenses import DEFENSES, DefenseConfig, apply_defense
from ..geometry import estimate_surface
from .datasets import SHAPES, dataset_from_off_dir, synthetic_splits
from .experiment import ExperimentConfig, load_dataset, run_experiment, run_sweep
from .io import export_cloud, read_xyz

log = logging.getLogger("shapeattacks")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_dataclass_flags(parser, cls, skip=("kind", "label", "seed")):
    """One optional flag per dataclass field; unset flags leave defaults alone."""
    for f in fields(cls):
        if f.name in skip:
            continue
        kind = type(f.default) if f.default is not None else str
        parser.add_argument(_flag(f.name), dest=f.name, type=kind, default=None)


def _overrides(args, cls, skip=("kind", "label", "seed")) -> dict:
    return {f.name: getattr(args, f.name) for f in fields(cls) if f.name not in skip and getattr(args, f.name) is not None}


def _dataset_args(parser):
    parser.add_argument("--data", help="directory of OFF files (<class>/[<split>/]*.off); default synthetic")
    parser.add_argument("--classes", nargs="+", default=list(SHAPES))
    parser.add_argument("--train-per-class", type=int, default=120)
    parser.add_argument("--test-per-class", type=int, default=30)
    parser.add_argument("--n-points", type=int, default=1024)


def _splits(args):
    if args.data:
        return (
            dataset_from_off_dir(args.data, args.n_points, "train", args.seed),
            dataset_from_off_dir(args.data, args.n_points, "test", args.seed),
        )
    return synthetic_splits(args.classes, args.train_per_class, args.test_per_class, args.n_points, args.seed)


def _load_cloud(args):
    """A cloud from ``--cloud`` (XYZ, needs ``--label``) or ``--sample`` of the synthetic test split."""
    if args.cloud:
        if args.label is None:
            raise ValueError("--cloud needs --label")
        return read_xyz(args.cloud), args.label
    _, test = synthetic_splits(n_points=args.n_points, seed=args.seed)
    if not 0 <= args.sample < len(test):
        raise ValueError(f"--sample must be in [0, {len(test)})")
    return test.clouds[args.sample], int(test.labels[args.sample])


def cmd_train(args) -> int:
    train, test = _splits(args)
    params, hist = net.train(
        train.clouds, train.labels, len(train.class_names),
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        rng=np.random.default_rng(args.seed), verbose=args.verbose,
    )
    acc = float(np.mean(net.predict_batch(params, test.clouds) == test.labels))
    net.save_params(params, args.out)
    print(f"final train loss {hist.loss[-1]:.4f}, train accuracy {hist.accuracy[-1]:.4f}")
    print(f"held-out accuracy {acc:.4f}; saved {args.out}")
    return 0


def cmd_attack(args) -> int:
    params = net.load_params(args.model)
    cloud, label = _load_cloud(args)
    cfg = default_config(args.kind, seed=args.seed, **_overrides(args, AttackConfig))
    mesh, _ = estimate_surface(cloud)
    res = run_attack(params, cloud, label, cfg, mesh, rng=np.random.default_rng(args.seed))
    summary = dict(
        attack=cfg.name, label=label, predicted=res.predicted, success=bool(res.success),
        chamfer=res.chamfer, hausdorff=res.hausdorff, l2=res.l2, lam=res.lam,
    )
    print(json.dumps(summary))
    if args.out:
        export_cloud(res.cloud, args.out)
    return 0


def cmd_defend(args) -> int:
    cloud, label = _load_cloud(args)
    cfg = DefenseConfig(args.kind, seed=args.seed, **_overrides(args, DefenseConfig))
    params = net.load_params(args.model) if args.model else None
    out = apply_defense(cfg, cloud, params, np.random.default_rng(args.seed))
    info = {"defense": cfg.name, "kept": len(out), "removed": len(cloud) - len(out)}
    if params is not None:
        info["predicted"] = net.predict(params, out)
        info["label"] = label
    print(json.dumps(info))
    if args.out:
        export_cloud(out, args.out)
    return 0


def _experiment_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    changes = {}
    for name in ("model", "sample_limit", "output_dir", "workers", "seed"):
        if getattr(args, name) is not None:
            changes[name] = getattr(args, name)
    if args.dump_clouds:
        changes["dump_clouds"] = True
    return cfg.with_(**changes) if changes else cfg


def _experiment_args(parser):
    parser.add_argument("--config", help="experiment JSON (ExperimentConfig field names)")
    parser.add_argument("--model")
    parser.add_argument("--sample-limit", type=int)
    parser.add_argument("--output-dir")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--dump-clouds", action="store_true")


def cmd_eval(args) -> int:
    table = run_experiment(_experiment_config(args))
    sys.stdout.write(table.to_csv())
    return 0


def _parse_value(text: str):
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def cmd_sweep(args) -> int:
    table = run_sweep(_experiment_config(args), args.parameter, [_parse_value(v) for v in args.values])
    sys.stdout.write(table.to_csv())
    return 0


def cmd_export(args) -> int:
    if args.cloud:
        clouds, names = [read_xyz(args.cloud)], [Path(args.cloud).stem]
    else:
        spec = {"kind": "off", "root": args.data, "split": args.split, "n_points": args.n_points, "seed": args.seed} \
            if args.data else {"kind": "synthetic", "split": args.split, "n_points": args.n_points, "seed": args.seed}
        data = load_dataset(spec)
        idx = args.indices if args.indices else range(len(data))
        clouds = [data.clouds[i] for i in idx]
        names = [f"{data.split}_{i:05d}_{data.class_names[data.labels[i]]}" for i in idx]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for cloud, name in zip(clouds, names):
        export_cloud(cloud, out / f"{name}.{args.format}", args.format)
    print(f"wrote {len(clouds)} file(s) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapeattacks", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the classifier and save a checkpoint")
    _dataset_args(p)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--out", default="model.npz")
    p.set_defaults(func=cmd_train)

    for name, kinds, cls, helptext in (
        ("attack", ATTACKS, AttackConfig, "attack one cloud"),
        ("defend", DEFENSES, DefenseConfig, "apply one defense to a cloud"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("kind", choices=kinds)
        p.add_argument("--model", required=name == "attack")
        p.add_argument("--cloud", help="XYZ file to read instead of a synthetic sample")
        p.add_argument("--label", type=int)
        p.add_argument("--sample", type=int, default=0, help="index into the synthetic test split")
        p.add_argument("--n-points", type=int, default=1024)
        p.add_argument("--out", help="write the resulting cloud (.xyz or .ply)")
        _add_dataclass_flags(p, cls)
        p.set_defaults(func=cmd_attack if name == "attack" else cmd_defend)

    p = sub.add_parser("eval", help="attack x defense table as CSV")
    _experiment_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="repeat eval over values of one parameter")
    _experiment_args(p)
    p.add_argument("--parameter", required=True)
    p.add_argument("--values", nargs="*", default=[])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="write dataset clouds as XYZ or PLY")
    p.add_argument("--cloud", help="convert a single XYZ file")
    p.add_argument("--data", help="directory of OFF files; default synthetic")
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--indices", type=int, nargs="*")
    p.add_argument("--n-points", type=int, default=1024)
    p.add_argument("--format", default="xyz", choices=("xyz", "ply"))
    p.add_argument("--out-dir", default="clouds")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    explicit_seed = args.seed is not None
    if not explicit_seed:
        args.seed = 0
    if args.command in ("eval", "sweep"):
        args.seed = args.seed if explicit_seed else None
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
