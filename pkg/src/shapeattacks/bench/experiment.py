"""Attack x defense experiments over a dataset, with CSV result tables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .. import net
from ..attacks import ATTACK_FIELDS, AttackConfig, default_config, run_attack
from ..defenses import DEFENSE_FIELDS, DefenseConfig, apply_defense
from ..geometry import TriangleIndex, estimate_surface
from .datasets import SHAPES, Dataset, dataset_from_off_dir, synthetic_splits
from .io import export_cloud

log = logging.getLogger(__name__)

COLUMNS = (
    "attack",
    "defense",
    "n_samples",
    "success_rate",
    "benign_accuracy",
    "mean_chamfer",
    "mean_hausdorff",
    "mean_l2",
    "n_errors",
)


def attack_from_dict(spec: dict[str, Any]) -> AttackConfig:
    """Default config for ``spec["kind"]`` with the other keys as overrides."""
    spec = dict(spec)
    return default_config(spec.pop("kind", "iter_grad_l2"), **spec)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one results table.

    ``dataset`` is either ``{"kind": "synthetic", ...synthetic_splits kwargs}``
    or ``{"kind": "off", "root": ..., "split": ..., "n_points": ...}``.
    ``model`` is a checkpoint path; it may be left empty when parameters are
    passed to :func:`run_experiment` directly.
    """

    model: str = ""
    attacks: list[AttackConfig] = field(default_factory=lambda: [AttackConfig("none")])
    defenses: list[DefenseConfig] = field(default_factory=lambda: [DefenseConfig("none")])
    dataset: dict[str, Any] = field(default_factory=lambda: {"kind": "synthetic"})
    sample_limit: int = 100
    seed: int = 0
    output_dir: str | None = None
    workers: int = 1
    dump_clouds: bool = False

    def __post_init__(self):
        self.attacks = [a if isinstance(a, AttackConfig) else attack_from_dict(a) for a in self.attacks]
        self.defenses = [d if isinstance(d, DefenseConfig) else DefenseConfig(**d) for d in self.defenses]
        if not self.attacks or not self.defenses:
            raise ValueError("attack and defense grids must be non-empty")
        for grid in (self.attacks, self.defenses):
            names = [g.name for g in grid]
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate grid entries {names}; give them distinct labels")
        if self.sample_limit < 1 or self.workers < 1:
            raise ValueError("sample_limit and workers must be positive")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys {unknown}; valid keys are {sorted(known)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["attacks"] = [asdict(a) for a in self.attacks]
        out["defenses"] = [asdict(d) for d in self.defenses]
        return out

    def with_(self, **changes) -> "ExperimentConfig":
        return ExperimentConfig(**{**{f.name: getattr(self, f.name) for f in fields(self)}, **changes})


def load_dataset(spec: dict[str, Any]) -> Dataset:
    spec = dict(spec)
    kind = spec.pop("kind", "synthetic")
    if kind == "synthetic":
        split = spec.pop("split", "test")
        classes = spec.pop("classes", SHAPES)
        train, test = synthetic_splits(classes, **spec)
        return train if split == "train" else test
    if kind == "off":
        return dataset_from_off_dir(**spec)
    raise ValueError(f"unknown dataset kind {kind!r} (synthetic or off)")


def _fmt(value: float) -> str:
    return "nan" if value is None or math.isnan(value) else f"{value:.4f}"


@dataclass
class ResultsTable:
    """One row per (attack, defense) cell; ``timings`` holds wall-clock seconds
    per attack and is kept out of the CSV so tables stay byte-reproducible."""

    rows: list[dict[str, Any]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    extra_columns: tuple[str, ...] = ()

    def cell(self, attack: str, defense: str, **match) -> dict[str, Any]:
        for row in self.rows:
            if row["attack"] == attack and row["defense"] == defense and all(row.get(k) == v for k, v in match.items()):
                return row
        raise KeyError((attack, defense, match))

    def success(self, attack: str, defense: str = "none", **match) -> float:
        return self.cell(attack, defense, **match)["success_rate"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = self.extra_columns + COLUMNS
        writer.writerow(cols)
        for row in self.rows:
            writer.writerow(
                [_fmt(row[c]) if isinstance(row[c], float) else row[c] for c in cols]
            )
        return buf.getvalue()

    def write(self, directory, name: str = "results") -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{name}.csv"
        path.write_text(self.to_csv())
        (directory / f"{name}_timings.json").write_text(json.dumps(self.timings, indent=2, sort_keys=True))
        return path


# ------------------------------------------------------------------ per sample
_WORKER: dict[str, Any] = {}


def _init_worker(params, config):
    _WORKER["params"] = params
    _WORKER["config"] = config


def _defended_fooled(params, config, cloud, label: int, seed: int) -> dict[str, bool]:
    out = {}
    for d_cfg in config.defenses:
        defended = apply_defense(d_cfg.with_(seed=seed), cloud, params, np.random.default_rng(seed))
        out[d_cfg.name] = net.predict(params, defended) != label
    return out


def _attack_sample(task) -> dict[str, Any]:
    """Run every attack on one benign sample and classify under every defense."""
    idx, cloud, label = task
    params, config = _WORKER["params"], _WORKER["config"]
    seed = config.seed + idx
    records = []
    benign_fooled = _defended_fooled(params, config, cloud, label, seed)
    try:
        mesh, _ = estimate_surface(cloud)
        index = TriangleIndex(mesh)
    except ValueError as exc:
        log.warning("sample %d: benign surface failed: %s", idx, exc)
        mesh = index = None
    for a_cfg in config.attacks:
        rec: dict[str, Any] = {"sample": idx, "attack": a_cfg.name, "error": None, "fooled": {}}
        start = time.perf_counter()
        try:
            if mesh is None and a_cfg.kind in ("gradient_projection", "adversarial_sticks"):
                raise ValueError("no benign surface for this sample")
            res = run_attack(
                params, cloud, label, a_cfg.with_(seed=seed), mesh, index, np.random.default_rng(seed)
            )
            rec.update(chamfer=res.chamfer, hausdorff=res.hausdorff, l2=res.l2)
            rec["fooled"] = _defended_fooled(params, config, res.cloud, label, seed)
            if config.dump_clouds and config.output_dir:
                out = Path(config.output_dir) / "clouds"
                out.mkdir(parents=True, exist_ok=True)
                export_cloud(res.cloud, out / f"{a_cfg.name}_{idx:05d}.xyz")
        except Exception as exc:  # recorded per sample, never fatal
            log.warning("sample %d, attack %s failed: %s", idx, a_cfg.name, exc)
            rec["error"] = f"{type(exc).__name__}: {exc}"
        rec["seconds"] = time.perf_counter() - start
        records.append(rec)
    return {"sample": idx, "benign_fooled": benign_fooled, "attacks": records}


def _mean(values) -> float:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else float("nan")


def _aggregate(config: ExperimentConfig, results: list[dict[str, Any]]) -> ResultsTable:
    table = ResultsTable()
    n = len(results)
    records = [r for res in results for r in res["attacks"]]
    for a_cfg in config.attacks:
        recs = [r for r in records if r["attack"] == a_cfg.name]
        table.timings[a_cfg.name] = table.timings.get(a_cfg.name, 0.0) + sum(r["seconds"] for r in recs)
        ok = [r for r in recs if r["error"] is None]
        for d_cfg in config.defenses:
            fooled = [r for r in ok if r["fooled"][d_cfg.name]]
            b_ok = [not res["benign_fooled"][d_cfg.name] for res in results]
            table.rows.append(
                dict(
                    attack=a_cfg.name,
                    defense=d_cfg.name,
                    n_samples=n,
                    success_rate=len(fooled) / n if n else float("nan"),
                    benign_accuracy=float(np.mean(b_ok)) if b_ok else float("nan"),
                    mean_chamfer=_mean(r["chamfer"] for r in fooled),
                    mean_hausdorff=_mean(r["hausdorff"] for r in fooled),
                    mean_l2=_mean(r["l2"] for r in fooled),
                    n_errors=len(recs) - len(ok),
                )
            )
    table.rows.sort(key=lambda r: (r["attack"], r["defense"]))
    return table


def run_experiment(
    config: ExperimentConfig,
    params: net.ClassifierParams | None = None,
    dataset: Dataset | None = None,
) -> ResultsTable:
    """Attack the correctly classified samples and classify the results under
    every defense.

    Success rates divide by the number of correctly classified benign samples
    considered (at most ``sample_limit``). ``benign_accuracy`` is the accuracy
    of the defended benign clouds over the same samples.
    Metric means are over the samples that fooled the model in that cell.
    """
    if params is None:
        if not config.model:
            raise ValueError("no model checkpoint given")
        params = net.load_params(config.model)
    dataset = dataset if dataset is not None else load_dataset(config.dataset)
    preds = net.predict_batch(params, dataset.clouds)
    correct = np.flatnonzero(preds == dataset.labels)[: config.sample_limit]
    tasks = [(int(i), dataset.clouds[i], int(dataset.labels[i])) for i in correct]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(params, config)) as pool:
            results = list(pool.map(_attack_sample, tasks))
    else:
        _init_worker(params, config)
        results = [_attack_sample(t) for t in tasks]
    table = _aggregate(config, sorted(results, key=lambda r: r["sample"]))
    if config.output_dir:
        table.write(config.output_dir)
    return table


# ----------------------------------------------------------------------- sweeps
SWEEPABLE = tuple(ATTACK_FIELDS) + tuple(f"defense.{f}" for f in DEFENSE_FIELDS)


def run_sweep(
    config: ExperimentConfig,
    parameter: str,
    values,
    params: net.ClassifierParams | None = None,
    dataset: Dataset | None = None,
) -> ResultsTable:
    """One experiment per value of an attack field (e.g. ``eps``, ``kappa``) or a
    defense field (``defense.m``, ``defense.k``, ``defense.eps_std``; the bare
    names ``m``/``k``/``eps_std`` also work). Rows are stacked in long format
    with ``parameter`` and ``value`` columns."""
    target = parameter.split(".", 1)[1] if parameter.startswith("defense.") else parameter
    on_defense = parameter.startswith("defense.") or parameter in DEFENSE_FIELDS
    if (on_defense and target not in DEFENSE_FIELDS) or (not on_defense and target not in ATTACK_FIELDS):
        raise ValueError(f"unknown sweep parameter {parameter!r}; valid names: {', '.join(SWEEPABLE)}")
    out = ResultsTable(extra_columns=("parameter", "value"))
    values = list(values)
    if not values:
        return out
    if params is None:
        params = net.load_params(config.model)
    dataset = dataset if dataset is not None else load_dataset(config.dataset)
    for value in values:
        if on_defense:
            run = config.with_(defenses=[d.with_(**{target: value}) for d in config.defenses], output_dir=None)
        else:
            run = config.with_(
                attacks=[a.with_(**{target: value}) if a.kind != "none" else a for a in config.attacks],
                output_dir=None,
            )
        table = run_experiment(run, params, dataset)
        for row in table.rows:
            out.rows.append({"parameter": parameter, "value": value, **row})
        for k, v in table.timings.items():
            out.timings[f"{k}@{parameter}={value}"] = v
    if config.output_dir:
        out.write(config.output_dir, f"sweep_{target}")
    return out
