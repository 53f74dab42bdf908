"""Batch experiment runner: attack campaigns, records, and CDF summaries.

Campaigns sweep (image, target, energy, attacker) cells, write one CSV row
per attack, and summarize success rates plus the cumulative fraction of
attacks succeeding under each query threshold. A random block-flip attacker
serves as the direct-search comparison baseline.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracle
from .attack import AttackConfig, AttackResult, run_attack
from .errors import ConfigError, ModelFormatError
from .lifting import reproject
from .loss import adversarial_loss, is_adversarial
from .oracle import ClassifierModel, InputTensor, QueryCounter

ATTACKERS = ("bobyqa", "random_baseline")
TARGET_POLICIES = ("all_other_classes", "random_targets")

CSV_COLUMNS = (
    "image_id",
    "original_class",
    "target_class",
    "eps",
    "attacker",
    "success",
    "queries_used",
    "wall_ms",
)


@dataclass
class ExperimentConfig:
    model_path: str
    image_set: str
    epsilons: list[float]
    attackers: list[str] = field(default_factory=lambda: ["bobyqa"])
    targets_policy: str = "all_other_classes"
    random_target_count: int = 1
    attack_overrides: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0
    query_grid: list[int] | None = None
    measure_wall_time: bool = True

    def __post_init__(self):
        if not self.epsilons:
            raise ConfigError("at least one epsilon value is required")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be positive")
        if not self.attackers:
            raise ConfigError("at least one attacker is required")
        for name in self.attackers:
            if name not in ATTACKERS:
                raise ConfigError(f"unknown attacker {name!r}; choose from {ATTACKERS}")
        if self.targets_policy not in TARGET_POLICIES:
            raise ConfigError(f"unknown targets policy {self.targets_policy!r}")
        if self.targets_policy == "random_targets" and self.random_target_count < 1:
            raise ConfigError("random_targets needs a positive count")


@dataclass
class AttackRecord:
    image_id: str
    original_class: int
    target_class: int
    eps: float
    attacker: str
    success: bool
    queries_used: int
    wall_ms: int


def load_image(path: str) -> InputTensor:
    """Read one image file: {"shape": [h,w,c], "data": [...], "bounds": [l,u]?}."""
    obj = oracle._load_json(path)
    try:
        shape = tuple(int(v) for v in obj["shape"])
        data = oracle._as_finite_array(obj["data"], "image data")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed image file: {exc}") from exc
    bounds = tuple(obj.get("bounds", oracle.DEFAULT_PIXEL_BOUNDS))
    if len(shape) != 3:
        raise ModelFormatError(f"{path}: shape must have three entries")
    try:
        return InputTensor(shape, data, bounds)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc


def load_image_set(path: str) -> list[tuple[str, InputTensor, int]]:
    """Read a manifest.json directory (or manifest file) into (id, image, label)."""
    p = Path(path)
    manifest_path = p / "manifest.json" if p.is_dir() else p
    obj = oracle._load_json(str(manifest_path))
    entries = obj.get("images")
    if not isinstance(entries, list) or not entries:
        raise ModelFormatError(f"{manifest_path}: manifest needs a non-empty 'images' list")
    base = manifest_path.parent
    out = []
    for entry in entries:
        try:
            image_id = str(entry["id"])
            rel = entry["file"]
            label = int(entry["label"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"{manifest_path}: bad manifest entry: {exc}") from exc
        out.append((image_id, load_image(str(base / rel)), label))
    return out


def load_experiment_config(path: str) -> ExperimentConfig:
    obj = oracle._load_json(path)
    known = {
        "model",
        "images",
        "epsilons",
        "attackers",
        "targets",
        "attack",
        "output",
        "seed",
        "query_grid",
        "measure_wall_time",
    }
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    try:
        targets = obj.get("targets", {"policy": "all_other_classes"})
        policy = targets.get("policy", "all_other_classes")
        attackers = obj.get("attackers", ["bobyqa"])
        if isinstance(attackers, str):
            attackers = [attackers]
        return ExperimentConfig(
            model_path=obj["model"],
            image_set=obj["images"],
            epsilons=[float(e) for e in obj["epsilons"]],
            attackers=list(attackers),
            targets_policy=policy,
            random_target_count=int(targets.get("count", 1)),
            attack_overrides=dict(obj.get("attack", {})),
            output=obj.get("output"),
            seed=int(obj.get("seed", 0)),
            query_grid=obj.get("query_grid"),
            measure_wall_time=bool(obj.get("measure_wall_time", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: malformed experiment config: {exc}") from exc


def random_baseline_attack(
    config: AttackConfig,
    model: ClassifierModel,
    x: InputTensor,
    target: int,
    counter: QueryCounter,
    query_fn=None,
) -> AttackResult:
    """Random direct search: flip a random patch to +/-epsilon, keep improvements.

    Shares the budget, feasibility, and early-exit contracts of the
    trust-region attacker so the two are comparable query for query.
    """
    if query_fn is None:
        query_fn = oracle.query
    h, w, c = x.shape
    l, u = x.bounds
    rng = np.random.default_rng(config.seed)
    start = counter.count

    def perturbed(eta):
        return InputTensor(x.shape, reproject(x.data + eta, l, u), x.bounds)

    eta_best = np.zeros(x.n)
    trace: list[tuple[int, float]] = []

    probs = query_fn(model, perturbed(eta_best), counter)
    if not 0 <= target < probs.size:
        raise ValueError(f"target class {target} out of range")
    best_loss = adversarial_loss(probs, target)
    trace.append((counter.count - start, best_loss))
    success = is_adversarial(probs, target)

    max_side = max(1, min(h, w) // 2)
    while not success and not counter.exhausted:
        side = int(rng.integers(1, max_side + 1))
        i0 = int(rng.integers(0, h - side + 1))
        j0 = int(rng.integers(0, w - side + 1))
        candidate = eta_best.reshape(h, w, c).copy()
        candidate[i0 : i0 + side, j0 : j0 + side, :] = rng.choice(
            (-config.epsilon, config.epsilon), size=(side, side, c)
        )
        candidate = candidate.ravel()
        probs = query_fn(model, perturbed(candidate), counter)
        value = adversarial_loss(probs, target)
        if is_adversarial(probs, target):
            success = True
        if value < best_loss or success:
            best_loss = value
            eta_best = candidate
            trace.append((counter.count - start, value))

    verified = False
    if success:
        final = oracle.forward(model, perturbed(eta_best))
        verified = bool(np.argmax(final) == target)
    return AttackResult(
        success=success,
        queries_used=counter.count - start,
        final_perturbation=eta_best,
        loss_trace=trace,
        levels_completed=0,
        verified=verified,
    )


_ATTACK_FNS = {"bobyqa": run_attack, "random_baseline": random_baseline_attack}


def _attack_seed(campaign_seed: int, record_index: int) -> int:
    # derived from (campaign seed, record index) so scheduling order is irrelevant
    return int(np.random.SeedSequence([campaign_seed, record_index]).generate_state(1)[0])


def _cell_key(attacker: str, eps: float) -> str:
    return f"{attacker}|eps={eps:g}"


def default_query_grid(n_max: int) -> list[int]:
    return sorted({max(1, math.ceil(n_max * k / 10)) for k in range(1, 11)})


def compute_cdf(records: list[AttackRecord], query_grid: list[int]) -> list[tuple[int, float]]:
    """Fraction of records succeeding within each query threshold."""
    if not records:
        raise ValueError("cannot compute a CDF over an empty record cell")
    total = len(records)
    return [
        (t, sum(1 for r in records if r.success and r.queries_used <= t) / total)
        for t in sorted(query_grid)
    ]


def run_campaign(config: ExperimentConfig):
    """Run every (image, target, epsilon, attacker) attack cell.

    Returns (records, summary). Deterministic for a fixed seed: per-attack
    seeds derive from the campaign seed and the record's position, not from
    scheduling order. Wall time is informational and the one nondeterministic
    column; disable ``measure_wall_time`` for byte-stable output.
    """
    model = oracle.load_model(config.model_path)
    images = load_image_set(config.image_set)
    overrides = dict(config.attack_overrides)
    n_max = int(overrides.pop("n_max", 3000))

    # original class is whatever the model says about the clean image
    originals = {
        image_id: int(np.argmax(oracle.forward(model, img)))
        for image_id, img, _label in images
    }

    plans: list[tuple[str, InputTensor, int, int, float, str]] = []
    for img_idx, (image_id, img, _label) in enumerate(images):
        original = originals[image_id]
        if config.targets_policy == "all_other_classes":
            targets = [t for t in range(model.num_classes) if t != original]
        else:
            t_rng = np.random.default_rng(
                np.random.SeedSequence([config.seed, 7919, img_idx])
            )
            pool = [t for t in range(model.num_classes) if t != original]
            count = min(config.random_target_count, len(pool))
            targets = sorted(t_rng.choice(pool, size=count, replace=False).tolist())
        for target in targets:
            for eps in config.epsilons:
                for attacker in config.attackers:
                    plans.append((image_id, img, original, target, eps, attacker))

    records: list[AttackRecord] = []
    skipped: list[dict] = []
    for index, (image_id, img, original, target, eps, attacker) in enumerate(plans):
        if original == target:
            skipped.append(
                {"image_id": image_id, "target": target, "reason": "already classified as target"}
            )
            continue
        attack_config = AttackConfig(
            epsilon=eps, n_max=n_max, seed=_attack_seed(config.seed, index), **overrides
        )
        counter = QueryCounter(budget=n_max)
        begin = time.perf_counter() if config.measure_wall_time else 0.0
        result = _ATTACK_FNS[attacker](attack_config, model, img, target, counter)
        wall_ms = (
            int(round((time.perf_counter() - begin) * 1000.0))
            if config.measure_wall_time
            else 0
        )
        records.append(
            AttackRecord(
                image_id=image_id,
                original_class=original,
                target_class=target,
                eps=eps,
                attacker=attacker,
                success=result.success,
                queries_used=result.queries_used,
                wall_ms=wall_ms,
            )
        )

    grid = [int(t) for t in config.query_grid] if config.query_grid else default_query_grid(n_max)
    cells: dict[str, dict] = {}
    for attacker in config.attackers:
        for eps in config.epsilons:
            cell = [r for r in records if r.attacker == attacker and r.eps == eps]
            if not cell:
                continue
            succ_queries = sorted(r.queries_used for r in cell if r.success)
            cells[_cell_key(attacker, eps)] = {
                "attacker": attacker,
                "eps": eps,
                "records": len(cell),
                "success_rate": sum(r.success for r in cell) / len(cell),
                "median_queries_success": (
                    float(np.median(succ_queries)) if succ_queries else None
                ),
                "cdf": compute_cdf(cell, grid),
            }
    summary = {
        "total_records": len(records),
        "skipped": skipped,
        "query_grid": grid,
        "cells": cells,
    }
    return records, summary


def write_records_csv(records: list[AttackRecord], path: str) -> None:
    """Write the per-attack records with the mandatory header row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.image_id,
                    r.original_class,
                    r.target_class,
                    f"{r.eps:g}",
                    r.attacker,
                    "true" if r.success else "false",
                    r.queries_used,
                    r.wall_ms,
                ]
            )


def write_summary_json(summary: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
