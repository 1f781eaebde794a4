"""YAML run configuration.

A run file describes the whole pipeline: scenario geometry, propagation,
dataset splitting, and the experiment matrix. Validation errors always name
the offending section and key so a bad file is quick to fix.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import yaml

from .dtree import TreeConfig
from .evaluation import ExperimentDescriptor
from .fingerprint import FeatureConfig
from .mlp import TrainConfig
from .propagation import PropagationConfig
from .scenario import ScenarioConfig
from .seeds import derive_seed


class ConfigError(Exception):
    """Raised for a missing/invalid config file or a bad section/key."""


@dataclass(frozen=True)
class RunConfig:
    seed: int
    output_dir: str
    scenario: ScenarioConfig
    propagation: PropagationConfig
    split_fraction: float
    min_cell_size: int
    los_only: bool
    experiments: tuple[ExperimentDescriptor, ...]


def _require_map(doc, section: str):
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{section}: expected a mapping, got {type(doc).__name__}")
    return doc


def _build_dataclass(cls, values: dict, section: str, *, coerce_tuples=(), defaults=None):
    """Construct a config dataclass, rejecting unknown keys by name."""
    allowed = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in allowed:
            raise ConfigError(f"{section}: unknown key '{key}'")
    merged = dict(defaults or {})
    merged.update(values)
    for key in coerce_tuples:
        if key in merged and isinstance(merged[key], list):
            merged[key] = tuple(merged[key])
    try:
        return cls(**merged)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{section}: {err}") from err


def _parse_experiment(entry, index: int, global_seed: int) -> ExperimentDescriptor:
    section = f"experiments[{index}]"
    entry = _require_map(entry, section)
    if "id" not in entry or not entry["id"]:
        raise ConfigError(f"{section}: missing required key 'id'")
    exp_id = str(entry["id"])
    section = f"experiments[{exp_id}]"

    known = {"id", "model", "topology", "features", "hidden_layers", "train", "tree", "seed"}
    for key in entry:
        if key not in known:
            raise ConfigError(f"{section}: unknown key '{key}'")

    features = _build_dataclass(
        FeatureConfig, _require_map(entry.get("features"), f"{section}.features"),
        f"{section}.features", coerce_tuples=("one_hot_cells", "one_hot_beams"),
    )
    train_map = _require_map(entry.get("train"), f"{section}.train")
    if "seed" in train_map:
        raise ConfigError(f"{section}.train: key 'seed' is derived from the run seed, set 'seed' on the experiment instead")
    train = _build_dataclass(TrainConfig, train_map, f"{section}.train")
    tree = _build_dataclass(TreeConfig, _require_map(entry.get("tree"), f"{section}.tree"), f"{section}.tree")

    hidden = entry.get("hidden_layers", [64])
    if not isinstance(hidden, (list, tuple)) or not all(isinstance(w, int) for w in hidden):
        raise ConfigError(f"{section}: hidden_layers must be a list of ints")

    seed = entry.get("seed")
    if seed is None:
        seed = derive_seed(global_seed, "experiment", exp_id)
    try:
        return ExperimentDescriptor(
            experiment_id=exp_id,
            feature_config=features,
            topology=entry.get("topology", "network_level"),
            model_kind=entry.get("model", "mlp"),
            hidden_layers=tuple(hidden),
            train_config=train,
            tree_config=tree,
            seed=int(seed),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{section}: {err}") from err


def load_run_config(path: str, seed_override: int | None = None, out_override: str | None = None) -> RunConfig:
    """Parse and validate a YAML run file.

    CLI overrides are applied before seed fan-out, so overriding the seed
    re-derives every stage seed consistently.
    """
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as err:
        raise ConfigError(f"config file {path} is not valid YAML: {err}") from err
    doc = _require_map(doc, "top level")

    known = {"seed", "output_dir", "scenario", "propagation", "dataset", "experiments"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"top level: unknown key '{key}'")

    seed = seed_override if seed_override is not None else doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("top level: seed must be an int")
    output_dir = out_override if out_override is not None else doc.get("output_dir", "out")

    scenario_map = _require_map(doc.get("scenario"), "scenario")
    scenario_defaults = {"seed": derive_seed(seed, "scenario")}
    scenario = _build_dataclass(
        ScenarioConfig, scenario_map, "scenario",
        coerce_tuples=("elevation_steers_deg",), defaults=scenario_defaults,
    )
    propagation = _build_dataclass(
        PropagationConfig, _require_map(doc.get("propagation"), "propagation"), "propagation"
    )

    dataset_map = _require_map(doc.get("dataset"), "dataset")
    for key in dataset_map:
        if key not in {"split_fraction", "min_cell_size", "los_only"}:
            raise ConfigError(f"dataset: unknown key '{key}'")
    split_fraction = dataset_map.get("split_fraction", 0.9)
    if not isinstance(split_fraction, (int, float)) or not 0 < split_fraction < 1:
        raise ConfigError("dataset: split_fraction must be a number in (0, 1)")
    min_cell_size = dataset_map.get("min_cell_size", 50)
    if not isinstance(min_cell_size, int) or min_cell_size < 1:
        raise ConfigError("dataset: min_cell_size must be a positive int")
    los_only = dataset_map.get("los_only", True)
    if not isinstance(los_only, bool):
        raise ConfigError("dataset: los_only must be a bool")

    entries = doc.get("experiments", [])
    if entries is None:
        entries = []
    if not isinstance(entries, list):
        raise ConfigError("experiments: expected a list")
    experiments = tuple(_parse_experiment(e, i, seed) for i, e in enumerate(entries))
    ids = [e.experiment_id for e in experiments]
    if len(ids) != len(set(ids)):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ConfigError(f"experiments: duplicate id '{dupes[0]}'")

    return RunConfig(
        seed=seed,
        output_dir=output_dir,
        scenario=scenario,
        propagation=propagation,
        split_fraction=float(split_fraction),
        min_cell_size=min_cell_size,
        los_only=los_only,
        experiments=experiments,
    )
