"""Positioning-error statistics and the experiment harness.

Error statistics use the population form (divisor N) for the standard
deviation. Experiments pair a feature layout with a training topology
(network-level: one pooled model; cell-specific: one model per serving cell,
test errors pooled across cells) and a model kind (neural network or
regression tree). Every stochastic stage derives its own seed from the
descriptor seed, so reports are reproducible and independent of execution
order or parallelism.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dtree import TreeConfig, fit_tree, leaf_nodes, predict_tree, tree_depth
from .fingerprint import (
    Dataset,
    FeatureConfig,
    atomic_write_text,
    build_dataset,
    extract_features_layout,
    normalize,
    partition_by_cell,
)
from .mlp import MlpArchitecture, TrainConfig, init_model, predict, train
from .seeds import derive_seed

log = logging.getLogger(__name__)

TOPOLOGIES = ("network_level", "cell_specific")
MODEL_KINDS = ("mlp", "dtree")
REPORT_PERCENTILES = (50, 80, 90)


@dataclass(frozen=True)
class ErrorStats:
    """Eq-style summary: mean, population std (divisor N), and the samples."""

    mean: float
    std: float
    n: int
    errors: np.ndarray

    def summary(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n}


def euclidean_errors(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return np.sqrt(((pred - truth) ** 2).sum(axis=1))


def error_stats(errors) -> ErrorStats:
    errors = np.asarray(errors, dtype=float).ravel()
    if len(errors) == 0:
        raise ValueError("empty error list")
    return ErrorStats(
        mean=float(np.mean(errors)),
        std=float(np.std(errors)),
        n=len(errors),
        errors=errors,
    )


def error_cdf(errors) -> list[tuple[float, float]]:
    """Empirical CDF sampled at the sorted unique error values."""
    errors = np.asarray(errors, dtype=float).ravel()
    if len(errors) == 0:
        raise ValueError("empty error list")
    values, counts = np.unique(errors, return_counts=True)
    fractions = np.cumsum(counts) / len(errors)
    return [(float(v), float(f)) for v, f in zip(values, fractions)]


def percentile_nearest_rank(errors, p: float) -> float:
    """Smallest value with at least p percent of the samples at or below it."""
    errors = np.sort(np.asarray(errors, dtype=float).ravel())
    if len(errors) == 0:
        raise ValueError("empty error list")
    if not 0 < p <= 100:
        raise ValueError("percentile must be in (0, 100]")
    rank = int(np.ceil(p / 100.0 * len(errors)))
    return float(errors[rank - 1])


@dataclass(frozen=True)
class ExperimentDescriptor:
    """One arm of the study: features x topology x model x seed."""

    experiment_id: str
    feature_config: FeatureConfig
    topology: str = "network_level"
    model_kind: str = "mlp"
    hidden_layers: tuple[int, ...] = (64,)
    train_config: TrainConfig = field(default_factory=TrainConfig)
    tree_config: TreeConfig = field(default_factory=TreeConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.experiment_id:
            raise ValueError("experiment_id must be non-empty")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
        if isinstance(self.hidden_layers, list):
            object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))

    def summary(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "feature_config": dataclasses.asdict(self.feature_config),
            "topology": self.topology,
            "model_kind": self.model_kind,
            "hidden_layers": list(self.hidden_layers),
            "seed": self.seed,
        }


@dataclass
class EvalReport:
    experiment_id: str
    descriptor: dict
    train_stats: ErrorStats
    test_stats: ErrorStats
    cdf: list[tuple[float, float]]
    percentiles: dict
    model_info: dict
    baseline_test_mean: float
    per_cell: dict | None = None

    def to_dict(self) -> dict:
        doc = {
            "experiment_id": self.experiment_id,
            "descriptor": self.descriptor,
            "train": self.train_stats.summary(),
            "test": self.test_stats.summary(),
            "cdf": [[v, f] for v, f in self.cdf],
            "percentiles": self.percentiles,
            "model": self.model_info,
            "baseline_test_mean": self.baseline_test_mean,
        }
        if self.per_cell is not None:
            doc["per_cell"] = self.per_cell
        return doc


def prepare_data(samples, descriptor: ExperimentDescriptor, split_fraction: float = 0.9, min_cell_size: int = 50):
    """Datasets for one descriptor: pooled, or one per serving cell."""
    if descriptor.topology == "network_level":
        return build_dataset(samples, descriptor.feature_config, split_fraction,
                             derive_seed(descriptor.seed, "split"))
    return partition_by_cell(samples, descriptor.feature_config, split_fraction,
                             derive_seed(descriptor.seed, "partition"), min_size=min_cell_size)


def _expected_layout(descriptor: ExperimentDescriptor) -> tuple[str, ...]:
    fc = descriptor.feature_config
    if descriptor.topology == "cell_specific":
        fc = dataclasses.replace(fc, include_serving_cell_id=False)
    return extract_features_layout(fc)


def _fit_and_predict(dataset: Dataset, descriptor: ExperimentDescriptor, *seed_labels):
    """Train one model on the dataset's train rows; predict all rows.

    The tree consumes raw features (threshold splits are scale-free). The
    network consumes normalized features, and trains against labels
    standardized with train-row statistics so that optimization behaves the
    same whether a model covers one cell block or the whole deployment;
    predictions are mapped back to meters before any error is computed.
    """
    x, y = dataset.features, dataset.labels
    tr = dataset.train_idx
    if descriptor.model_kind == "mlp":
        arch = MlpArchitecture(input_dim=x.shape[1], hidden_layers=descriptor.hidden_layers)
        model = init_model(arch, derive_seed(descriptor.seed, *seed_labels, "init"))
        cfg = dataclasses.replace(descriptor.train_config, seed=derive_seed(descriptor.seed, *seed_labels, "shuffle"))
        label_mean = y[tr].mean(axis=0)
        label_std = y[tr].std(axis=0)
        label_std = np.where(label_std == 0.0, 1.0, label_std)
        train(model, normalize(dataset, x[tr]), (y[tr] - label_mean) / label_std, cfg)
        pred = predict(model, x, (dataset.mean, dataset.std)) * label_std + label_mean
        info = {
            "kind": "mlp",
            "hidden_layers": list(descriptor.hidden_layers),
            "epochs_trained": len(model.training_log),
            "best_train_loss": min(model.training_log),
        }
    else:
        tree = fit_tree(x[tr], y[tr], descriptor.tree_config)
        pred = predict_tree(tree, x)
        info = {
            "kind": "dtree",
            "depth": tree_depth(tree),
            "leaves": len(leaf_nodes(tree)),
            "max_depth": descriptor.tree_config.max_depth,
            "min_samples_leaf": descriptor.tree_config.min_samples_leaf,
        }
    return pred, info


def _centroid_errors(dataset: Dataset) -> np.ndarray:
    centroid = dataset.labels[dataset.train_idx].mean(axis=0)
    return euclidean_errors(np.tile(centroid, (len(dataset.test_idx), 1)), dataset.labels[dataset.test_idx])


def run_experiment(data, descriptor: ExperimentDescriptor) -> EvalReport:
    """Train and evaluate one experiment arm.

    `data` is the object prepare_data returned for this descriptor: a single
    Dataset for network-level topology, a cell_id -> Dataset map for
    cell-specific. Cell-specific test errors are pooled across cells (sorted
    by cell id) so topologies are compared on one test population.
    """
    expected = _expected_layout(descriptor)
    per_cell = None
    if descriptor.topology == "network_level":
        if data.layout != expected:
            raise ValueError(f"dataset layout {data.layout} does not match descriptor features {expected}")
        pred, info = _fit_and_predict(data, descriptor, "net")
        train_err = euclidean_errors(pred[data.train_idx], data.labels[data.train_idx])
        test_err = euclidean_errors(pred[data.test_idx], data.labels[data.test_idx])
        baseline_err = _centroid_errors(data)
    else:
        if not data:
            raise ValueError("cell_specific topology received no per-cell datasets")
        train_parts, test_parts, baseline_parts = [], [], []
        per_cell = {}
        info = {"kind": descriptor.model_kind, "cells": {}}
        for cell_id in sorted(data):
            dataset = data[cell_id]
            if dataset.layout != expected:
                raise ValueError(f"cell {cell_id} layout does not match descriptor features")
            pred, cell_info = _fit_and_predict(dataset, descriptor, "cell", cell_id)
            cell_train = euclidean_errors(pred[dataset.train_idx], dataset.labels[dataset.train_idx])
            cell_test = euclidean_errors(pred[dataset.test_idx], dataset.labels[dataset.test_idx])
            train_parts.append(cell_train)
            test_parts.append(cell_test)
            baseline_parts.append(_centroid_errors(dataset))
            stats = error_stats(cell_test)
            per_cell[str(cell_id)] = {
                "n_train": len(dataset.train_idx),
                "n_test": len(dataset.test_idx),
                "test_mean": stats.mean,
                "test_std": stats.std,
            }
            info["cells"][str(cell_id)] = cell_info
        train_err = np.concatenate(train_parts)
        test_err = np.concatenate(test_parts)
        baseline_err = np.concatenate(baseline_parts)
        if descriptor.model_kind == "mlp":
            info["hidden_layers"] = list(descriptor.hidden_layers)

    test_stats = error_stats(test_err)
    return EvalReport(
        experiment_id=descriptor.experiment_id,
        descriptor=descriptor.summary(),
        train_stats=error_stats(train_err),
        test_stats=test_stats,
        cdf=error_cdf(test_err),
        percentiles={f"p{p}": percentile_nearest_rank(test_err, p) for p in REPORT_PERCENTILES},
        model_info=info,
        baseline_test_mean=float(np.mean(baseline_err)),
        per_cell=per_cell,
    )


def _run_one(samples, descriptor: ExperimentDescriptor, split_fraction: float, min_cell_size: int) -> EvalReport:
    data = prepare_data(samples, descriptor, split_fraction, min_cell_size)
    return run_experiment(data, descriptor)


def run_matrix(
    samples,
    descriptors: list[ExperimentDescriptor],
    split_fraction: float = 0.9,
    min_cell_size: int = 50,
    jobs: int = 1,
):
    """Run every experiment; failures are recorded and the matrix continues.

    Returns (reports, failures) with failures as {experiment_id, error}
    entries. Results do not depend on `jobs`.
    """
    ids = [d.experiment_id for d in descriptors]
    if len(ids) != len(set(ids)):
        raise ValueError("experiment ids are not unique")

    reports: list[EvalReport] = []
    failures: list[dict] = []
    if jobs > 1 and len(descriptors) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                d.experiment_id: pool.submit(_run_one, samples, d, split_fraction, min_cell_size)
                for d in descriptors
            }
            for d in descriptors:
                try:
                    reports.append(futures[d.experiment_id].result())
                except Exception as err:
                    log.error("experiment %s failed: %s", d.experiment_id, err)
                    failures.append({"experiment_id": d.experiment_id, "error": str(err)})
        return reports, failures

    cache: dict = {}
    for d in descriptors:
        try:
            key = (d.feature_config, d.topology, d.seed, split_fraction)
            if key not in cache:
                cache[key] = prepare_data(samples, d, split_fraction, min_cell_size)
            reports.append(run_experiment(cache[key], d))
        except Exception as err:
            log.error("experiment %s failed: %s", d.experiment_id, err)
            failures.append({"experiment_id": d.experiment_id, "error": str(err)})
    return reports, failures


def comparison_rows(reports: list[EvalReport]) -> list[dict]:
    """Flat summary table, one row per report, sorted by experiment id."""
    rows = []
    for report in sorted(reports, key=lambda r: r.experiment_id):
        fc = report.descriptor["feature_config"]
        rows.append(
            {
                "experiment_id": report.experiment_id,
                "model": report.descriptor["model_kind"],
                "topology": report.descriptor["topology"],
                "n_serving_beams": fc["n_serving_beams"],
                "n_neighbor_cells": fc["n_neighbor_cells"],
                "hidden_layers": "x".join(str(w) for w in report.descriptor["hidden_layers"]),
                "train_mean_m": report.train_stats.mean,
                "test_mean_m": report.test_stats.mean,
                "test_std_m": report.test_stats.std,
                "p50_m": report.percentiles["p50"],
                "p80_m": report.percentiles["p80"],
                "p90_m": report.percentiles["p90"],
                "baseline_test_mean_m": report.baseline_test_mean,
            }
        )
    return rows


def save_report(report: EvalReport, path: str) -> None:
    atomic_write_text(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def save_comparison_csv(reports: list[EvalReport], path: str) -> None:
    rows = comparison_rows(reports)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()) if rows else ["experiment_id"])
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    atomic_write_text(path, buf.getvalue())


def save_cdf_csv(report: EvalReport, path: str) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["error_m", "fraction"])
    for value, fraction in report.cdf:
        writer.writerow([repr(value), repr(fraction)])
    atomic_write_text(path, buf.getvalue())
