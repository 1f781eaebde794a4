"""Labeled fingerprint datasets from per-beam RSRP maps.

Pipeline: evaluate the beam grid at every street location, keep the beams
above the noise floor as the location's fingerprint, pick the serving cell as
the owner of the globally strongest beam, keep LoS locations, and flatten
each fingerprint into a fixed-layout feature vector (serving beam IDs and
RSRPs, optional serving cell ID, then one strongest beam per neighbor cell).
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .propagation import PropagationConfig, rsrp_grid
from .scenario import Scenario, enumerate_locations
from .seeds import derive_seed

log = logging.getLogger(__name__)

ID_ENCODINGS = ("numeric", "one_hot")


@dataclass(frozen=True)
class FingerprintSample:
    """One location's labeled beam measurement snapshot."""

    location: tuple[float, float]
    rsrp: dict
    serving_cell: int
    los_to_serving: bool

    def __post_init__(self):
        if not self.rsrp:
            raise ValueError("sample rsrp map is empty")
        if self.serving_cell not in {cell for cell, _ in self.rsrp}:
            raise ValueError(f"serving cell {self.serving_cell} absent from rsrp keys")


@dataclass(frozen=True)
class FeatureConfig:
    """Feature layout: how many serving beams, neighbor cells, and ID fields.

    With numeric ID encoding (default) the vector length is
    2*n_serving_beams + (1 if include_serving_cell_id) + 3*n_neighbor_cells.
    One-hot encoding expands every ID field to its configured cardinality.
    """

    n_serving_beams: int = 3
    n_neighbor_cells: int = 0
    include_serving_cell_id: bool = True
    id_encoding: str = "numeric"
    one_hot_cells: int = 0
    one_hot_beams: int = 0

    def __post_init__(self):
        if not 1 <= self.n_serving_beams <= 8:
            raise ValueError("n_serving_beams must be in 1..8")
        if not 0 <= self.n_neighbor_cells <= 4:
            raise ValueError("n_neighbor_cells must be in 0..4")
        if self.id_encoding not in ID_ENCODINGS:
            raise ValueError(f"id_encoding must be one of {ID_ENCODINGS}")
        if self.id_encoding == "one_hot" and (self.one_hot_cells < 1 or self.one_hot_beams < 1):
            raise ValueError("one_hot encoding needs one_hot_cells and one_hot_beams cardinalities")


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: tuple[str, ...]


class FeatureExtractionError(ValueError):
    """Sample cannot fill the configured layout; `reason` is a counted label."""

    def __init__(self, reason: str, detail: str):
        super().__init__(f"{reason}: {detail}")
        self.reason = reason


def select_serving(sample_rsrp: dict) -> int:
    """Cell owning the maximum RSRP entry; ties to lowest (cell_id, beam_id)."""
    if not sample_rsrp:
        raise ValueError("empty rsrp map")
    best = max(sample_rsrp.values())
    return min(key for key, value in sample_rsrp.items() if value == best)[0]


def generate_samples(scenario: Scenario, prop_config: PropagationConfig | None = None) -> list[FingerprintSample]:
    """One sample per street-grid location.

    The fingerprint keeps every beam strictly above the noise floor. Rare
    locations hearing no beam at all (possible with an aggressive floor) are
    dropped and counted in the log.
    """
    prop_config = prop_config or PropagationConfig()
    locations = enumerate_locations(scenario)
    if len(locations) == 0:
        raise ValueError("scenario has no street locations to sample")
    grid = rsrp_grid(scenario, locations, prop_config)
    site_index = {site.id: i for i, site in enumerate(scenario.sites)}
    keys = [(ref.cell_id, ref.beam_id) for ref in grid.beams]
    cell_to_site = {ref.cell_id: ref.site_id for ref in grid.beams}

    audible = grid.rsrp > prop_config.noise_floor
    samples: list[FingerprintSample] = []
    silent = 0
    for row in range(len(locations)):
        cols = np.flatnonzero(audible[row])
        if len(cols) == 0:
            silent += 1
            continue
        rsrp = {keys[c]: float(grid.rsrp[row, c]) for c in cols}
        serving = select_serving(rsrp)
        los = bool(grid.site_los[row, site_index[cell_to_site[serving]]])
        samples.append(
            FingerprintSample(
                location=(float(locations[row, 0]), float(locations[row, 1])),
                rsrp=rsrp,
                serving_cell=serving,
                los_to_serving=los,
            )
        )
    if silent:
        log.warning("dropped %d locations with no beam above the noise floor", silent)
    return samples


def filter_los(samples: list[FingerprintSample]) -> list[FingerprintSample]:
    """Keep exactly the samples with line of sight to their serving cell."""
    return [s for s in samples if s.los_to_serving]


def _encode_id(value: int, dim: int, tag: str, config: FeatureConfig):
    if config.id_encoding == "numeric":
        return [float(value)], [tag]
    if value >= dim:
        raise ValueError(f"{tag}={value} exceeds one-hot cardinality {dim}")
    one_hot = [0.0] * dim
    one_hot[value] = 1.0
    return one_hot, [f"{tag}[{k}]" for k in range(dim)]


def extract_features(sample: FingerprintSample, config: FeatureConfig) -> FeatureVector:
    """Flatten a sample into the configured fixed layout.

    Serving beams are ranked by RSRP descending (ties to lower beam_id);
    neighbor cells by their strongest beam's RSRP descending (ties to lower
    cell_id), each contributing its single strongest beam.
    """
    serving = sorted(
        ((beam, value) for (cell, beam), value in sample.rsrp.items() if cell == sample.serving_cell),
        key=lambda item: (-item[1], item[0]),
    )
    if len(serving) < config.n_serving_beams:
        raise FeatureExtractionError(
            "insufficient_serving_beams",
            f"need {config.n_serving_beams}, sample has {len(serving)}",
        )

    strongest_per_cell: dict[int, tuple[int, float]] = {}
    for (cell, beam), value in sample.rsrp.items():
        if cell == sample.serving_cell:
            continue
        current = strongest_per_cell.get(cell)
        if current is None or (value, -beam) > (current[1], -current[0]):
            strongest_per_cell[cell] = (beam, value)
    neighbors = sorted(strongest_per_cell.items(), key=lambda item: (-item[1][1], item[0]))
    if len(neighbors) < config.n_neighbor_cells:
        raise FeatureExtractionError(
            "insufficient_neighbors",
            f"need {config.n_neighbor_cells}, sample has {len(neighbors)}",
        )

    values: list[float] = []
    layout: list[str] = []
    for rank, (beam, _) in enumerate(serving[: config.n_serving_beams], start=1):
        v, names = _encode_id(beam, config.one_hot_beams, f"serving_beam_id_{rank}", config)
        values += v
        layout += names
    for rank, (_, value) in enumerate(serving[: config.n_serving_beams], start=1):
        values.append(value)
        layout.append(f"serving_rsrp_{rank}")
    if config.include_serving_cell_id:
        v, names = _encode_id(sample.serving_cell, config.one_hot_cells, "serving_cell_id", config)
        values += v
        layout += names
    for rank, (cell, (beam, value)) in enumerate(neighbors[: config.n_neighbor_cells], start=1):
        v, names = _encode_id(cell, config.one_hot_cells, f"neighbor{rank}_cell_id", config)
        values += v
        layout += names
        v, names = _encode_id(beam, config.one_hot_beams, f"neighbor{rank}_beam_id", config)
        values += v
        layout += names
        values.append(value)
        layout.append(f"neighbor{rank}_rsrp")
    return FeatureVector(values=np.array(values, dtype=float), layout=tuple(layout))


@dataclass
class Dataset:
    """Unnormalized features plus labels, split indices, and train-row stats."""

    features: np.ndarray
    labels: np.ndarray
    layout: tuple[str, ...]
    train_idx: np.ndarray
    test_idx: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.features)


def build_dataset(
    samples: list[FingerprintSample],
    config: FeatureConfig,
    split_fraction: float = 0.9,
    seed: int = 0,
) -> Dataset:
    """Extract features, split train/test, and attach train-row norm stats.

    Samples that cannot fill the layout are dropped; per-reason counts go to
    the log and the dataset provenance. Stats use the population std and are
    computed on training rows only.
    """
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must be in (0, 1)")
    rows, labels = [], []
    dropped: Counter = Counter()
    for sample in samples:
        try:
            fv = extract_features(sample, config)
        except FeatureExtractionError as err:
            dropped[err.reason] += 1
            continue
        rows.append(fv.values)
        labels.append(sample.location)
    if dropped:
        log.warning("dropped samples during feature extraction: %s", dict(dropped))
    if len(rows) < 10:
        raise ValueError(f"need at least 10 usable samples, got {len(rows)}")

    features = np.vstack(rows)
    labels_arr = np.asarray(labels, dtype=float)
    layout = extract_features_layout(config)

    n = len(features)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = min(max(int(n * split_fraction), 1), n - 1)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])

    mean = features[train_idx].mean(axis=0)
    std = features[train_idx].std(axis=0)
    return Dataset(
        features=features,
        labels=labels_arr,
        layout=layout,
        train_idx=train_idx,
        test_idx=test_idx,
        mean=mean,
        std=std,
        provenance={
            "feature_config": dataclasses.asdict(config),
            "split_fraction": split_fraction,
            "seed": seed,
            "dropped": dict(dropped),
        },
    )


def extract_features_layout(config: FeatureConfig) -> tuple[str, ...]:
    """Column names for the configured layout, without needing a sample."""
    layout: list[str] = []

    def id_names(tag):
        if config.id_encoding == "numeric":
            return [tag]
        dim = config.one_hot_beams if "beam" in tag else config.one_hot_cells
        return [f"{tag}[{k}]" for k in range(dim)]

    for rank in range(1, config.n_serving_beams + 1):
        layout += id_names(f"serving_beam_id_{rank}")
    layout += [f"serving_rsrp_{rank}" for rank in range(1, config.n_serving_beams + 1)]
    if config.include_serving_cell_id:
        layout += id_names("serving_cell_id")
    for rank in range(1, config.n_neighbor_cells + 1):
        layout += id_names(f"neighbor{rank}_cell_id")
        layout += id_names(f"neighbor{rank}_beam_id")
        layout.append(f"neighbor{rank}_rsrp")
    return tuple(layout)


def _safe_std(std: np.ndarray) -> np.ndarray:
    return np.where(std == 0.0, 1.0, std)


def normalize(dataset: Dataset, rows: np.ndarray) -> np.ndarray:
    """(x - mean) / std per column with train-derived stats; std 0 divides by 1."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(dataset.mean):
        raise ValueError(f"expected {len(dataset.mean)} columns, got {rows.shape[1]}")
    return (rows - dataset.mean) / _safe_std(dataset.std)


def denormalize(dataset: Dataset, rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(dataset.mean):
        raise ValueError(f"expected {len(dataset.mean)} columns, got {rows.shape[1]}")
    return rows * _safe_std(dataset.std) + dataset.mean


def partition_by_cell(
    samples: list[FingerprintSample],
    config: FeatureConfig,
    split_fraction: float = 0.9,
    seed: int = 0,
    min_size: int = 50,
) -> dict[int, Dataset]:
    """Group samples by serving cell and build one dataset per group.

    The serving-cell ID feature is constant within a group, so it is removed
    from the per-cell layouts. Groups smaller than min_size are skipped and
    logged. Each group gets its own seeded split and normalization stats.
    """
    config = dataclasses.replace(config, include_serving_cell_id=False)
    groups: dict[int, list[FingerprintSample]] = {}
    for sample in samples:
        groups.setdefault(sample.serving_cell, []).append(sample)

    datasets: dict[int, Dataset] = {}
    for cell_id in sorted(groups):
        members = groups[cell_id]
        if len(members) < min_size:
            log.warning("skipping cell %d: %d samples < min_size %d", cell_id, len(members), min_size)
            continue
        datasets[cell_id] = build_dataset(members, config, split_fraction, derive_seed(seed, "cell", cell_id))
    return datasets


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_dataset(dataset: Dataset, csv_path: str) -> None:
    """CSV of unnormalized features + labels, JSON sidecar with everything else.

    Floats are written with repr so a reload is bit-exact.
    """
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(list(dataset.layout) + ["label_x", "label_y"])
    for row, label in zip(dataset.features, dataset.labels):
        writer.writerow([repr(float(v)) for v in row] + [repr(float(label[0])), repr(float(label[1]))])
    atomic_write_text(csv_path, buf.getvalue())
    sidecar = {
        "layout": list(dataset.layout),
        "train_idx": dataset.train_idx.tolist(),
        "test_idx": dataset.test_idx.tolist(),
        "mean": [repr(float(v)) for v in dataset.mean],
        "std": [repr(float(v)) for v in dataset.std],
        "provenance": dataset.provenance,
    }
    atomic_write_text(_sidecar_path(csv_path), json.dumps(sidecar, indent=2, sort_keys=True))


def load_dataset(csv_path: str) -> Dataset:
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = [[float(v) for v in row] for row in reader]
    if header[-2:] != ["label_x", "label_y"]:
        raise ValueError(f"{csv_path} does not look like a saved dataset")
    data = np.asarray(body, dtype=float)
    with open(_sidecar_path(csv_path)) as fh:
        sidecar = json.load(fh)
    return Dataset(
        features=data[:, :-2],
        labels=data[:, -2:],
        layout=tuple(sidecar["layout"]),
        train_idx=np.asarray(sidecar["train_idx"], dtype=int),
        test_idx=np.asarray(sidecar["test_idx"], dtype=int),
        mean=np.array([float(v) for v in sidecar["mean"]]),
        std=np.array([float(v) for v in sidecar["std"]]),
        provenance=sidecar["provenance"],
    )


def _sidecar_path(csv_path: str) -> str:
    return str(csv_path) + ".meta.json"
