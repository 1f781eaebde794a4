"""Feedforward neural-network regressor built on plain numpy.

Tanh hidden layers, linear 2-output head, MSE loss, reverse-mode gradients,
Adam updates over shuffled mini-batches, early stopping on training loss with
best-parameter restore. Everything is deterministic for a fixed seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh",)
OUTPUT_ACTIVATIONS = ("linear",)


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    hidden_layers: tuple[int, ...] = (64,)
    output_dim: int = 2
    hidden_activation: str = "tanh"
    output_activation: str = "linear"

    def __post_init__(self):
        if isinstance(self.hidden_layers, list):
            object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if any(w < 1 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be >= 1")
        if self.hidden_activation not in ACTIVATIONS:
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unsupported output activation {self.output_activation!r}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.output_dim)


@dataclass
class MlpModel:
    architecture: MlpArchitecture
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    training_log: list[float] = field(default_factory=list)

    def copy_params(self):
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 500
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 20
    min_delta: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


def init_model(arch: MlpArchitecture, seed: int = 0) -> MlpModel:
    """Symmetric scaled-uniform weights, scale 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    dims = arch.layer_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(architecture=arch, weights=weights, biases=biases)


def _check_batch(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[1] != model.architecture.input_dim:
        raise ValueError(f"expected {model.architecture.input_dim} input columns, got {batch.shape[1]}")
    return batch


def _forward_cached(model: MlpModel, batch: np.ndarray) -> list[np.ndarray]:
    """Activations per layer, input first, linear output last."""
    activations = [batch]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = activations[-1] @ w + b
        activations.append(z if i == last else np.tanh(z))
    return activations


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    return _forward_cached(model, _check_batch(model, batch))[-1]


def loss_mse(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def backward(model: MlpModel, batch: np.ndarray, target: np.ndarray):
    """Exact gradients of loss_mse(forward(batch), target) w.r.t. all params.

    Returns (weight_grads, bias_grads) shaped like model.weights/model.biases.
    """
    batch = _check_batch(model, batch)
    target = np.atleast_2d(np.asarray(target, dtype=float))
    activations = _forward_cached(model, batch)
    pred = activations[-1]
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")

    weight_grads = [np.empty_like(w) for w in model.weights]
    bias_grads = [np.empty_like(b) for b in model.biases]
    delta = 2.0 * (pred - target) / pred.size
    for layer in range(len(model.weights) - 1, -1, -1):
        weight_grads[layer] = activations[layer].T @ delta
        bias_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (1.0 - activations[layer] ** 2)
    return weight_grads, bias_grads


def train(model: MlpModel, features: np.ndarray, labels: np.ndarray, config: TrainConfig | None = None) -> MlpModel:
    """Adam over seeded shuffled mini-batches, early stop on training loss.

    Mutates and returns `model`, with the best-loss parameters restored and
    the per-epoch training-loss history in model.training_log.
    """
    config = config or TrainConfig()
    features = _check_batch(model, features)
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    if len(features) == 0:
        raise ValueError("empty training set")
    if len(features) != len(labels):
        raise ValueError("features and labels row counts differ")

    rng = np.random.default_rng(config.seed)
    params = model.weights + model.biases
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    step = 0

    best_loss = np.inf
    best_params = model.copy_params()
    reference_loss = np.inf  # last loss that counted as an improvement
    stale_epochs = 0
    model.training_log = []

    for _ in range(config.max_epochs):
        order = rng.permutation(len(features))
        for start in range(0, len(order), config.batch_size):
            rows = order[start : start + config.batch_size]
            weight_grads, bias_grads = backward(model, features[rows], labels[rows])
            step += 1
            correction1 = 1.0 - config.beta1**step
            correction2 = 1.0 - config.beta2**step
            for p, g, m, v in zip(params, weight_grads + bias_grads, m_state, v_state):
                m *= config.beta1
                m += (1.0 - config.beta1) * g
                v *= config.beta2
                v += (1.0 - config.beta2) * g * g
                p -= config.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + config.epsilon)

        epoch_loss = loss_mse(forward(model, features), labels)
        model.training_log.append(epoch_loss)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_params = model.copy_params()
        if epoch_loss < reference_loss - config.min_delta:
            reference_loss = epoch_loss
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= config.patience:
                break

    model.weights, model.biases = best_params
    return model


def predict(model: MlpModel, features: np.ndarray, norm_stats) -> np.ndarray:
    """Positions in meters for raw (unnormalized) feature rows.

    norm_stats is the (mean, std) pair stored with the training dataset;
    std-0 columns divide by 1, mirroring dataset normalization.
    """
    mean, std = (np.asarray(v, dtype=float) for v in norm_stats)
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[1] != len(mean):
        raise ValueError(f"expected {len(mean)} feature columns, got {features.shape[1]}")
    normalized = (features - mean) / np.where(std == 0.0, 1.0, std)
    return forward(model, normalized)


def save_model(model: MlpModel, path: str, norm_stats=None) -> None:
    """JSON export; floats round-trip exactly, so reload is bit-stable."""
    doc = {
        "architecture": {
            "input_dim": model.architecture.input_dim,
            "hidden_layers": list(model.architecture.hidden_layers),
            "output_dim": model.architecture.output_dim,
            "hidden_activation": model.architecture.hidden_activation,
            "output_activation": model.architecture.output_activation,
        },
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "training_log": model.training_log,
    }
    if norm_stats is not None:
        mean, std = norm_stats
        doc["norm_mean"] = np.asarray(mean, dtype=float).tolist()
        doc["norm_std"] = np.asarray(std, dtype=float).tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_model(path: str):
    """Returns (model, norm_stats or None)."""
    with open(path) as fh:
        doc = json.load(fh)
    arch = MlpArchitecture(**doc["architecture"])
    model = MlpModel(
        architecture=arch,
        weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
        training_log=list(doc["training_log"]),
    )
    norm_stats = None
    if "norm_mean" in doc:
        norm_stats = (np.asarray(doc["norm_mean"], dtype=float), np.asarray(doc["norm_std"], dtype=float))
    return model, norm_stats
