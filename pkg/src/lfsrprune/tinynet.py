"""Small fully-connected network with LFSR-targeted regularization and pruning.

Weights are stored input-major (``rows`` = inputs, ``cols`` = outputs), so a
layer computes ``z = x @ W + b``. Hidden layers use ReLU, the output layer
softmax; the data loss is mean cross-entropy.

The pipeline is: dense training -> mask generation -> regularize (prune-set
weights decay toward zero) -> prune -> retrain with pruned weights pinned.
"""
from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .masks import Mask, generate_mask

PHASES = ("train", "regularize", "retrain")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    reg_strength: float = 2.0
    reg_kind: str = "l2"
    batch_size: int = 32
    train_epochs: int = 20
    reg_epochs: int = 10
    retrain_epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.reg_strength < 0:
            raise ConfigError("reg_strength must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        self.reg_kind = self.reg_kind.lower()
        if self.reg_kind not in ("l1", "l2"):
            raise ConfigError(f"reg_kind must be 'l1' or 'l2', got {self.reg_kind!r}")


@dataclass
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    mask: Mask | None = None
    keep: np.ndarray | None = None  # bool rows x cols; None means dense

    def __post_init__(self):
        if self.mask is not None and self.keep is None:
            self.keep = self.mask.keep_matrix()

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def set_mask(self, mask: Mask):
        if (mask.rows, mask.cols) != self.shape:
            raise ValueError(f"mask {mask.rows}x{mask.cols} does not fit layer {self.shape}")
        self.mask = mask
        self.keep = mask.keep_matrix()

    @property
    def prune_set(self) -> np.ndarray | None:
        return None if self.keep is None else ~self.keep

    def sparsity(self) -> float:
        return float(np.mean(self.weights == 0))


@dataclass
class Model:
    layers: list[Layer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError(f"layer sizes do not chain: {a.shape} -> {b.shape}")

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].shape[0]] + [layer.shape[1] for layer in self.layers]

    def copy(self) -> "Model":
        return copy.deepcopy(self)

    def n_weights(self) -> int:
        return sum(layer.weights.size for layer in self.layers)

    def n_kept(self) -> int:
        return sum(int(layer.keep.sum()) if layer.keep is not None else layer.weights.size for layer in self.layers)


def init_model(sizes, seed: int = 0) -> Model:
    """Scaled-uniform init, ``U(-a, a)`` with ``a = sqrt(6 / (fan_in + fan_out))``; zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        a = math.sqrt(6.0 / (n_in + n_out))
        layers.append(Layer(rng.uniform(-a, a, size=(n_in, n_out)), np.zeros(n_out)))
    return Model(layers)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: Model, x: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer, input first and softmax output last.

    Accepts a single feature vector or a batch (one sample per row).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.sizes[0]:
        raise ValueError(f"input length {x.shape[-1]} does not match first layer {model.sizes[0]}")
    acts = [x]
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        z = acts[-1] @ layer.weights + layer.bias
        acts.append(softmax(z) if i == last else np.maximum(z, 0.0))
    return acts


def predict(model: Model, x: np.ndarray) -> np.ndarray:
    return forward(model, x)[-1].argmax(axis=-1)


def evaluate(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    """Top-1 accuracy."""
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty split")
    return float(np.mean(predict(model, x) == y))


def data_loss(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    z = x
    for layer in model.layers[:-1]:
        z = np.maximum(z @ layer.weights + layer.bias, 0.0)
    z = z @ model.layers[-1].weights + model.layers[-1].bias
    z = z - z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-log_p[np.arange(len(y)), y].mean())


def reg_penalty(model: Model, m: int, config: TrainConfig) -> float:
    """Regularizer over the prune set: ``lam/(2m)*sum w^2`` (L2) or ``lam/m*sum |w|`` (L1)."""
    total = 0.0
    for layer in model.layers:
        if layer.keep is None:
            continue
        w = layer.weights[~layer.keep]
        total += 0.5 * np.sum(w * w) if config.reg_kind == "l2" else np.sum(np.abs(w))
    return config.reg_strength / m * total


def loss(model: Model, x: np.ndarray, y: np.ndarray, config: TrainConfig) -> float:
    if len(y) == 0:
        raise ValueError("empty batch")
    return data_loss(model, x, y) + reg_penalty(model, len(y), config)


def data_gradients(model: Model, x: np.ndarray, y: np.ndarray):
    """Backprop of the mean cross-entropy; returns ``[(dW, db), ...]``."""
    acts = forward(model, x)
    m = len(y)
    dz = acts[-1].copy()
    dz[np.arange(m), y] -= 1.0
    dz /= m
    grads = []
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        grads.append((acts[i].T @ dz, dz.sum(axis=0)))
        if i:
            dz = (dz @ layer.weights.T) * (acts[i] > 0)
    return grads[::-1]


def _reg_gradient(w: np.ndarray, m: int, config: TrainConfig) -> np.ndarray:
    scale = config.reg_strength / m
    return scale * w if config.reg_kind == "l2" else scale * np.sign(w)


def update_directions(model: Model, x: np.ndarray, y: np.ndarray, config: TrainConfig, phase: str):
    """Per-layer ``(dW, db)`` such that a step is ``W -= lr * dW``.

    * ``train``: gradient of the full cost (regularizer included where a mask exists).
    * ``regularize``: kept weights follow the data gradient; prune-set weights
      follow the regularizer only.
    * ``retrain``: kept weights follow the data gradient; prune-set entries are zero.
    """
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase!r}")
    m = len(y)
    out = []
    for layer, (dw, db) in zip(model.layers, data_gradients(model, x, y)):
        prune = layer.prune_set
        if prune is not None:
            reg = _reg_gradient(layer.weights, m, config)
            if phase == "train":
                dw = dw + np.where(prune, reg, 0.0)
            elif phase == "regularize":
                dw = np.where(prune, reg, dw)
            else:
                dw = np.where(prune, 0.0, dw)
        out.append((dw, db))
    return out


def sgd_step(model: Model, x: np.ndarray, y: np.ndarray, config: TrainConfig, phase: str) -> Model:
    """One mini-batch update, in place; returns ``model``.

    In the regularize phase prune-set weights only decay:
    ``w *= 1 - lr*lam/m`` (L2) or ``w -= lr*lam/m*sign(w)`` stopped at zero (L1).
    """
    m = len(y)
    decay = config.learning_rate * config.reg_strength / m
    if phase == "regularize" and decay >= 1.0:
        raise ConfigError(f"lr*lam/m = {decay:g} >= 1 would flip weight signs")
    dirs = update_directions(model, x, y, config, phase)
    for layer, (dw, db) in zip(model.layers, dirs):
        prune = layer.prune_set
        if phase == "regularize" and prune is not None:
            w = layer.weights
            if config.reg_kind == "l2":
                decayed = w * (1.0 - decay)
            else:
                decayed = np.sign(w) * np.maximum(np.abs(w) - decay, 0.0)
            layer.weights = np.where(prune, decayed, w - config.learning_rate * dw)
        else:
            layer.weights = layer.weights - config.learning_rate * dw
            if phase == "retrain" and prune is not None:
                layer.weights[prune] = 0.0
        layer.bias = layer.bias - config.learning_rate * db
    return model


def run_epoch(model: Model, x: np.ndarray, y: np.ndarray, config: TrainConfig, phase: str, rng: np.random.Generator):
    order = rng.permutation(len(y))
    for start in range(0, len(y), config.batch_size):
        idx = order[start:start + config.batch_size]
        sgd_step(model, x[idx], y[idx], config, phase)
    return model


def prune(model: Model) -> Model:
    """Zero every prune-set weight, in place."""
    for i, layer in enumerate(model.layers):
        if layer.keep is None:
            raise ValueError(f"layer {i} has no mask")
        layer.weights[~layer.keep] = 0.0
    return model


def mean_abs_pruneset(model: Model) -> float:
    vals = [np.abs(layer.weights[~layer.keep]) for layer in model.layers if layer.keep is not None]
    vals = [v for v in vals if v.size]
    return float(np.concatenate(vals).mean()) if vals else 0.0


def magnitude_prune_baseline(
    model: Model,
    target_sparsity: float,
    iterations: int = 3,
    retrain_epochs: int = 0,
    dataset=None,
    config: TrainConfig | None = None,
) -> Model:
    """Iterative magnitude pruning with retraining between iterations.

    Iteration ``k`` zeroes the ``round(s_k * size)`` smallest-magnitude weights
    of each layer, ``s_k = target * k / iterations``; zeroed positions stay
    pinned during the retraining epochs. Returns a pruned copy.
    """
    if not 0.0 <= target_sparsity < 1.0:
        raise ValueError("target_sparsity must lie in [0, 1)")
    model = model.copy()
    if target_sparsity == 0.0:
        return model
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed + 7)
    for k in range(1, iterations + 1):
        level = target_sparsity * k / iterations
        for layer in model.layers:
            flat = np.abs(layer.weights).ravel()
            n_zero = int(math.floor(level * flat.size + 0.5))
            keep = np.ones(flat.size, dtype=bool)
            keep[np.argsort(flat, kind="stable")[:n_zero]] = False
            if layer.keep is not None:
                keep &= layer.keep.ravel()
            layer.mask = None
            layer.keep = keep.reshape(layer.weights.shape)
            layer.weights[~layer.keep] = 0.0
        if dataset is not None:
            for _ in range(retrain_epochs):
                run_epoch(model, dataset.x_train, dataset.y_train, config, "retrain", rng)
    return model


@dataclass
class PipelineReport:
    sparsity: float
    config: TrainConfig
    dense_acc: float
    regularized_acc: float
    pruned_acc: float
    retrained_acc: float
    mean_abs_pruneset_weight: float
    layer_sparsity: list[float]
    masks: list[Mask]
    compression_rate: float
    history: list[dict] = field(default_factory=list)
    model: Model | None = None

    CSV_COLUMNS = ("stage", "epoch", "train_acc", "test_acc", "sparsity", "mean_abs_pruneset_weight")

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=self.CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(self.history)

    def summary(self) -> dict:
        return {
            "sparsity": self.sparsity,
            "config": asdict(self.config),
            "dense_acc": self.dense_acc,
            "regularized_acc": self.regularized_acc,
            "pruned_acc": self.pruned_acc,
            "retrained_acc": self.retrained_acc,
            "mean_abs_pruneset_weight": self.mean_abs_pruneset_weight,
            "layer_sparsity": self.layer_sparsity,
            "compression_rate": self.compression_rate,
            "masks": [m.to_record() for m in self.masks],
        }

    def summary_text(self) -> str:
        return json.dumps(self.summary(), indent=2)


def compression_rate(n_dense: int, n_kept: int) -> float:
    return n_dense / n_kept


def run_pipeline(dataset, sizes, config: TrainConfig, sparsity: float, mask_seed: int | None = None,
                 dense_model: Model | None = None) -> PipelineReport:
    """Train, mask, regularize, prune and retrain; returns a :class:`PipelineReport`.

    ``dense_model`` skips the dense training stage (it is copied, not modified).
    Layer ``i`` uses mask seed ``mask_seed + i`` (default ``config.seed + 1``).
    """
    sizes = list(sizes)
    if sizes[0] != dataset.n_features:
        raise ValueError(f"first layer expects {sizes[0]} features, dataset has {dataset.n_features}")
    rng = np.random.default_rng(config.seed)
    history = []

    def record(stage, epoch, model):
        history.append({
            "stage": stage,
            "epoch": epoch,
            "train_acc": evaluate(model, dataset.x_train, dataset.y_train),
            "test_acc": evaluate(model, dataset.x_test, dataset.y_test),
            "sparsity": float(np.mean([layer.sparsity() for layer in model.layers])),
            "mean_abs_pruneset_weight": mean_abs_pruneset(model),
        })
        return history[-1]["test_acc"]

    if dense_model is None:
        model = init_model(sizes, config.seed)
        for epoch in range(config.train_epochs):
            run_epoch(model, dataset.x_train, dataset.y_train, config, "train", rng)
            dense_acc = record("train", epoch + 1, model)
        if config.train_epochs == 0:
            dense_acc = record("train", 0, model)
    else:
        model = dense_model.copy()
        dense_acc = record("train", 0, model)

    seed0 = config.seed + 1 if mask_seed is None else mask_seed
    masks = []
    for i, layer in enumerate(model.layers):
        if sparsity == 0.0:
            rows, cols = layer.shape
            layer.keep = np.ones((rows, cols), dtype=bool)
            continue
        mask = generate_mask(*layer.shape, sparsity, seed=seed0 + i)
        layer.set_mask(mask)
        masks.append(mask)

    reg_acc = dense_acc
    for epoch in range(config.reg_epochs):
        run_epoch(model, dataset.x_train, dataset.y_train, config, "regularize", rng)
        reg_acc = record("regularize", epoch + 1, model)
    mean_abs = mean_abs_pruneset(model)

    prune(model)
    pruned_acc = record("prune", 0, model)

    retrained_acc = pruned_acc
    for epoch in range(config.retrain_epochs):
        run_epoch(model, dataset.x_train, dataset.y_train, config, "retrain", rng)
        retrained_acc = record("retrain", epoch + 1, model)

    return PipelineReport(
        sparsity=sparsity,
        config=config,
        dense_acc=dense_acc,
        regularized_acc=reg_acc,
        pruned_acc=pruned_acc,
        retrained_acc=retrained_acc,
        mean_abs_pruneset_weight=mean_abs,
        layer_sparsity=[layer.sparsity() for layer in model.layers],
        masks=masks,
        compression_rate=compression_rate(model.n_weights(), model.n_kept()),
        history=history,
        model=model,
    )
