"""Feedforward binary classifiers with manual backpropagation.

One model maps stacked feature frames to an ON-probability (ReLU hidden
layers, sigmoid output, binary cross-entropy).  Training is plain
mini-batch SGD with a fixed learning rate, per-epoch seeded shuffling,
and early stopping on development utterance accuracy.  Whole-utterance
decisions average the per-frame probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .features.types import FeatureMatrix

PROB_CLAMP = 1e-7
MODEL_FORMAT_VERSION = 1

ON_LABEL = 1.0
OFF_LABEL = 0.0


@dataclass(frozen=True)
class DnnArchitecture:
    input_dim: int
    hidden: tuple[int, ...]

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if not 1 <= len(self.hidden) <= 3:
            raise ValueError("architecture must have 1 to 3 hidden layers")
        if any(width < 1 for width in self.hidden):
            raise ValueError("hidden widths must be positive")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden, 1]
        return list(zip(dims[:-1], dims[1:]))

    def num_parameters(self) -> int:
        return sum(fan_in * fan_out + fan_out for fan_in, fan_out in self.layer_dims)


@dataclass(eq=False)
class DnnModel:
    architecture: DnnArchitecture
    weights: list[np.ndarray]   # (fan_in, fan_out) per layer
    biases: list[np.ndarray]    # (fan_out,) per layer

    def copy(self) -> "DnnModel":
        return DnnModel(
            self.architecture,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.003
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    balance_classes: bool = False

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be positive")


@dataclass(frozen=True)
class UtteranceDecision:
    mean_prob: float
    label: float          # ON_LABEL or OFF_LABEL
    frame_count: int

    @property
    def is_on(self) -> bool:
        return self.label == ON_LABEL


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_accuracy: float


def init_network(arch: DnnArchitecture, seed: int = 0) -> DnnModel:
    """He-style initialization: N(0, 2/fan_in) weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in arch.layer_dims:
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DnnModel(arch, weights, biases)


def _as_batch(batch) -> np.ndarray:
    values = batch.values if isinstance(batch, FeatureMatrix) else np.asarray(batch, dtype=np.float64)
    return np.atleast_2d(values)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    positive = z >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-z[positive]))
    expz = np.exp(z[~positive])
    out[~positive] = expz / (1.0 + expz)
    return out


def _forward_cached(model: DnnModel, x: np.ndarray):
    activations = [x]
    pre_activations = []
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre_activations.append(z)
        a = _sigmoid(z) if i == last else np.maximum(z, 0.0)
        activations.append(a)
    return activations, pre_activations


def forward(model: DnnModel, batch) -> np.ndarray:
    """ON-probability per row; outputs lie strictly inside (0, 1)."""
    x = _as_batch(batch)
    if x.shape[1] != model.architecture.input_dim:
        raise ValueError(
            f"dimension mismatch: batch {x.shape[1]}, model {model.architecture.input_dim}"
        )
    activations, _ = _forward_cached(model, x)
    probs = activations[-1][:, 0]
    return np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)


def loss_and_grad(model: DnnModel, batch, labels, sample_weights=None):
    """Mean binary cross-entropy and exact backprop gradients.

    Returns (loss, [(dW, db) per layer]).  Probabilities are clamped in
    the loss so it stays finite; the gradient uses the exact
    sigmoid-cross-entropy form (prob - label).
    """
    x = _as_batch(batch)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.size:
        raise ValueError("batch and labels disagree in length")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be 0 or 1")
    n = x.shape[0]
    if sample_weights is None:
        w_samples = np.ones(n)
    else:
        w_samples = np.asarray(sample_weights, dtype=np.float64).reshape(-1)

    activations, pre_activations = _forward_cached(model, x)
    probs = activations[-1][:, 0]
    clamped = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    losses = -(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped))
    loss = float(np.mean(w_samples * losses))

    grads = [None] * len(model.weights)
    delta = ((probs - y) * w_samples / n)[:, None]
    for i in range(len(model.weights) - 1, -1, -1):
        grads[i] = (activations[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre_activations[i - 1] > 0.0)
    return loss, grads


def predict_frames(model: DnnModel, feat) -> np.ndarray:
    return forward(model, feat)


def utterance_decision(probs) -> UtteranceDecision:
    """Mean frame probability; ON only when strictly above 0.5."""
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ValueError("cannot decide on an empty probability vector")
    mean_prob = float(np.mean(p))
    label = ON_LABEL if mean_prob > 0.5 else OFF_LABEL
    return UtteranceDecision(mean_prob, label, int(p.size))


def _dev_accuracy(model: DnnModel, dev_utterances) -> float:
    correct = 0
    for frames, label in dev_utterances:
        decision = utterance_decision(forward(model, frames))
        correct += decision.label == float(label)
    return correct / len(dev_utterances)


def train(
    model: DnnModel,
    dataset: tuple,
    dev: list,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[DnnModel, list[EpochRecord]]:
    """Mini-batch SGD keeping the parameters with the best dev utterance accuracy.

    ``dataset`` is (frames, labels) at the frame level; ``dev`` is a list
    of (frames, label) whole utterances.  Stops after ``patience`` epochs
    without a dev improvement, or at ``max_epochs``.
    """
    x = _as_batch(dataset[0])
    y = np.asarray(dataset[1], dtype=np.float64).reshape(-1)
    if x.shape[0] != y.size or x.shape[0] == 0:
        raise ValueError("empty or inconsistent training set")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("training data contains a single class")
    if not dev:
        raise ValueError("development set must be non-empty")

    sample_weights = None
    if cfg.balance_classes:
        n_on = float(np.sum(y == 1.0))
        n_off = float(np.sum(y == 0.0))
        sample_weights = np.where(y == 1.0, y.size / (2.0 * n_on), y.size / (2.0 * n_off))

    rng = np.random.default_rng(cfg.seed)
    current = model.copy()
    best = current.copy()
    best_accuracy = -1.0
    epochs_since_best = 0
    history: list[EpochRecord] = []

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(x.shape[0])
        epoch_loss = 0.0
        num_batches = 0
        for start in range(0, order.size, cfg.batch_size):
            batch_idx = order[start : start + cfg.batch_size]
            batch_w = None if sample_weights is None else sample_weights[batch_idx]
            loss, grads = loss_and_grad(current, x[batch_idx], y[batch_idx], batch_w)
            epoch_loss += loss
            num_batches += 1
            for (dw, db), w, b in zip(grads, current.weights, current.biases):
                w -= cfg.learning_rate * dw
                b -= cfg.learning_rate * db
        accuracy = _dev_accuracy(current, dev)
        history.append(EpochRecord(epoch, epoch_loss / max(num_batches, 1), accuracy))
        if accuracy > best_accuracy:
            best_accuracy = accuracy
            best = current.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                break
    return best, history


def save_dnn(path, model: DnnModel, meta: dict | None = None) -> None:
    lines = [
        f"dnnmodel v{MODEL_FORMAT_VERSION}",
        f"input_dim {model.architecture.input_dim}",
        "hidden " + " ".join(str(w) for w in model.architecture.hidden),
        "meta " + json.dumps(meta or {}, sort_keys=True),
    ]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"layer {i} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append("w " + " ".join(repr(float(v)) for v in row))
        lines.append("b " + " ".join(repr(float(v)) for v in b))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dnn(path) -> tuple[DnnModel, dict]:
    with open(path, encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != f"dnnmodel v{MODEL_FORMAT_VERSION}":
        raise ValueError(f"{path}: not a v{MODEL_FORMAT_VERSION} DNN model file")
    input_dim = None
    hidden: tuple[int, ...] = ()
    meta: dict = {}
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    rows: list[list[float]] = []
    expected_shape = None

    def flush():
        nonlocal rows, expected_shape
        if expected_shape is not None and rows:
            matrix = np.asarray(rows)
            if matrix.shape != expected_shape:
                raise ValueError(f"{path}: layer shape mismatch")
            weights.append(matrix)
        rows = []

    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "input_dim":
            input_dim = int(rest)
        elif key == "hidden":
            hidden = tuple(int(tok) for tok in rest.split())
        elif key == "meta":
            meta = json.loads(rest)
        elif key == "layer":
            flush()
            _, fan_in, fan_out = (int(tok) for tok in rest.split())
            expected_shape = (fan_in, fan_out)
        elif key == "w":
            rows.append([float(tok) for tok in rest.split()])
        elif key == "b":
            flush()
            biases.append(np.array([float(tok) for tok in rest.split()]))
    flush()
    model = DnnModel(DnnArchitecture(input_dim, hidden), weights, biases)
    return model, meta
