"""Loss, SGD optimizer, epoch loop and evaluation.

The detector readout is normalized with a softmax before the cross-entropy;
raw region intensities are unnormalized and scale with input power, so
taking the log of them directly would make gradients depend on arbitrary
brightness.  The argmax decision is unchanged by the normalization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .grad import ConsistencyError, Gradients, backward
from .optics import DetectorLayout, LayerParams, Model, forward_batch


class DataError(ValueError):
    """Dataset empty or otherwise unusable."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, batch_index: int):
        self.epoch = epoch
        self.batch_index = batch_index
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index}"
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    grid_size: int = 64
    layers: int = 1
    activation_shift: float = 0.01
    checkpoint_path: str | None = None
    metrics_path: str | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        n = self.grid_size
        if n < 1 or n & (n - 1):
            raise ValueError(f"grid_size must be a power of two, got {n}")
        if self.activation_shift < 0:
            raise ValueError("activation_shift must be >= 0")


CSV_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc,wall_seconds"


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    wall_seconds: float

    def to_csv_row(self) -> str:
        # repr of a python float round-trips and never uses locale separators
        return ",".join(
            [
                str(self.epoch),
                repr(float(self.train_loss)),
                repr(float(self.train_accuracy)),
                repr(float(self.val_loss)),
                repr(float(self.val_accuracy)),
                repr(float(self.wall_seconds)),
            ]
        )


def softmax(readout) -> np.ndarray:
    """Max-subtracted exponential normalization over the last axis."""
    v = np.asarray(readout, dtype=np.float64)
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probabilities, label: int) -> float:
    """-log p_label with p clamped to 1e-12 to keep the log finite."""
    p = np.asarray(probabilities, dtype=np.float64)
    return float(-np.log(max(p[label], 1e-12)))


def batch_cross_entropy(probabilities: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample -log p_label over a (B, 10) probability batch."""
    picked = probabilities[np.arange(len(labels)), labels]
    return -np.log(np.maximum(picked, 1e-12))


def sgd_step(model: Model, grads: Gradients, learning_rate: float) -> Model:
    """p <- p - lr * g for every W, B, theta of every layer."""
    if len(grads.layers) != model.num_layers:
        raise ConsistencyError(
            f"gradients have {len(grads.layers)} layers, model has {model.num_layers}"
        )
    lr = learning_rate
    new_layers = []
    for layer, g in zip(model.layers, grads.layers):
        if g.d_weight.shape != layer.weight.shape:
            raise ConsistencyError(
                f"gradient shape {g.d_weight.shape} != layer shape {layer.weight.shape}"
            )
        new_layers.append(
            LayerParams(
                layer.weight - lr * g.d_weight,
                layer.bias - lr * g.d_bias,
                layer.phase - lr * g.d_phase,
            )
        )
    return replace(model, layers=tuple(new_layers))


def init_model(
    grid_size: int,
    layers: int,
    activation_shift: float,
    rng: np.random.Generator,
    detector: DetectorLayout | None = None,
) -> Model:
    """Transparent start: W=1, B=0, theta uniform in [0, 2pi).

    All-zero theta would make every layer an identity and leave the stack in
    a gradient-degenerate configuration; random phase gives each layer a
    distinct diffraction pattern from step one.
    """
    n = grid_size
    params = tuple(
        LayerParams(
            np.ones((n, n)),
            np.zeros((n, n)),
            rng.uniform(0.0, 2.0 * np.pi, size=(n, n)),
        )
        for _ in range(layers)
    )
    if detector is None:
        detector = DetectorLayout.default(n)
    return Model(params, n, activation_shift, detector)


def _forward_metrics(model: Model, images, labels):
    readouts, tape = forward_batch(model, images)
    probs = softmax(readouts)
    losses = batch_cross_entropy(probs, labels)
    correct = int((np.argmax(readouts, axis=-1) == labels).sum())
    return probs, losses, correct, tape


def train_epoch(
    model: Model,
    train_data,
    val_data,
    config: TrainConfig,
    rng: np.random.Generator,
    epoch: int = 0,
) -> tuple[Model, MetricsRecord]:
    """One pass over the training data plus a validation evaluation.

    Shuffles with the caller's RNG (advance it across epochs for distinct
    permutations), averages gradients over each mini-batch, and applies one
    SGD step per batch.  Train loss/accuracy are accumulated from the
    pre-update forward of each batch.
    """
    if len(train_data) == 0:
        raise DataError("training dataset is empty")
    t0 = time.perf_counter()
    order = rng.permutation(len(train_data))
    loss_sum = 0.0
    correct = 0
    for bi, start in enumerate(range(0, len(order), config.batch_size)):
        idx = order[start : start + config.batch_size]
        images, labels = train_data.batch(idx)
        probs, losses, ok, tape = _forward_metrics(model, images, labels)
        if not np.all(np.isfinite(losses)):
            raise TrainingDivergedError(epoch, bi)
        loss_sum += float(losses.sum())
        correct += ok
        seed = probs.copy()
        seed[np.arange(len(labels)), labels] -= 1.0
        seed /= len(labels)  # mean over the batch, not sum
        model = sgd_step(model, backward(model, tape, seed), config.learning_rate)
    val_loss, val_acc = evaluate(model, val_data)
    record = MetricsRecord(
        epoch=epoch,
        train_loss=loss_sum / len(order),
        train_accuracy=correct / len(order),
        val_loss=val_loss,
        val_accuracy=val_acc,
        wall_seconds=time.perf_counter() - t0,
    )
    return model, record


def evaluate(model: Model, dataset, batch_size: int = 128) -> tuple[float, float]:
    """Mean cross-entropy and accuracy over a dataset."""
    loss, acc, _ = evaluate_confusion(model, dataset, batch_size)
    return loss, acc


def evaluate_confusion(
    model: Model, dataset, batch_size: int = 128
) -> tuple[float, float, np.ndarray]:
    """Like evaluate, also returning the 10x10 confusion matrix.

    confusion[i, j] counts samples with true label i classified as j.
    """
    total = len(dataset)
    if total == 0:
        raise DataError("evaluation dataset is empty")
    loss_sum = 0.0
    correct = 0
    confusion = np.zeros((10, 10), dtype=np.int64)
    for start in range(0, total, batch_size):
        idx = np.arange(start, min(start + batch_size, total))
        images, labels = dataset.batch(idx)
        readouts, _ = forward_batch(model, images)
        probs = softmax(readouts)
        loss_sum += float(batch_cross_entropy(probs, labels).sum())
        pred = np.argmax(readouts, axis=-1)
        correct += int((pred == labels).sum())
        np.add.at(confusion, (labels, pred), 1)
    return loss_sum / total, correct / total, confusion


@dataclass
class FitResult:
    model: Model
    best_model: Model
    best_epoch: int
    records: list[MetricsRecord]


def fit(
    model: Model,
    train_data,
    val_data,
    config: TrainConfig,
    rng: np.random.Generator,
    on_epoch: Callable[[MetricsRecord], None] | None = None,
) -> FitResult:
    """Run config.epochs training epochs, tracking the best validation model."""
    records: list[MetricsRecord] = []
    best_model = model
    best_epoch = -1
    best_acc = -1.0
    for epoch in range(config.epochs):
        model, record = train_epoch(model, train_data, val_data, config, rng, epoch)
        records.append(record)
        if record.val_accuracy > best_acc:
            best_acc = record.val_accuracy
            best_model = model
            best_epoch = epoch
        if on_epoch is not None:
            on_epoch(record)
    return FitResult(model, best_model, best_epoch, records)
