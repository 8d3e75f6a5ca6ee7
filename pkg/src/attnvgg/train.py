"""Single-threaded, seed-deterministic training and evaluation loops."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Sample
from .errors import ShapeError, TrainingError
from .losses import LossConfig, loss_ensemble
from .model import Model, backward, forward
from .optim import OptimizerConfig, lr_at, rmsprop_step


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainingResult:
    log: list[EpochStats]
    best_params: dict[str, np.ndarray]
    best_epoch: int
    best_val_accuracy: float


def to_model_input(image: np.ndarray, model: Model) -> np.ndarray:
    """Adapt a dataset image to the model's input channels.

    Single-channel images are replicated when the architecture expects three
    channels (the transfer-compatible configuration); anything else must
    match exactly.
    """
    expected = model.spec.input_shape
    if image.shape == expected:
        return image
    if image.ndim == 3 and image.shape[:2] == expected[:2] and image.shape[2] == 1 and expected[2] == 3:
        return np.repeat(image, 3, axis=2)
    raise ShapeError(f"image shape {image.shape} does not fit model input {expected}")


def evaluate(model: Model, samples: list[Sample], loss_config: LossConfig, threshold: float = 0.5):
    """Mean loss, accuracy, and per-sample predictions with dropout disabled."""
    if not samples:
        raise TrainingError("evaluation set is empty")
    losses = []
    labels = []
    predictions = []
    for s in samples:
        pred, _ = forward(model, to_model_input(s.image, model), training=False)
        value, _ = loss_ensemble(s.label, pred, loss_config)
        losses.append(value)
        labels.append(s.label)
        predictions.append(pred)
    predictions_arr = np.array(predictions)
    labels_arr = np.array(labels)
    accuracy = float(np.mean((predictions_arr >= threshold) == (labels_arr == 1)))
    return float(np.mean(losses)), accuracy, labels_arr, predictions_arr


def run_training(model: Model, train_samples: list[Sample], val_samples: list[Sample], *,
                 loss_config: LossConfig, opt_config: OptimizerConfig, epochs: int,
                 batch_size: int, seed: int, threshold: float = 0.5,
                 on_epoch_end=None) -> TrainingResult:
    """Train in place and return the per-epoch log plus the best-validation snapshot.

    Each epoch shuffles the training set with the run's seeded generator,
    accumulates batch-mean gradients, and applies one RMSprop step per batch
    at the epoch's learning rate. Ties in validation accuracy keep the
    earlier epoch's snapshot. ``on_epoch_end(epoch, model, stats)`` may return
    True to stop early.
    """
    if not train_samples:
        raise TrainingError("training set is empty")
    if batch_size < 1:
        raise TrainingError(f"batch size must be >= 1, got {batch_size}")
    if epochs < 1:
        raise TrainingError(f"epochs must be >= 1, got {epochs}")

    rng = np.random.default_rng(seed)
    log: list[EpochStats] = []
    best_params = model.param_values()
    best_epoch = -1
    best_acc = -1.0
    n = len(train_samples)

    for epoch in range(epochs):
        lr = lr_at(epoch, opt_config)
        order = rng.permutation(n)
        loss_sum = 0.0
        for batch_no, start in enumerate(range(0, n, batch_size)):
            batch = [train_samples[i] for i in order[start:start + batch_size]]
            scale = 1.0 / len(batch)
            for s in batch:
                pred, cache = forward(model, to_model_input(s.image, model), training=True, rng=rng)
                value, d_pred = loss_ensemble(s.label, pred, loss_config)
                if not math.isfinite(value):
                    raise TrainingError(f"non-finite loss at epoch {epoch}, batch {batch_no}")
                loss_sum += value
                backward(model, cache, d_pred * scale)
            for p in model.params.values():
                rmsprop_step(p, lr, opt_config)
        val_loss, val_acc, _, _ = evaluate(model, val_samples, loss_config, threshold)
        stats = EpochStats(epoch=epoch, train_loss=loss_sum / n, val_loss=val_loss, val_accuracy=val_acc)
        log.append(stats)
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = model.param_values()
        if on_epoch_end is not None and on_epoch_end(epoch, model, stats):
            break
    return TrainingResult(log=log, best_params=best_params, best_epoch=best_epoch, best_val_accuracy=best_acc)


def format_log_csv(log: list[EpochStats]) -> str:
    lines = ["epoch,train_loss,val_loss,val_accuracy"]
    for row in log:
        lines.append(f"{row.epoch},{row.train_loss:.6f},{row.val_loss:.6f},{row.val_accuracy:.6f}")
    return "\n".join(lines) + "\n"
