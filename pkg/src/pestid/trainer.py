"""Mini-batch training loop over extracted features.

Each epoch: seeded shuffle, batches of ``batch_size`` (last batch may be
short), one averaged-gradient optimizer step per batch, then full-pass
train and validation metrics in inference mode. Everything is derived
from the config seed, so equal inputs give bit-identical results.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import head as head_ops
from .features import FeatureMatrix
from .head import HeadParams
from .optim import HyperParams, make_optimizer
from .seeding import stream


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    hyperparams: HyperParams
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float | None = None
    val_accuracy: float | None = None


def _flatten(params: HeadParams) -> np.ndarray:
    return np.concatenate([params.weights.ravel(), params.bias])


def _unflatten(theta: np.ndarray, params: HeadParams) -> None:
    split = params.weights.size
    params.weights = theta[:split].reshape(params.weights.shape)
    params.bias = theta[split:]


def _metrics(params: HeadParams, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    _, probs = head_ops.forward_batch(x, params)
    loss = head_ops.batch_loss(probs, y)
    accuracy = float((probs.argmax(axis=1) == y).sum() / y.shape[0])
    return loss, accuracy


def evaluate_split(params: HeadParams, data: FeatureMatrix) -> tuple[float, float]:
    """Mean cross-entropy and accuracy of inference-mode predictions."""
    if data.num_samples == 0:
        raise ValueError("cannot evaluate an empty feature matrix")
    if data.feature_dim != params.feature_dim:
        raise ValueError(
            f"feature dim {data.feature_dim} does not match head D={params.feature_dim}")
    x = data.features.astype(np.float64)
    y = data.labels.astype(np.int64)
    return _metrics(params, x, y)


def _dropout_masks(seed: int, epoch: int, batch: int, count: int, dim: int,
                   rate: float) -> np.ndarray:
    # one independent stream per sample presentation: (seed, epoch, batch, position)
    masks = np.empty((count, dim), dtype=bool)
    for position in range(count):
        masks[position] = stream(seed, epoch, batch, position).random(dim) >= rate
    return masks


def train(train_data: FeatureMatrix, val_data: FeatureMatrix | None,
          config: TrainConfig) -> tuple[HeadParams, list[EpochRecord]]:
    """Train a fresh head; returns final parameters plus per-epoch records.

    Validation data only produces metrics; it never influences parameters.
    """
    if train_data.num_samples == 0:
        raise ValueError("training split is empty")
    if val_data is not None and val_data.num_samples and \
            val_data.feature_dim != train_data.feature_dim:
        raise ValueError(
            f"train D={train_data.feature_dim} but validation D={val_data.feature_dim}")

    x = train_data.features.astype(np.float64)
    y = train_data.labels.astype(np.int64)
    num_classes = train_data.num_classes
    if val_data is not None and val_data.num_samples:
        num_classes = max(num_classes, val_data.num_classes)
    if not (0 <= y.min() and y.max() < num_classes):
        raise ValueError("labels fall outside [0, C)")

    hp = config.hyperparams
    params = head_ops.init_params(train_data.feature_dim, num_classes,
                                  hp.dropout_rate, stream(config.seed))
    optimizer = make_optimizer(hp.optimizer, hp.learning_rate)

    n = x.shape[0]
    records: list[EpochRecord] = []
    for epoch in range(config.epochs):
        order = stream(config.seed, epoch).permutation(n)
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            rows = order[start:start + config.batch_size]
            xb, yb = x[rows], y[rows]
            masks = _dropout_masks(config.seed, epoch, batch_index, len(rows),
                                   x.shape[1], hp.dropout_rate)
            x_masked, probs = head_ops.forward_batch(xb, params, masks)
            batch_loss = head_ops.batch_loss(probs, yb)
            if not np.isfinite(batch_loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch {batch_index}")
            grad_w, grad_b = head_ops.grad_batch(x_masked, probs, yb)
            theta = optimizer.step(_flatten(params),
                                   np.concatenate([grad_w.ravel(), grad_b]))
            _unflatten(theta, params)

        train_loss, train_acc = _metrics(params, x, y)
        record = EpochRecord(epoch, train_loss, train_acc)
        if val_data is not None and val_data.num_samples:
            record.val_loss, record.val_accuracy = evaluate_split(params, val_data)
        records.append(record)

    params.metadata = {
        "hyperparams": {"optimizer": hp.optimizer, "learning_rate": hp.learning_rate,
                        "dropout_rate": hp.dropout_rate},
        "training_seed": config.seed,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "backbone": train_data.backbone,
        "labels": list(train_data.class_names),
    }
    return params, records


def write_epoch_csv(records: list[EpochRecord], path: str | Path) -> None:
    """Epoch curves for external plotting (loss/accuracy per epoch)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
        for r in records:
            writer.writerow([
                r.epoch,
                f"{r.train_loss:.10g}", f"{r.train_accuracy:.10g}",
                "" if r.val_loss is None else f"{r.val_loss:.10g}",
                "" if r.val_accuracy is None else f"{r.val_accuracy:.10g}",
            ])
