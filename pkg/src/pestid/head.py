"""Softmax classification head: dropout, dense layer, cross-entropy.

The head is the only trainable part of the pipeline. Parameters are kept
in float64 so analytic gradients can be checked against finite
differences; inference-time persistence is JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LOSS_FLOOR = 1e-12


@dataclass
class HeadParams:
    weights: np.ndarray          # (C, D)
    bias: np.ndarray             # (C,)
    dropout_rate: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"inconsistent head shapes: W {self.weights.shape}, b {self.bias.shape}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("head parameters contain non-finite values")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def num_params(self) -> int:
        return self.weights.size + self.bias.size


def head_param_count(feature_dim: int, num_classes: int) -> int:
    """Trainable parameters of a dense softmax head: C*D + C."""
    return num_classes * feature_dim + num_classes


def init_params(feature_dim: int, num_classes: int, dropout_rate: float,
                seed_stream: np.random.Generator) -> HeadParams:
    # uniform fan-based init; bias starts at zero
    limit = np.sqrt(6.0 / (feature_dim + num_classes))
    weights = seed_stream.uniform(-limit, limit, size=(num_classes, feature_dim))
    return HeadParams(weights, np.zeros(num_classes), dropout_rate)


@dataclass
class ForwardTrace:
    mask: np.ndarray             # (D,) bool, dropout keep mask
    logits: np.ndarray           # (C,)
    probabilities: np.ndarray    # (C,)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (max subtraction), any leading shape."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def masked_features(features: np.ndarray, mask: np.ndarray, dropout_rate: float) -> np.ndarray:
    # inverted dropout: survivors scaled so inference needs no rescaling
    return features * (mask / (1.0 - dropout_rate))


def forward(features: np.ndarray, params: HeadParams, mode: str = "infer",
            rng: np.random.Generator | None = None) -> ForwardTrace:
    """One-sample forward pass. ``train`` mode draws a dropout mask from
    ``rng``; ``infer`` keeps every feature unscaled."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (params.feature_dim,):
        raise ValueError(
            f"feature length {features.shape} does not match head D={params.feature_dim}")
    if mode == "train":
        if rng is None:
            raise ValueError("train mode requires a random generator")
        mask = rng.random(params.feature_dim) >= params.dropout_rate
        x = masked_features(features, mask, params.dropout_rate)
    elif mode == "infer":
        mask = np.ones(params.feature_dim, dtype=bool)
        x = features
    else:
        raise ValueError(f"unknown mode {mode!r}")
    logits = params.weights @ x + params.bias
    return ForwardTrace(mask=mask, logits=logits, probabilities=softmax(logits))


def loss(probabilities: np.ndarray, target: int) -> float:
    """Categorical cross-entropy of the true class, floored at 1e-12."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if not 0 <= target < probabilities.shape[-1]:
        raise ValueError(f"target {target} out of range for {probabilities.shape[-1]} classes")
    if abs(probabilities.sum() - 1.0) > 1e-6:
        raise ValueError("probabilities do not sum to 1")
    return float(-np.log(max(probabilities[target], LOSS_FLOOR)))


def backward(trace: ForwardTrace, features: np.ndarray, target: int,
             params: HeadParams) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradients of the cross-entropy loss wrt (W, b).

    Uses the dropout mask cached in the trace, so backward sees exactly
    the activations forward produced.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (params.feature_dim,):
        raise ValueError("feature/parameter shape mismatch")
    if not 0 <= target < params.num_classes:
        raise ValueError(f"target {target} out of range")
    x = masked_features(features, trace.mask, params.dropout_rate)
    dlogits = trace.probabilities.copy()
    dlogits[target] -= 1.0
    return np.outer(dlogits, x), dlogits


def predict(features: np.ndarray, params: HeadParams) -> tuple[int, np.ndarray]:
    """Inference-mode class decision; argmax ties break to the lowest index."""
    trace = forward(features, params, mode="infer")
    return int(np.argmax(trace.probabilities)), trace.probabilities


# Batched twins of forward/backward used by the training loop. The batch
# gradient equals the mean of per-sample gradients (tested property).

def forward_batch(x: np.ndarray, params: HeadParams,
                  masks: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    if masks is not None:
        x = x * (masks / (1.0 - params.dropout_rate))
    logits = x @ params.weights.T + params.bias
    return x, softmax(logits)


def grad_batch(x_masked: np.ndarray, probs: np.ndarray,
               targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x_masked.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    return dlogits.T @ x_masked, dlogits.sum(axis=0)


def batch_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    picked = probs[np.arange(probs.shape[0]), targets]
    return float(-np.log(np.maximum(picked, LOSS_FLOOR)).mean())


def save_head(params: HeadParams, path: str | Path) -> None:
    doc = {
        "W": [[float(v) for v in row] for row in params.weights],
        "b": [float(v) for v in params.bias],
        "dropout_rate": params.dropout_rate,
        "D": params.feature_dim,
        "C": params.num_classes,
        **params.metadata,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_head(path: str | Path) -> HeadParams:
    doc = json.loads(Path(path).read_text())
    meta = {k: v for k, v in doc.items() if k not in ("W", "b", "dropout_rate", "D", "C")}
    params = HeadParams(np.array(doc["W"], dtype=np.float64),
                        np.array(doc["b"], dtype=np.float64),
                        doc["dropout_rate"], meta)
    if params.feature_dim != doc["D"] or params.num_classes != doc["C"]:
        raise ValueError("head file dimensions are inconsistent")
    return params
