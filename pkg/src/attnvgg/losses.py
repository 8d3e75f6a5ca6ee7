"""Binary cross-entropy, log-cosh, and their weighted ensemble.

Each loss returns ``(value, grad)`` where ``grad`` is the derivative of the
value with respect to the prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOSS_KINDS = ("ce", "logcosh", "ce_logcosh")

_LN2 = math.log(2.0)


@dataclass
class LossConfig:
    kind: str = "ce_logcosh"
    alpha: float = 0.5
    beta: float = 0.5
    clip_epsilon: float = 1e-7

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")
        if self.kind == "ce_logcosh" and self.alpha + self.beta <= 0:
            raise ValueError("ce_logcosh needs alpha + beta > 0")
        if not 0 < self.clip_epsilon < 0.5:
            raise ValueError(f"clip_epsilon {self.clip_epsilon} out of range")


def loss_ce(y: float, yhat: float, clip_epsilon: float = 1e-7):
    """Binary cross-entropy; the prediction is clamped away from 0 and 1."""
    p = min(max(float(yhat), clip_epsilon), 1.0 - clip_epsilon)
    y = float(y)
    value = -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))
    grad = -y / p + (1.0 - y) / (1.0 - p)
    return value, grad


def loss_logcosh(y: float, yhat: float):
    """log(cosh(error)) via the overflow-safe identity |e| + log1p(exp(-2|e|)) - ln 2."""
    e = float(yhat) - float(y)
    a = abs(e)
    value = a + math.log1p(math.exp(-2.0 * a)) - _LN2
    return value, math.tanh(e)


def loss_ensemble(y: float, yhat: float, config: LossConfig):
    """Loss selected by config: plain CE, plain log-cosh, or alpha*CE + beta*logcosh."""
    if config.kind == "ce":
        return loss_ce(y, yhat, config.clip_epsilon)
    if config.kind == "logcosh":
        return loss_logcosh(y, yhat)
    ce_v, ce_g = loss_ce(y, yhat, config.clip_epsilon)
    lc_v, lc_g = loss_logcosh(y, yhat)
    return config.alpha * ce_v + config.beta * lc_v, config.alpha * ce_g + config.beta * lc_g


def batch_loss(labels, predictions, config: LossConfig):
    """Mean loss over a batch plus per-sample gradients scaled by 1/batch."""
    labels = np.asarray(labels, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if labels.shape != predictions.shape or labels.ndim != 1:
        raise ValueError(f"batch_loss: labels {labels.shape} and predictions {predictions.shape} must be equal-length vectors")
    n = labels.shape[0]
    if n == 0:
        raise ValueError("batch_loss: empty batch")
    values = np.empty(n)
    grads = np.empty(n)
    for i in range(n):
        values[i], grads[i] = loss_ensemble(labels[i], predictions[i], config)
    return float(values.mean()), grads / n
