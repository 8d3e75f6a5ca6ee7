"""Scikit-learn style facade over the classifier.

The estimator wraps model building, the training loop, and thresholded
prediction behind the usual ``fit`` / ``predict`` / ``predict_proba``
surface so the network composes with sklearn tooling (``get_params``,
``clone``, pipelines, ``cross_val_score``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .config import ARCH_NAMES
from .data import Sample
from .losses import LOSS_KINDS, LossConfig
from .model import build, forward, vgg16_spec, vgg_tiny_spec
from .optim import OptimizerConfig
from .train import run_training, to_model_input


def _validate_images(X) -> np.ndarray:
    """Accept (n, h, w) or (n, h, w, c) float images; returns (n, h, w, c)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X[:, :, :, None]
    if X.ndim != 4:
        raise ValueError(f"X must have shape (n, h, w) or (n, h, w, c), got {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("X is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    return X


def _validate_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {y.shape}")
    values = np.unique(y)
    if not np.isin(values, (0, 1)).all():
        raise ValueError(f"y must be binary with labels 0 and 1, got values {values!r}")
    return y.astype(int)


class AttentionVggClassifier(BaseEstimator, ClassifierMixin):
    """Binary image classifier: VGG backbone, optional attention gate, dense head.

    Parameters mirror the experiment configuration; ``arch`` selects the
    full backbone ("vgg16", three input channels) or the desk-scale variant
    ("vgg_tiny", one channel). Images are used as given; prepare them to a
    consistent dynamic range beforehand.
    """

    def __init__(self, arch: str = "vgg_tiny", attention: bool = True, loss: str = "ce_logcosh",
                 alpha: float = 0.5, beta: float = 0.5, epochs: int = 250, batch_size: int = 32,
                 lr0: float = 2e-6, decay: float = 1e-6, dropout: float = 0.5,
                 threshold: float = 0.5, seed: int = 0):
        self.arch = arch
        self.attention = attention
        self.loss = loss
        self.alpha = alpha
        self.beta = beta
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr0 = lr0
        self.decay = decay
        self.dropout = dropout
        self.threshold = threshold
        self.seed = seed

    def _build_spec(self, h: int, w: int, c: int):
        if self.arch not in ARCH_NAMES:
            raise ValueError(f"unknown arch {self.arch!r}, expected one of {ARCH_NAMES}")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}, expected one of {LOSS_KINDS}")
        if self.arch == "vgg16":
            if c == 1:
                c = 3  # grayscale inputs are replicated to the transfer-compatible width
            return vgg16_spec(attention=self.attention, input_hw=(h, w), in_channels=c,
                              dropout_rate=self.dropout)
        return vgg_tiny_spec(attention=self.attention, input_hw=(h, w), in_channels=c,
                             dropout_rate=self.dropout)

    def fit(self, X, y):
        X = _validate_images(X)
        y = _validate_labels(y, X.shape[0])
        n, h, w, c = X.shape
        spec = self._build_spec(h, w, c)
        self.model_ = build(spec, self.seed)
        samples = [Sample(id=f"sample-{i}", image=X[i], label=int(y[i])) for i in range(n)]
        loss_config = LossConfig(kind=self.loss, alpha=self.alpha, beta=self.beta)
        opt_config = OptimizerConfig(lr0=self.lr0, decay=self.decay)
        result = run_training(
            self.model_, samples, samples,
            loss_config=loss_config, opt_config=opt_config,
            epochs=self.epochs, batch_size=self.batch_size,
            seed=self.seed, threshold=self.threshold,
        )
        self.classes_ = np.array([0, 1])
        self.history_ = result.log
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this AttentionVggClassifier instance is not fitted yet")

    def decision_function(self, X) -> np.ndarray:
        """Probability of the positive (malignant) class for each image."""
        self._check_fitted()
        X = _validate_images(X)
        scores = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            scores[i], _ = forward(self.model_, to_model_input(X[i], self.model_), training=False)
        return scores

    def predict_proba(self, X) -> np.ndarray:
        p = self.decision_function(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= self.threshold).astype(int)
