"""RMSprop updates with inverse-time learning-rate decay."""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass

from .layers import Parameter


@dataclass
class OptimizerConfig:
    lr0: float = 2e-6
    decay: float = 1e-6
    rho: float = 0.9
    eps: float = 1e-7

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.decay < 0:
            raise ValueError(f"decay must be non-negative, got {self.decay}")


def lr_at(step: int, config: OptimizerConfig) -> float:
    """Learning rate after ``step`` completed epochs: lr0 / (1 + decay * step)."""
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    return config.lr0 / (1.0 + config.decay * step)


def rmsprop_step(param: Parameter, lr: float, config: OptimizerConfig) -> Parameter:
    """One in-place update; the gradient accumulator is zeroed afterwards."""
    g = param.grad
    v = param.opt_state
    v *= config.rho
    v += (1.0 - config.rho) * g * g
    param.value -= lr * g / (np.sqrt(v) + config.eps)
    param.zero_grad()
    return param
