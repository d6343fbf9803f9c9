"""SGD with momentum, weight decay, and linear learning-rate decay to zero."""

from __future__ import annotations

import numpy as np

from .tensor import ShapeMismatchError, Tensor


class SGD:
    """Velocity update: v <- momentum*v + grad + weight_decay*param,
    then param <- param - lr(step)*v with lr decayed linearly to 0."""

    def __init__(self, params, lr0: float = 0.01, total_steps: int = 20000,
                 momentum: float = 0.9, weight_decay: float = 1e-4):
        if not (0.0 <= momentum < 1.0):
            raise ValueError(f"momentum must be in [0, 1): {momentum}")
        if weight_decay < 0:
            raise ValueError(f"weight decay must be >= 0: {weight_decay}")
        if total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        self.params: list[Tensor] = list(params)
        self.lr0 = float(lr0)
        self.total_steps = int(total_steps)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def lr_at(self, step: int) -> float:
        return self.lr0 * (1.0 - step / self.total_steps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, step_index: int):
        if step_index >= self.total_steps:
            raise ValueError(
                f"step {step_index} out of range (total {self.total_steps})")
        lr = np.float32(self.lr_at(step_index))
        mom = np.float32(self.momentum)
        wd = np.float32(self.weight_decay)
        for p, v in zip(self.params, self.velocity):
            g = p.grad_array()
            if g.shape != p.data.shape:
                raise ShapeMismatchError(
                    "sgd_step", f"grad shape {g.shape} != param shape {p.data.shape}")
            v *= mom
            v += g
            if wd:
                v += wd * p.data
            p.data = p.data - lr * v
