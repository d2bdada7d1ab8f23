"""SGD with momentum, weight decay, and a poly learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .errors import ScheduleExhaustedError
from .nn import MlpModel


def poly_lr(lr_init: float, step: int, total_steps: int, power: float = 0.9) -> float:
    """lr(t) = lr_init * (1 - t/T)^power; reaches exactly 0 at t == T."""
    return lr_init * (1.0 - step / total_steps) ** power


class SgdOptimizer:
    """Velocity update: v <- momentum*v + grad + weight_decay*param,
    then param <- param - lr(t)*v."""

    def __init__(
        self,
        model: MlpModel,
        lr_init: float,
        total_steps: int,
        momentum: float = 0.9,
        weight_decay: float = 0.0,
        poly_power: float = 0.9,
    ):
        self.model = model
        self.lr_init = float(lr_init)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.poly_power = float(poly_power)
        self.step_count = 0
        self.total_steps = int(total_steps)
        self.velocity = [np.zeros_like(p.data) for p in model.parameters()]

    def current_lr(self) -> float:
        return poly_lr(self.lr_init, self.step_count, self.total_steps, self.poly_power)

    def step(self):
        if self.step_count >= self.total_steps:
            raise ScheduleExhaustedError(
                f"optimizer configured for {self.total_steps} steps"
            )
        lr = self.current_lr()
        for p, v in zip(self.model.parameters(), self.velocity):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            v *= self.momentum
            v += grad
            if self.weight_decay:
                v += self.weight_decay * p.data
            p.data -= lr * v
        self.step_count += 1
