"""Adam with a linear learning-rate schedule, plus mini-batch iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TrainingError(RuntimeError):
    def __init__(self, epoch: int, message: str = "objective became non-finite"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class AdamConfig:
    epochs: int = 1000
    lr_start: float = 1e-2
    lr_end: float = 1e-3
    batch_size: int | None = None  # None = full batch
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def learning_rate(self, epoch: int) -> float:
        """Linear from ``lr_start`` at epoch 0 to ``lr_end`` at the last epoch."""
        if self.epochs <= 1:
            return self.lr_start
        frac = epoch / (self.epochs - 1)
        return self.lr_start + (self.lr_end - self.lr_start) * frac


class Adam:
    """Adam ascent on a list of arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray], lr: float, maximize: bool = True) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        sign = 1.0 if maximize else -1.0
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p += sign * lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def batches(n: int, batch_size: int | None, rng: np.random.Generator):
    """Index arrays covering ``range(n)``; shuffled unless full batch."""
    if batch_size is None or batch_size >= n:
        yield np.arange(n)
        return
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]
