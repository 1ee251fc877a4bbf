"""MAP estimation under a Gaussian likelihood and a N(0, 1) prior."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import RegressionDataset
from .fixing import from_values
from .masks import Architecture, LayerMask
from .network import FixedAssignment, Gradients, MlpParams, backward, forward_all, init_params
from .optim import Adam, AdamConfig, TrainingError, batches

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianLikelihood:
    """Homoscedastic Gaussian noise; ``scale`` is the noise standard deviation."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"likelihood scale must be > 0, got {self.scale}")

    @property
    def variance(self) -> float:
        return self.scale ** 2

    def log_density(self, y: np.ndarray, f: np.ndarray) -> np.ndarray:
        """Per-datapoint log density, summed over output dimensions."""
        r = y - f
        d = r.shape[-1]
        return -0.5 * (r * r).sum(axis=-1) / self.variance - 0.5 * d * (LOG_2PI + math.log(self.variance))


def log_prior(params: MlpParams) -> float:
    arrays = params.arrays()
    n = sum(a.size for a in arrays)
    return float(-0.5 * sum((a * a).sum() for a in arrays) - 0.5 * n * LOG_2PI)


def log_joint(params: MlpParams, data: RegressionDataset, lik: GaussianLikelihood) -> float:
    f = forward_all(params, data.x_train)[-1]
    return float(lik.log_density(data.y_train, f).sum()) + log_prior(params)


def log_joint_gradients(params: MlpParams, x: np.ndarray, y: np.ndarray,
                        lik: GaussianLikelihood, scale: float = 1.0) -> tuple[float, Gradients]:
    """Value and gradient of ``scale * loglik(x, y) + log_prior``.

    ``scale`` is ``N / batch_size`` for mini-batches.
    """
    hs = forward_all(params, x)
    f = hs[-1]
    value = scale * float(lik.log_density(y, f).sum()) + log_prior(params)
    grads = backward(params, x, scale * (y - f) / lik.variance, hs)
    grads.weights = [g - w for g, w in zip(grads.weights, params.weights)]
    if params.arch.bias:
        grads.biases = [g - b for g, b in zip(grads.biases, params.biases)]
    return value, grads


def train_map(arch: Architecture, data: RegressionDataset, lik: GaussianLikelihood,
              cfg: AdamConfig, rng: np.random.Generator,
              init: MlpParams | None = None) -> tuple[MlpParams, list[float]]:
    """Adam ascent on the log joint. Returns the parameters and a per-epoch log.

    The logged value for an epoch is the mean of that epoch's (rescaled)
    mini-batch objectives.
    """
    params = init.copy() if init is not None else init_params(arch, rng)
    n = data.n_train
    opt = Adam(params.arrays(), cfg.beta1, cfg.beta2, cfg.eps)
    history = []
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        values = []
        for idx in batches(n, cfg.batch_size, rng):
            value, grads = log_joint_gradients(params, data.x_train[idx], data.y_train[idx],
                                               lik, n / len(idx))
            if not math.isfinite(value):
                raise TrainingError(epoch)
            opt.step(grads.arrays(arch.bias), lr)
            values.append(value)
        history.append(float(np.mean(values)))
    return params, history


def extract_fixed_values(map_params: MlpParams, mask: LayerMask) -> FixedAssignment:
    if map_params.arch.weight_shapes != mask.arch.weight_shapes:
        raise ValueError("mask does not match the MAP parameter shapes")
    return from_values(mask, map_params.weights)
