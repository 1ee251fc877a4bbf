"""Mean-field Gaussian VI over the free parameters of a partially fixed MLP.

Free weights and all biases get a factorised Gaussian ``N(mu, softplus(rho)^2)``
with a N(0, 1) prior. Fixed weights are deterministic and carry no variational
parameters; with the ``signed_constant`` policy their shared magnitude ``c``
can be optimised jointly with ``mu`` and ``rho``.

Gradients are pathwise (reparameterisation trick). :func:`elbo` and
:func:`elbo_gradients` draw their noise identically from the rng, so with
equally seeded generators they see the same Monte Carlo samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .data import RegressionDataset
from .map_training import GaussianLikelihood
from .masks import Architecture, LayerMask, count_fixed, format_mask, parse_mask
from .network import FixedAssignment, MlpParams, backward, forward_all, init_params
from .optim import Adam, AdamConfig, TrainingError, batches

INIT_SIGMA = 0.05


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inverse(y):
    return y + np.log(-np.expm1(-y))


@dataclass
class MeanFieldPosterior:
    arch: Architecture
    free: list[np.ndarray]
    mu_w: list[np.ndarray]
    rho_w: list[np.ndarray]
    mu_b: list[np.ndarray]
    rho_b: list[np.ndarray]

    @property
    def sigma_w(self) -> list[np.ndarray]:
        return [softplus(r) for r in self.rho_w]

    @property
    def sigma_b(self) -> list[np.ndarray]:
        return [softplus(r) for r in self.rho_b]

    @property
    def n_variational(self) -> int:
        """Number of free parameters (each has one mean and one scale)."""
        return int(sum(f.sum() for f in self.free)) + self.arch.n_biases

    def arrays(self) -> list[np.ndarray]:
        out = []
        for i in range(self.arch.n_layers):
            out += [self.mu_w[i], self.rho_w[i]]
            if self.arch.bias:
                out += [self.mu_b[i], self.rho_b[i]]
        return out

    def copy(self) -> "MeanFieldPosterior":
        cp = lambda xs: [x.copy() for x in xs]
        return MeanFieldPosterior(self.arch, cp(self.free), cp(self.mu_w), cp(self.rho_w),
                                  cp(self.mu_b), cp(self.rho_b))

    def mean_params(self, assignment: FixedAssignment) -> MlpParams:
        weights = [np.where(f, mu, v) for f, mu, v in zip(self.free, self.mu_w, assignment.values)]
        return MlpParams(self.arch, weights, [b.copy() for b in self.mu_b])


def init_posterior(assignment: FixedAssignment, rng: np.random.Generator,
                   init_sigma: float = INIT_SIGMA) -> MeanFieldPosterior:
    """Means drawn like a fresh network, every scale set to ``init_sigma``."""
    arch = assignment.arch
    p = init_params(arch, rng)
    free = [~m for m in assignment.mask.matrices]
    rho0 = float(softplus_inverse(init_sigma))
    mu_w = [np.where(f, w, 0.0) for f, w in zip(free, p.weights)]
    rho_w = [np.where(f, rho0, 0.0) for f in free]
    rho_b = [np.full(b.shape, rho0 if arch.bias else 0.0) for b in p.biases]
    return MeanFieldPosterior(arch, free, mu_w, rho_w, [b.copy() for b in p.biases], rho_b)


@dataclass
class Noise:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_samples(self) -> int:
        return self.weights[0].shape[0]


def draw_noise(q: MeanFieldPosterior, n_samples: int, rng: np.random.Generator) -> Noise:
    ew, eb = [], []
    for shape in q.arch.weight_shapes:
        ew.append(rng.standard_normal((n_samples,) + shape))
        if q.arch.bias:
            eb.append(rng.standard_normal((n_samples, shape[1])))
        else:
            eb.append(np.zeros((n_samples, shape[1])))
    return Noise(ew, eb)


def params_from_noise(q: MeanFieldPosterior, assignment: FixedAssignment, noise: Noise) -> MlpParams:
    weights, biases = [], []
    for i in range(q.arch.n_layers):
        w = q.mu_w[i] + softplus(q.rho_w[i]) * noise.weights[i]
        weights.append(np.where(q.free[i], w, assignment.values[i]))
        if q.arch.bias:
            biases.append(q.mu_b[i] + softplus(q.rho_b[i]) * noise.biases[i])
        else:
            biases.append(np.zeros_like(noise.biases[i]))
    return MlpParams(q.arch, weights, biases)


def sample_params(q: MeanFieldPosterior, assignment: FixedAssignment, rng: np.random.Generator,
                  n_samples: int | None = None) -> MlpParams:
    """One sampled network, or a stack of ``n_samples`` along a leading axis."""
    noise = draw_noise(q, 1 if n_samples is None else n_samples, rng)
    params = params_from_noise(q, assignment, noise)
    if n_samples is None:
        return MlpParams(q.arch, [w[0] for w in params.weights], [b[0] for b in params.biases])
    return params


def kl_to_standard_normal(q: MeanFieldPosterior) -> float:
    total = 0.0
    pairs = list(zip(q.mu_w, q.rho_w, q.free))
    if q.arch.bias:
        pairs += [(mu, rho, np.ones(mu.shape, dtype=bool)) for mu, rho in zip(q.mu_b, q.rho_b)]
    for mu, rho, free in pairs:
        s = softplus(rho)
        term = 0.5 * (mu * mu + s * s - 1.0) - np.log(s)
        total += float(term[free].sum())
    return total


@dataclass
class ElboEstimate:
    value: float
    expected_log_lik: float
    kl: float
    n_samples: int


@dataclass
class ElboGradients:
    mu_w: list[np.ndarray]
    rho_w: list[np.ndarray]
    mu_b: list[np.ndarray]
    rho_b: list[np.ndarray]
    c: float | None = None

    def arrays(self, bias: bool = True) -> list[np.ndarray]:
        out = []
        for i in range(len(self.mu_w)):
            out += [self.mu_w[i], self.rho_w[i]]
            if bias:
                out += [self.mu_b[i], self.rho_b[i]]
        return out


def _elbo(q, assignment, x, y, lik, noise, dataset_size, with_grad):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    s = noise.n_samples
    scale = dataset_size / x.shape[0] / s
    params = params_from_noise(q, assignment, noise)
    hs = forward_all(params, x)
    f = hs[-1]
    ell = scale * float(lik.log_density(y, f).sum())
    kl = kl_to_standard_normal(q)
    est = ElboEstimate(ell - kl, ell, kl, s)
    if not with_grad:
        return est, None

    g = backward(params, x, scale * (y - f) / lik.variance, hs)
    grads = ElboGradients([], [], [], [])
    dc = 0.0
    for i in range(q.arch.n_layers):
        free = q.free[i]
        gw = g.weights[i]
        sig_w = softplus(q.rho_w[i])
        dsig_w = expit(q.rho_w[i])
        gmu = gw.sum(axis=0) - q.mu_w[i]
        grho = ((gw * noise.weights[i]).sum(axis=0) - (sig_w - 1.0 / sig_w)) * dsig_w
        grads.mu_w.append(np.where(free, gmu, 0.0))
        grads.rho_w.append(np.where(free, grho, 0.0))
        if assignment.has_c:
            dc += float((gw.sum(axis=0) * assignment.signs[i]).sum())
        if q.arch.bias:
            gb = g.biases[i]
            sig_b = softplus(q.rho_b[i])
            grads.mu_b.append(gb.sum(axis=0) - q.mu_b[i])
            grads.rho_b.append(((gb * noise.biases[i]).sum(axis=0) - (sig_b - 1.0 / sig_b))
                               * expit(q.rho_b[i]))
        else:
            grads.mu_b.append(np.zeros_like(q.mu_b[i]))
            grads.rho_b.append(np.zeros_like(q.rho_b[i]))
    grads.c = dc if assignment.has_c else None
    return est, grads


def elbo(q: MeanFieldPosterior, assignment: FixedAssignment, x, y, lik: GaussianLikelihood,
         n_samples: int, rng: np.random.Generator, dataset_size: int | None = None) -> ElboEstimate:
    """Monte Carlo ELBO; the batch log-likelihood is rescaled to ``dataset_size``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    n = len(x) if dataset_size is None else dataset_size
    return _elbo(q, assignment, x, y, lik, draw_noise(q, n_samples, rng), n, False)[0]


def elbo_gradients(q: MeanFieldPosterior, assignment: FixedAssignment, x, y,
                   lik: GaussianLikelihood, n_samples: int, rng: np.random.Generator,
                   dataset_size: int | None = None) -> tuple[ElboEstimate, ElboGradients]:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    n = len(x) if dataset_size is None else dataset_size
    return _elbo(q, assignment, x, y, lik, draw_noise(q, n_samples, rng), n, True)


@dataclass
class ViResult:
    posterior: MeanFieldPosterior
    assignment: FixedAssignment
    history: list[float] = field(default_factory=list)


def train_vi(assignment: FixedAssignment, data: RegressionDataset, lik: GaussianLikelihood,
             cfg: AdamConfig, rng: np.random.Generator, n_samples: int = 16,
             q_init: MeanFieldPosterior | None = None) -> ViResult:
    """Adam ascent on the ELBO; ``c`` is updated too when ``assignment.learn_c``.

    ``history`` holds one entry per epoch, the mean of that epoch's
    mini-batch ELBO estimates.
    """
    q = q_init.copy() if q_init is not None else init_posterior(assignment, rng)
    learn_c = assignment.has_c and assignment.learn_c
    c_arr = np.array([assignment.c if assignment.has_c else 0.0])
    opt_params = q.arrays() + ([c_arr] if learn_c else [])
    opt = Adam(opt_params, cfg.beta1, cfg.beta2, cfg.eps)
    n = data.n_train
    history = []
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        values = []
        for idx in batches(n, cfg.batch_size, rng):
            est, grads = elbo_gradients(q, assignment, data.x_train[idx], data.y_train[idx],
                                        lik, n_samples, rng, n)
            if not math.isfinite(est.value):
                raise TrainingError(epoch, "ELBO became non-finite")
            g = grads.arrays(q.arch.bias) + ([np.array([grads.c])] if learn_c else [])
            opt.step(g, lr)
            if learn_c:
                assignment = assignment.with_c(float(c_arr[0]))
            values.append(est.value)
        history.append(float(np.mean(values)))
    return ViResult(q, assignment, history)


# -- checkpoint --------------------------------------------------------------

def _flat(arrays):
    return [[float(v) for v in a.ravel()] for a in arrays]


def save_posterior(path, q: MeanFieldPosterior, assignment: FixedAssignment,
                   seed: int | None = None) -> None:
    doc = {
        "format": "partialbnn-posterior-v1",
        "dims": list(q.arch.dims),
        "activations": list(q.arch.activations),
        "bias": q.arch.bias,
        "scheme": assignment.mask.scheme,
        "policy": assignment.policy,
        "c": assignment.c,
        "learn_c": assignment.learn_c,
        "seed": seed,
        "n_fixed": count_fixed(assignment.mask),
        "mask": format_mask(assignment.mask),
        "fixed_values": _flat(assignment.values),
        "signs": None if assignment.signs is None else _flat(assignment.signs),
        "mu_w": _flat(q.mu_w), "rho_w": _flat(q.rho_w),
        "mu_b": _flat(q.mu_b), "rho_b": _flat(q.rho_b),
    }
    Path(path).write_text(json.dumps(doc))


def load_posterior(path) -> tuple[MeanFieldPosterior, FixedAssignment]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "partialbnn-posterior-v1":
        raise ValueError(f"{path} is not a partialbnn posterior checkpoint")
    mask: LayerMask = parse_mask(doc["mask"])
    arch = mask.arch
    wshape = arch.weight_shapes
    unflat_w = lambda xs: [np.array(v).reshape(s) for v, s in zip(xs, wshape)]
    unflat_b = lambda xs: [np.array(v).reshape(s[1]) for v, s in zip(xs, wshape)]
    signs = None if doc["signs"] is None else unflat_w(doc["signs"])
    assignment = FixedAssignment(mask, doc["policy"], unflat_w(doc["fixed_values"]), signs,
                                 doc["c"], doc["learn_c"])
    q = MeanFieldPosterior(arch, [~m for m in mask.matrices], unflat_w(doc["mu_w"]),
                           unflat_w(doc["rho_w"]), unflat_b(doc["mu_b"]), unflat_b(doc["rho_b"]))
    return q, assignment
