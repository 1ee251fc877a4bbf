"""
Mean-field VI on a model with a known answer
============================================

With one weight, a N(0, 1) prior and Gaussian noise the posterior is
Gaussian, so the mean-field family contains it. Training should land on it
and the ELBO should touch the log evidence.
"""

import math

import numpy as np

from partialbnn.core_math import seeded_rng
from partialbnn.data import RegressionDataset
from partialbnn.fixing import no_fixing
from partialbnn.map_training import GaussianLikelihood
from partialbnn.masks import Architecture
from partialbnn.mfvi import elbo, train_vi
from partialbnn.optim import AdamConfig

noise = 0.5
x = np.linspace(-1, 1, 12)[:, None]
y = 0.8 * x + noise * seeded_rng(0).normal(size=x.shape)

# closed form: precision adds up, mean is the weighted least-squares slope
precision = 1.0 + (x ** 2).sum() / noise ** 2
exact_mean = (x * y).sum() / noise ** 2 / precision
exact_std = 1.0 / math.sqrt(precision)
cov = noise ** 2 * np.eye(len(x)) + x @ x.T
_, logdet = np.linalg.slogdet(2 * math.pi * cov)
log_evidence = -0.5 * (logdet + (y.T @ np.linalg.solve(cov, y)).item())

arch = Architecture((1, 1), ("identity",), bias=False)
lik = GaussianLikelihood(noise)
res = train_vi(no_fixing(arch), RegressionDataset(x, y, x, y), lik,
               AdamConfig(epochs=5000, lr_start=1e-2, lr_end=1e-4), seeded_rng(1))
q = res.posterior
print(f"posterior mean  exact {exact_mean:.4f}  fitted {q.mu_w[0][0, 0]:.4f}")
print(f"posterior std   exact {exact_std:.4f}  fitted {q.sigma_w[0][0, 0]:.4f}")

est = elbo(q, res.assignment, x, y, lik, 200_000, seeded_rng(2))
print(f"log evidence {log_evidence:.4f}  Monte Carlo ELBO {est.value:.4f}")
