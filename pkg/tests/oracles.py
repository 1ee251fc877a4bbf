"""Independent reference computations shared by the test modules."""

import math

import numpy as np
from scipy.stats import multivariate_normal

from partialbnn.mfvi import elbo


def central_diff(f, arr, idx, h):
    old = arr[idx]
    arr[idx] = old + h
    fp = f()
    arr[idx] = old - h
    fm = f()
    arr[idx] = old
    return (fp - fm) / (2 * h)


def conjugate_posterior(x, y, noise_std):
    """Exact posterior of w in y = w x + N(0, s^2), w ~ N(0, 1)."""
    x, y = np.ravel(x), np.ravel(y)
    precision = 1.0 + (x @ x) / noise_std ** 2
    mean = (x @ y) / noise_std ** 2 / precision
    return mean, 1.0 / math.sqrt(precision)


def conjugate_log_evidence(x, y, noise_std):
    x, y = np.ravel(x), np.ravel(y)
    cov = noise_std ** 2 * np.eye(len(x)) + np.outer(x, x)
    return float(multivariate_normal(np.zeros(len(x)), cov).logpdf(y))


def conjugate_exact_elbo(x, y, noise_std, m, s):
    """ELBO of q(w) = N(m, s^2) for the one-weight model, in closed form."""
    x, y = np.ravel(x), np.ravel(y)
    v = noise_std ** 2
    ell = np.sum(-0.5 * math.log(2 * math.pi * v) - ((y - m * x) ** 2 + x ** 2 * s ** 2) / (2 * v))
    kl = 0.5 * (m * m + s * s - 1.0) - math.log(s)
    return float(ell - kl)


def max_relative_error(analytic, numeric, floor=1e-8):
    a, n = np.asarray(analytic, float), np.asarray(numeric, float)
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


def elbo_fd_check(q, assignment, x, y, lik, n_samples, seed, dataset_size, grads, h=1e-5,
                  rng_factory=None):
    """Worst relative error of ELBO gradients against central differences.

    Every ELBO evaluation uses a fresh generator with the same seed, so the
    Monte Carlo noise is shared between the two sides of each difference.
    """
    from partialbnn.core_math import seeded_rng

    value = lambda: elbo(q, assignment, x, y, lik, n_samples, seeded_rng(seed), dataset_size).value
    analytic, numeric = [], []
    for name in ("mu_w", "rho_w", "mu_b", "rho_b"):
        if name.endswith("_b") and not q.arch.bias:
            continue
        for i, arr in enumerate(getattr(q, name)):
            g = getattr(grads, name)[i]
            for idx in np.ndindex(arr.shape):
                if name.endswith("_w") and not q.free[i][idx]:
                    continue
                analytic.append(g[idx])
                numeric.append(central_diff(value, arr, idx, h))
    c_err = None
    if assignment.has_c:
        c0 = assignment.c
        fc = lambda c: elbo(q, assignment.with_c(c), x, y, lik, n_samples, seeded_rng(seed),
                            dataset_size).value
        fd_c = (fc(c0 + h) - fc(c0 - h)) / (2 * h)
        c_err = max_relative_error([grads.c], [fd_c])
    return max_relative_error(analytic, numeric), c_err
