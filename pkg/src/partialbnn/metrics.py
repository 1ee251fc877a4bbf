"""Predictive RMSE and Monte Carlo log posterior predictive."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_math import seeded_rng
from .data import RegressionDataset
from .map_training import GaussianLikelihood
from .mfvi import MeanFieldPosterior, sample_params
from .network import FixedAssignment, forward


def logsumexp(values: np.ndarray, axis: int = 0) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    top = np.max(values, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(values - top), axis=axis, keepdims=True)) + top
    return np.squeeze(out, axis=axis)


def lpp_from_log_densities(log_dens: np.ndarray) -> np.ndarray:
    """``log mean exp`` over the sample axis (axis 0)."""
    log_dens = np.asarray(log_dens, dtype=np.float64)
    return logsumexp(log_dens, axis=0) - math.log(log_dens.shape[0])


def predictive_samples(q: MeanFieldPosterior, assignment: FixedAssignment, x: np.ndarray,
                       n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Network outputs for ``n_samples`` posterior draws, shape ``(S, N, D_out)``.

    The same sampled networks are used for every row of ``x``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    params = sample_params(q, assignment, rng, n_samples)
    return forward(params, x)


def rmse(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def predictive_mean_rmse(q, assignment, x, y, n_samples: int, rng) -> float:
    preds = predictive_samples(q, assignment, x, n_samples, rng)
    return rmse(preds.mean(axis=0), y)


def log_posterior_predictive(q, assignment, x_star, y_star, lik: GaussianLikelihood,
                             n_samples: int = 1000, rng=None) -> float:
    """LPP of a single test point from ``n_samples`` posterior draws."""
    x_star = np.atleast_2d(np.asarray(x_star, dtype=np.float64))
    y_star = np.atleast_2d(np.asarray(y_star, dtype=np.float64))
    preds = predictive_samples(q, assignment, x_star, n_samples, rng)
    return float(lpp_from_log_densities(lik.log_density(y_star, preds))[0])


@dataclass
class EvalReport:
    rmse: float
    lpp: float
    n_eval_samples: int
    seed: int | None
    per_point_lpp: np.ndarray = field(repr=False)
    pred_mean: np.ndarray = field(repr=False)
    pred_std: np.ndarray = field(repr=False)
    rmse_original_units: float | None = None

    def summary(self) -> dict:
        out = {"rmse": self.rmse, "lpp": self.lpp, "n_eval_samples": self.n_eval_samples,
               "seed": self.seed}
        if self.rmse_original_units is not None:
            out["rmse_original_units"] = self.rmse_original_units
        return out

    def write_json(self, path, config: dict | None = None) -> None:
        doc = {"metrics": self.summary(), "config": config or {}}
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def write_points_csv(self, path) -> None:
        d = self.pred_mean.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "lpp"] + [f"mean_{j + 1}" for j in range(d)]
                       + [f"std_{j + 1}" for j in range(d)])
            for i in range(self.pred_mean.shape[0]):
                w.writerow([i, repr(float(self.per_point_lpp[i]))]
                           + [repr(float(v)) for v in self.pred_mean[i]]
                           + [repr(float(v)) for v in self.pred_std[i]])


def evaluate(q: MeanFieldPosterior, assignment: FixedAssignment, data: RegressionDataset,
             lik: GaussianLikelihood, n_samples: int = 1000, rng=None, seed: int | None = None,
             original_units: bool = False) -> EvalReport:
    """Test-set RMSE of the predictive mean and mean per-point LPP.

    Metrics are in the (standardised) units of ``data``; ``original_units``
    adds the RMSE after undoing target standardisation. ``pred_std`` is the
    standard deviation of network outputs across samples (noise excluded).
    """
    if rng is None:
        rng = seeded_rng(0 if seed is None else seed)
    preds = predictive_samples(q, assignment, data.x_test, n_samples, rng)
    mean = preds.mean(axis=0)
    per_point = lpp_from_log_densities(lik.log_density(data.y_test, preds))
    report = EvalReport(
        rmse=rmse(mean, data.y_test),
        lpp=float(per_point.mean()),
        n_eval_samples=n_samples,
        seed=seed,
        per_point_lpp=per_point,
        pred_mean=mean,
        pred_std=preds.std(axis=0),
    )
    if original_units:
        ys = data.y_stats
        report.rmse_original_units = rmse(ys.invert(mean), ys.invert(data.y_test))
    return report


def prediction_grid(q, assignment, lik: GaussianLikelihood, rng, lo=-4.0, hi=4.0, n=401,
                    n_samples: int = 300) -> np.ndarray:
    """Columns ``x, mean, std`` over a 1-D grid; ``std`` includes the noise.

    This is the data behind a predictive-mean-and-band plot for 1-D inputs.
    """
    xs = np.linspace(lo, hi, n)
    preds = predictive_samples(q, assignment, xs[:, None], n_samples, rng)[..., 0]
    std = np.sqrt(preds.var(axis=0) + lik.variance)
    return np.column_stack([xs, preds.mean(axis=0), std])


def write_grid_csv(grid: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "mean", "std"])
        for row in grid:
            w.writerow([repr(float(v)) for v in row])
