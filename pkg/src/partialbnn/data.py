"""Regression datasets: the GP toy problem and UCI Energy Efficiency."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_math import NotPositiveDefiniteError, cholesky, seeded_rng


class DataFormatError(ValueError):
    pass


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, a: np.ndarray) -> "Standardizer":
        std = a.std(axis=0)
        return cls(a.mean(axis=0), np.where(std > 0, std, 1.0))

    @classmethod
    def identity(cls, n_cols: int) -> "Standardizer":
        return cls(np.zeros(n_cols), np.ones(n_cols))

    def apply(self, a: np.ndarray) -> np.ndarray:
        return (a - self.mean) / self.std

    def invert(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        if a.shape[-1] != self.mean.shape[0]:
            raise ValueError(f"expected {self.mean.shape[0]} columns, got {a.shape[-1]}")
        return a * self.std + self.mean


@dataclass
class RegressionDataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    x_stats: Standardizer | None = None
    y_stats: Standardizer | None = None
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None
    name: str = "data"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for attr in ("x_train", "y_train", "x_test", "y_test"):
            a = np.asarray(getattr(self, attr), dtype=np.float64)
            setattr(self, attr, a[:, None] if a.ndim == 1 else a)
        if self.x_stats is None:
            self.x_stats = Standardizer.identity(self.x_train.shape[1])
        if self.y_stats is None:
            self.y_stats = Standardizer.identity(self.y_train.shape[1])

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]


def destandardize(values: np.ndarray, stats: Standardizer) -> np.ndarray:
    return stats.invert(values)


# -- GP toy data -------------------------------------------------------------

@dataclass
class GpGenConfig:
    lengthscale: float = 0.2
    noise_std: float = 0.05
    intervals: tuple[tuple[float, float], ...] = ((-2.5, -0.75), (0.75, 2.5))
    n_points: int = 64
    n_test: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lengthscale <= 0 or self.noise_std < 0:
            raise ValueError("lengthscale must be > 0 and noise_std >= 0")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")


def rbf_kernel(a: np.ndarray, b: np.ndarray, lengthscale: float) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 1)
    b = np.asarray(b, dtype=np.float64).reshape(1, -1)
    return np.exp(-((a - b) ** 2) / (2.0 * lengthscale ** 2))


def sample_gp(x: np.ndarray, lengthscale: float, rng: np.random.Generator,
              n_draws: int = 1) -> np.ndarray:
    """Zero-mean GP draws at ``x``, shape ``(len(x), n_draws)``.

    Jitter starts at 1e-10 and is escalated by factors of ten up to 1e-6.
    """
    k = rbf_kernel(x, x, lengthscale)
    n = k.shape[0]
    jitter = 1e-10
    while True:
        try:
            chol = cholesky(k + jitter * np.eye(n))
            break
        except NotPositiveDefiniteError:
            jitter *= 10.0
            if jitter > 1e-6:
                raise
    return chol @ rng.standard_normal((n, n_draws))


def _sample_intervals(intervals, n: int, rng: np.random.Generator) -> np.ndarray:
    counts = [n // len(intervals)] * len(intervals)
    for i in range(n - sum(counts)):
        counts[i] += 1
    parts = [rng.uniform(lo, hi, size=k) for (lo, hi), k in zip(intervals, counts)]
    return np.concatenate(parts)


def generate_gp_dataset(cfg: GpGenConfig) -> RegressionDataset:
    """Noisy GP draw on inputs split evenly between the configured intervals.

    Train and test inputs come from the same intervals and share one joint
    function draw. Nothing is standardised.
    """
    rng = seeded_rng(cfg.seed)
    x_tr = _sample_intervals(cfg.intervals, cfg.n_points, rng)
    x_te = _sample_intervals(cfg.intervals, cfg.n_test, rng) if cfg.n_test else np.empty(0)
    x_all = np.concatenate([x_tr, x_te])
    f = sample_gp(x_all, cfg.lengthscale, rng)[:, 0]
    y = f + cfg.noise_std * rng.standard_normal(f.shape)
    n = cfg.n_points
    return RegressionDataset(
        x_tr[:, None], y[:n, None], x_te[:, None], y[n:, None],
        name="gp_toy",
        meta={"lengthscale": cfg.lengthscale, "noise_std": cfg.noise_std,
              "intervals": [list(iv) for iv in cfg.intervals], "seed": cfg.seed},
    )


# -- UCI Energy --------------------------------------------------------------

ENERGY_FEATURES = 8
ENERGY_TARGETS = 2


def read_numeric_csv(path, n_cols: int | None = None) -> tuple[list[str], np.ndarray]:
    """Header plus float matrix; errors name the 1-based file row and column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        width = len(header) if n_cols is None else n_cols
        if len(header) != width:
            raise DataFormatError(f"{path}: header has {len(header)} columns, expected {width}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != width:
                raise DataFormatError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {lineno}, col {col}: non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise DataFormatError(f"{path}: row {lineno}, col {col}: non-finite value")
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return header, np.array(rows)


def split_and_standardize(x: np.ndarray, y: np.ndarray, seed: int, train_frac: float = 0.8,
                          name: str = "data") -> RegressionDataset:
    n = x.shape[0]
    n_train = int(math.floor(train_frac * n))
    order = seeded_rng(seed).permutation(n)
    tr, te = np.sort(order[:n_train]), np.sort(order[n_train:])
    xs, ys = Standardizer.fit(x[tr]), Standardizer.fit(y[tr])
    return RegressionDataset(xs.apply(x[tr]), ys.apply(y[tr]), xs.apply(x[te]), ys.apply(y[te]),
                             xs, ys, tr, te, name=name, meta={"split_seed": seed})


def load_uci_energy(path, seed: int) -> RegressionDataset:
    """Random 80/20 split, inputs and targets standardised with train statistics."""
    _, table = read_numeric_csv(path, ENERGY_FEATURES + ENERGY_TARGETS)
    ds = split_and_standardize(table[:, :ENERGY_FEATURES], table[:, ENERGY_FEATURES:], seed,
                               name="uci_energy")
    ds.meta["source"] = str(path)
    return ds


# -- snapshots ---------------------------------------------------------------

def save_snapshot(ds: RegressionDataset, directory) -> None:
    """``train.csv``/``test.csv`` plus ``stats.json`` with statistics and split."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dx, dy = ds.x_train.shape[1], ds.y_train.shape[1]
    header = [f"x{i + 1}" for i in range(dx)] + [f"y{i + 1}" for i in range(dy)]
    for split, x, y in (("train", ds.x_train, ds.y_train), ("test", ds.x_test, ds.y_test)):
        with open(directory / f"{split}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in np.hstack([x, y]):
                w.writerow([repr(float(v)) for v in row])
    side = {
        "name": ds.name,
        "n_inputs": dx,
        "n_targets": dy,
        "x_mean": ds.x_stats.mean.tolist(), "x_std": ds.x_stats.std.tolist(),
        "y_mean": ds.y_stats.mean.tolist(), "y_std": ds.y_stats.std.tolist(),
        "train_idx": None if ds.train_idx is None else ds.train_idx.tolist(),
        "test_idx": None if ds.test_idx is None else ds.test_idx.tolist(),
        "meta": ds.meta,
    }
    (directory / "stats.json").write_text(json.dumps(side, indent=2))


def load_snapshot(directory) -> RegressionDataset:
    directory = Path(directory)
    side = json.loads((directory / "stats.json").read_text())
    dx = side["n_inputs"]
    _, tr = read_numeric_csv(directory / "train.csv")
    _, te = read_numeric_csv(directory / "test.csv")
    idx = lambda k: None if side[k] is None else np.array(side[k], dtype=int)
    return RegressionDataset(
        tr[:, :dx], tr[:, dx:], te[:, :dx], te[:, dx:],
        Standardizer(np.array(side["x_mean"]), np.array(side["x_std"])),
        Standardizer(np.array(side["y_mean"]), np.array(side["y_std"])),
        idx("train_idx"), idx("test_idx"), name=side["name"], meta=side["meta"],
    )
