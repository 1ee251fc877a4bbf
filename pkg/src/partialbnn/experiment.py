"""Config-driven experiment pipeline: data, MAP, fixing, MFVI, evaluation.

A run is fully determined by its config and seed. Every stage draws from
its own generator derived from ``(seed, stage name)``, so two variants run
with the same seed share data splits, initialisation noise and evaluation
noise wherever their stages coincide.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .data import GpGenConfig, RegressionDataset, generate_gp_dataset, load_uci_energy
from .fixing import no_fixing, prune, signed_constant
from .map_training import GaussianLikelihood, extract_fixed_values, train_map
from .masks import (Architecture, LayerMask, count_fixed, fully_connected_count,
                    generate_mask, generate_random_mask, save_mask)
from .metrics import EvalReport, evaluate, prediction_grid, write_grid_csv
from .mfvi import ViResult, load_posterior, save_posterior, train_vi
from .network import FixedAssignment, MlpParams, init_params, save_params
from .optim import AdamConfig
from .symmetry import MAX_ENUMERATION_WIDTH, residual_permutations

log = logging.getLogger(__name__)

# variant label -> (scheme, policy, structured scheme whose size a random mask copies)
VARIANTS = {
    "HF": ("heavy", "signed_constant", None),
    "LF": ("light", "signed_constant", None),
    "HP": ("heavy", "prune", None),
    "LP": ("light", "prune", None),
    "HMAP": ("heavy", "map", None),
    "LMAP": ("light", "map", None),
    "HRF": ("random", "signed_constant", "heavy"),
    "LRF": ("random", "signed_constant", "light"),
    "Vanilla": ("none", "none", None),
}
TABLE_ORDER = list(VARIANTS)


class ConfigError(ValueError):
    pass


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class ExperimentSection:
    kind: str = "toy"  # toy | uci
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    threads: int = 1
    suite: list[str] | None = None


@dataclass
class DataSection:
    path: str | None = None
    lengthscale: float = 0.2
    noise_std: float = 0.05
    n_points: int = 64
    n_test: int = 64


@dataclass
class ModelSection:
    dims: list[int] = field(default_factory=lambda: [1, 50, 50, 1])
    activation: str = "sigmoid"
    likelihood_scale: float = 0.05


@dataclass
class FixingSection:
    scheme: str = "none"  # light | heavy | random | none
    policy: str = "signed_constant"  # prune | signed_constant | map
    c: float | str = 5.0  # a number, or "learnable"
    c_init: float = 1.0
    random_match: str = "heavy"  # random masks copy this scheme's fixed count
    n_fixed: int | None = None  # explicit size for random masks


@dataclass
class TrainSection:
    epochs: int = 10000
    lr_start: float = 1e-2
    lr_end: float = 1e-3
    batch_size: int | None = None
    n_samples: int = 16

    def adam(self) -> AdamConfig:
        return AdamConfig(self.epochs, self.lr_start, self.lr_end, self.batch_size)


@dataclass
class EvalSection:
    n_samples: int = 300
    grid: bool = True
    original_units: bool = False


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    fixing: FixingSection = field(default_factory=FixingSection)
    map: TrainSection = field(default_factory=lambda: TrainSection(epochs=2000))
    vi: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        sections = {f.name: f for f in fields(cls)}
        unknown = set(doc) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, value in doc.items():
            default = getattr(cls(), name)
            section_type = type(default)
            allowed = {f.name for f in fields(section_type)}
            bad = set(value or {}) - allowed
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            merged = asdict(default)
            merged.update(value or {})
            kwargs[name] = section_type(**merged)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        ex = self.experiment
        if ex.kind not in ("toy", "uci"):
            raise ConfigError(f"experiment.kind must be toy or uci, got {ex.kind!r}")
        if not ex.seeds:
            raise ConfigError("experiment.seeds must not be empty")
        if ex.threads < 1:
            raise ConfigError("experiment.threads must be >= 1")
        for v in ex.suite or []:
            if v not in VARIANTS:
                raise ConfigError(f"unknown suite variant {v!r}; choose from {TABLE_ORDER}")
        if ex.kind == "uci" and not self.data.path:
            raise ConfigError("uci experiments need data.path")
        fx = self.fixing
        if fx.scheme not in ("light", "heavy", "random", "none"):
            raise ConfigError(f"unknown scheme {fx.scheme!r}")
        if fx.scheme != "none" and fx.policy not in ("prune", "signed_constant", "map"):
            raise ConfigError(f"unknown policy {fx.policy!r}")
        if isinstance(fx.c, str) and fx.c != "learnable":
            raise ConfigError("fixing.c must be a number or 'learnable'")
        if fx.random_match not in ("light", "heavy"):
            raise ConfigError("fixing.random_match must be light or heavy")
        if self.model.likelihood_scale <= 0:
            raise ConfigError("model.likelihood_scale must be > 0")
        Architecture.mlp(self.model.dims, self.model.activation)
        for section in (self.map, self.vi):
            section.adam()
            if section.n_samples < 1:
                raise ConfigError("n_samples must be >= 1")
        if self.eval.n_samples < 1:
            raise ConfigError("eval.n_samples must be >= 1")

    @property
    def arch(self) -> Architecture:
        return Architecture.mlp(self.model.dims, self.model.activation)

    @property
    def likelihood(self) -> GaussianLikelihood:
        return GaussianLikelihood(self.model.likelihood_scale)

    def variants(self) -> list[str]:
        if self.experiment.suite:
            return list(self.experiment.suite)
        return [single_variant_label(self.fixing)]


def single_variant_label(fx: FixingSection) -> str:
    if fx.scheme == "none":
        return "Vanilla"
    for label, (scheme, policy, match) in VARIANTS.items():
        if scheme == fx.scheme and policy == fx.policy and (match is None or match == fx.random_match):
            return label
    return f"{fx.scheme}-{fx.policy}"


def load_config(path) -> ExperimentConfig:
    doc = yaml.safe_load(Path(path).read_text()) or {}
    return ExperimentConfig.from_dict(doc)


def fixing_for_variant(cfg: ExperimentConfig, label: str) -> FixingSection:
    fx = FixingSection(**asdict(cfg.fixing))
    if label in VARIANTS:
        scheme, policy, match = VARIANTS[label]
        fx.scheme, fx.policy = scheme, policy
        if match is not None:
            fx.random_match = match
    return fx


# -- stages ------------------------------------------------------------------

def build_data(cfg: ExperimentConfig, seed: int) -> RegressionDataset:
    if cfg.experiment.kind == "toy":
        d = cfg.data
        return generate_gp_dataset(GpGenConfig(d.lengthscale, d.noise_std, n_points=d.n_points,
                                               n_test=d.n_test, seed=seed))
    return load_uci_energy(cfg.data.path, seed)


def build_mask(arch: Architecture, fx: FixingSection, seed: int) -> LayerMask:
    if fx.scheme in ("light", "heavy", "none"):
        return generate_mask(arch, fx.scheme)
    n = fx.n_fixed if fx.n_fixed is not None else count_fixed(generate_mask(arch, fx.random_match))
    return generate_random_mask(arch, n, stage_rng(seed, "mask"))


def build_assignment(mask: LayerMask, fx: FixingSection, seed: int,
                     map_params: MlpParams | None = None) -> FixedAssignment:
    if fx.scheme == "none":
        return no_fixing(mask.arch)
    if fx.policy == "prune":
        return prune(mask)
    if fx.policy == "signed_constant":
        learn = fx.c == "learnable"
        c = fx.c_init if learn else float(fx.c)
        return signed_constant(mask, c, stage_rng(seed, "signs"), learn_c=learn)
    if map_params is None:
        raise ConfigError("the map policy needs MAP parameters")
    return extract_fixed_values(map_params, mask)


def run_map(cfg: ExperimentConfig, data: RegressionDataset, seed: int) -> tuple[MlpParams, list[float]]:
    rng = stage_rng(seed, "map")
    return train_map(cfg.arch, data, cfg.likelihood, cfg.map.adam(), rng)


def run_vi(cfg: ExperimentConfig, assignment: FixedAssignment, data: RegressionDataset,
           seed: int) -> ViResult:
    return train_vi(assignment, data, cfg.likelihood, cfg.vi.adam(), stage_rng(seed, "vi"),
                    n_samples=cfg.vi.n_samples)


def run_eval(cfg: ExperimentConfig, result: ViResult, data: RegressionDataset, seed: int) -> EvalReport:
    return evaluate(result.posterior, result.assignment, data, cfg.likelihood,
                    cfg.eval.n_samples, stage_rng(seed, "eval"), seed=seed,
                    original_units=cfg.eval.original_units)


def _write_history(path, name: str, history: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", name])
        for i, v in enumerate(history):
            w.writerow([i, repr(float(v))])


def run_dir(cfg: ExperimentConfig, seed: int, label: str) -> Path:
    return Path(cfg.experiment.out_dir) / f"seed_{seed}" / label


def train_variant(cfg: ExperimentConfig, label: str, seed: int,
                  data: RegressionDataset | None = None) -> tuple[ViResult, RegressionDataset, dict]:
    """Data, optional MAP, mask and MFVI for one variant; writes checkpoints."""
    out = run_dir(cfg, seed, label)
    out.mkdir(parents=True, exist_ok=True)
    fx = fixing_for_variant(cfg, label)
    data = data if data is not None else build_data(cfg, seed)
    map_params = None
    if fx.scheme != "none" and fx.policy == "map":
        map_params, map_log = run_map(cfg, data, seed)
        save_params(map_params, out / "map_params.txt")
        _write_history(out / "map_log.csv", "log_joint", map_log)
    mask = build_mask(cfg.arch, fx, seed)
    save_mask(mask, out / "mask.txt")
    assignment = build_assignment(mask, fx, seed, map_params)
    result = run_vi(cfg, assignment, data, seed)
    save_posterior(out / "posterior.json", result.posterior, result.assignment, seed)
    _write_history(out / "elbo_log.csv", "elbo", result.history)
    info = {
        "variant": label,
        "seed": seed,
        "scheme": fx.scheme,
        "policy": fx.policy if fx.scheme != "none" else "none",
        "n_fixed": count_fixed(mask),
        "n_variational": result.posterior.n_variational,
        "c": result.assignment.c,
        "final_elbo": result.history[-1] if result.history else None,
        "mask_warnings": mask.warnings,
    }
    return result, data, info


def evaluate_variant(cfg: ExperimentConfig, label: str, seed: int, result: ViResult,
                     data: RegressionDataset, info: dict) -> dict:
    out = run_dir(cfg, seed, label)
    report = run_eval(cfg, result, data, seed)
    report.write_points_csv(out / "points.csv")
    if cfg.experiment.kind == "toy" and cfg.eval.grid and cfg.arch.dims[0] == 1:
        grid = prediction_grid(result.posterior, result.assignment, cfg.likelihood,
                               stage_rng(seed, "grid"), n_samples=cfg.eval.n_samples)
        write_grid_csv(grid, out / "grid.csv")
    doc = {"metrics": report.summary(), "run": info, "config": cfg.to_dict()}
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def run_single(cfg: ExperimentConfig, label: str, seed: int) -> dict:
    result, data, info = train_variant(cfg, label, seed)
    return evaluate_variant(cfg, label, seed, result, data, info)


def evaluate_saved(cfg: ExperimentConfig, label: str, seed: int) -> dict:
    """Evaluate the checkpoint written by an earlier training run."""
    out = run_dir(cfg, seed, label)
    q, assignment = load_posterior(out / "posterior.json")
    data = build_data(cfg, seed)
    info = {"variant": label, "seed": seed, "scheme": assignment.mask.scheme,
            "policy": assignment.policy, "n_fixed": count_fixed(assignment.mask),
            "n_variational": q.n_variational, "c": assignment.c}
    return evaluate_variant(cfg, label, seed, ViResult(q, assignment), data, info)


def _job(args):
    cfg_dict, label, seed = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        return label, seed, run_single(cfg, label, seed), None
    except Exception as exc:  # a failed seed is recorded, the others still run
        log.exception("variant %s seed %s failed", label, seed)
        return label, seed, None, f"{type(exc).__name__}: {exc}"


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Every (variant, seed) pair, then mean and std across seeds per variant."""
    jobs = [(cfg.to_dict(), label, seed) for label in cfg.variants() for seed in cfg.experiment.seeds]
    if cfg.experiment.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.experiment.threads) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    reports: dict[str, dict[int, dict]] = {}
    failures = []
    for label, seed, doc, err in results:
        if err is not None:
            failures.append({"variant": label, "seed": seed, "error": err})
        else:
            reports.setdefault(label, {})[seed] = doc
    table = aggregate(reports, cfg.variants())
    out = Path(cfg.experiment.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"table": table, "failures": failures, "config": cfg.to_dict()}
    (out / "aggregate.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_table_csv(table, out / "aggregate.csv")
    (out / "aggregate.txt").write_text(format_table(table))
    return summary


def _mean_std(values: list[float]) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return float(a.mean()), std


def aggregate(reports: dict[str, dict[int, dict]], order: list[str]) -> dict:
    """Per variant: mean and sample std (ddof=1) of RMSE and LPP over seeds."""
    table = {}
    for label in order:
        per_seed = reports.get(label, {})
        if not per_seed:
            continue
        seeds = sorted(per_seed)
        rmse = [per_seed[s]["metrics"]["rmse"] for s in seeds]
        lpp = [per_seed[s]["metrics"]["lpp"] for s in seeds]
        rm, rs = _mean_std(rmse)
        lm, ls = _mean_std(lpp)
        table[label] = {"seeds": seeds, "rmse_mean": rm, "rmse_std": rs,
                        "lpp_mean": lm, "lpp_std": ls}
    return table


def write_table_csv(table: dict, path) -> None:
    labels = list(table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric"] + labels)
        for metric in ("rmse", "lpp"):
            w.writerow([f"{metric}_mean"] + [repr(table[l][f"{metric}_mean"]) for l in labels])
            w.writerow([f"{metric}_std"] + [repr(table[l][f"{metric}_std"]) for l in labels])


def format_table(table: dict) -> str:
    labels = list(table)
    if not labels:
        return "no completed runs\n"
    cells = {
        "RMSE": [f"{table[l]['rmse_mean']:.3f}±{table[l]['rmse_std']:.3f}" for l in labels],
        "LPP": [f"{table[l]['lpp_mean']:.3f}±{table[l]['lpp_std']:.3f}" for l in labels],
    }
    width = max([len(l) for l in labels] + [len(c) for row in cells.values() for c in row]) + 2
    lines = [" " * 6 + "".join(l.rjust(width) for l in labels)]
    for name, row in cells.items():
        lines.append(name.ljust(6) + "".join(c.rjust(width) for c in row))
    return "\n".join(lines) + "\n"


# -- mask verification -------------------------------------------------------

def verification_architectures(activation: str = "tanh") -> list[Architecture]:
    """Small MLPs whose every hidden layer has at most one fully connected neuron."""
    family = [Architecture.mlp((2, h, 2), activation) for h in range(3, 8)]
    family += [Architecture.mlp((3, h, h, 3), activation) for h in range(3, 7)]
    return [a for a in family
            if all(fully_connected_count(a, l) <= 1 for l in a.hidden_layers)]


def verify_masks(cfg: ExperimentConfig, architectures: list[Architecture] | None = None,
                 seed: int = 0) -> dict:
    """Residual permutation counts per hidden layer for the configured fixing.

    Uses the configured architecture when every hidden width fits the
    enumeration bound, otherwise the small verification family. The map
    policy is checked with values from a randomly initialised network.
    """
    if architectures is None:
        arch = cfg.arch
        if all(arch.dims[l] <= MAX_ENUMERATION_WIDTH for l in arch.hidden_layers):
            architectures = [arch]
        else:
            architectures = verification_architectures(cfg.model.activation)
    fx = cfg.fixing
    rows = []
    for arch in architectures:
        mask = build_mask(arch, fx, seed)
        source = init_params(arch, stage_rng(seed, "verify")) if fx.policy == "map" else None
        assignment = build_assignment(mask, fx, seed, source)
        counts = {}
        for layer in arch.hidden_layers:
            counts[str(layer)] = len(residual_permutations(assignment, layer))
        rows.append({"dims": list(arch.dims), "scheme": fx.scheme, "policy": assignment.policy,
                     "n_fixed": count_fixed(mask), "residual_permutations": counts,
                     "symmetry_free": all(v == 1 for v in counts.values())})
    return {"architectures": rows, "all_symmetry_free": all(r["symmetry_free"] for r in rows)}
