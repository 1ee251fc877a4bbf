"""Command line driver.

    partialbnn gen-data     --config cfg.yaml
    partialbnn train-map    --config cfg.yaml
    partialbnn train-vi     --config cfg.yaml
    partialbnn evaluate     --config cfg.yaml
    partialbnn suite        --config cfg.yaml
    partialbnn verify-masks --config cfg.yaml

``--seed`` replaces the configured seed list, ``--out`` the output
directory and ``--threads`` the number of worker processes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment as ex
from .data import save_snapshot
from .network import save_params

COMMANDS = ("gen-data", "train-map", "train-vi", "evaluate", "suite", "verify-masks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="partialbnn", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--seed", type=int, default=None, help="run only this seed")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="parallel worker processes")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_with_overrides(args) -> ex.ExperimentConfig:
    cfg = ex.load_config(args.config)
    if args.seed is not None:
        cfg.experiment.seeds = [args.seed]
    if args.out is not None:
        cfg.experiment.out_dir = str(args.out)
    if args.threads is not None:
        cfg.experiment.threads = args.threads
    cfg.validate()
    return cfg


def cmd_gen_data(cfg):
    for seed in cfg.experiment.seeds:
        target = Path(cfg.experiment.out_dir) / f"seed_{seed}" / "data"
        save_snapshot(ex.build_data(cfg, seed), target)
        print(f"wrote {target}")


def cmd_train_map(cfg):
    for seed in cfg.experiment.seeds:
        data = ex.build_data(cfg, seed)
        params, history = ex.run_map(cfg, data, seed)
        out = Path(cfg.experiment.out_dir) / f"seed_{seed}" / "MAP"
        out.mkdir(parents=True, exist_ok=True)
        save_params(params, out / "map_params.txt")
        ex._write_history(out / "map_log.csv", "log_joint", history)
        print(f"seed {seed}: final log joint {history[-1] if history else float('nan'):.4f}")


def cmd_train_vi(cfg):
    for label in cfg.variants():
        for seed in cfg.experiment.seeds:
            _, _, info = ex.train_variant(cfg, label, seed)
            print(f"{label} seed {seed}: final ELBO {info['final_elbo']}")


def cmd_evaluate(cfg):
    for label in cfg.variants():
        for seed in cfg.experiment.seeds:
            doc = ex.evaluate_saved(cfg, label, seed)
            m = doc["metrics"]
            print(f"{label} seed {seed}: RMSE {m['rmse']:.4f}  LPP {m['lpp']:.4f}")


def cmd_suite(cfg):
    summary = ex.run_experiment(cfg)
    print(ex.format_table(summary["table"]), end="")
    for f in summary["failures"]:
        print(f"FAILED {f['variant']} seed {f['seed']}: {f['error']}", file=sys.stderr)
    return 1 if summary["failures"] and not summary["table"] else 0


def cmd_verify_masks(cfg):
    report = ex.verify_masks(cfg, seed=cfg.experiment.seeds[0])
    out = Path(cfg.experiment.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify_masks.json").write_text(json.dumps(report, indent=2) + "\n")
    for row in report["architectures"]:
        print(f"{tuple(row['dims'])}: residual permutations per hidden layer "
              f"{row['residual_permutations']}")
    return 0 if report["all_symmetry_free"] or cfg.fixing.scheme in ("none", "random") else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_with_overrides(args)
    except (ex.ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    handler = {
        "gen-data": cmd_gen_data,
        "train-map": cmd_train_map,
        "train-vi": cmd_train_vi,
        "evaluate": cmd_evaluate,
        "suite": cmd_suite,
        "verify-masks": cmd_verify_masks,
    }[args.command]
    return handler(cfg) or 0


if __name__ == "__main__":
    sys.exit(main())
