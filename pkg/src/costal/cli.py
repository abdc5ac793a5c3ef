"""Command line entry point: ``costal {run,sweep-gamma,compare,gen-data}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .experiment import STRATEGIES, ConfigError, ExperimentConfig, compare_strategies, gamma_sweep, run_experiment
from .synthetic import SyntheticSpec, generate_synthetic

log = logging.getLogger("costal")


def _base_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if getattr(args, "strategy", None):
        updates["strategy"] = args.strategy
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "max_rounds", None) is not None:
        updates["max_rounds"] = args.max_rounds
    if getattr(args, "no_early_stop", False):
        updates["early_stop"] = False
    if getattr(args, "cold_start", False):
        updates["cold_start"] = True
    if getattr(args, "dump_aug", None):
        updates["dump_aug_dir"] = args.dump_aug
    try:
        return cfg.with_(**updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated list of numbers: {text!r}") from None


def cmd_run(args) -> int:
    cfg = _base_config(args)
    out = args.out or cfg.output_dir or "costal_out"
    curve = run_experiment(cfg.with_(output_dir=out))
    last = curve.final("test")
    print(f"{cfg.strategy}: {curve.n_rounds()} rows, stop: {curve.stop_reason}, "
          f"final test acc {last.acc:.4f}; wrote {out}/curve.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    gammas = _float_list(args.gammas)
    summary = gamma_sweep(cfg, gammas, n_seeds=args.seeds, base_seed=args.base_seed)
    out = Path(args.out or cfg.output_dir or "costal_out")
    summary.write(out / "summary.csv")
    print(f"wrote {out / 'summary.csv'} ({len(summary.rows)} rows)")
    return 0


def cmd_compare(args) -> int:
    cfg = _base_config(args)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    bad = [s for s in strategies if s not in STRATEGIES]
    if bad or not strategies:
        raise ConfigError(f"unknown strategies {bad}; choose from {STRATEGIES}")
    summary = compare_strategies([cfg.with_(strategy=s) for s in strategies], args.seeds, base_seed=args.base_seed)
    out = Path(args.out or cfg.output_dir or "costal_out")
    summary.write(out / "summary.csv")
    print(f"wrote {out / 'summary.csv'} ({len(summary.rows)} rows)")
    return 0


def cmd_gen_data(args) -> int:
    from PIL import Image

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    spec = cfg.dataset if isinstance(cfg.dataset, SyntheticSpec) else SyntheticSpec()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    if args.n_samples is not None:
        spec = dataclasses.replace(spec, n_samples=args.n_samples)
    data = generate_synthetic(spec)
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rows = []
    for split in (data.train, data.val, data.test):
        for sid, img, lab in zip(split.ids, split.images, split.labels):
            rel = f"images/{int(sid):06d}.png"
            Image.fromarray(np.round(img * 255).astype(np.uint8)).save(out / rel)
            rows.append((int(sid), rel, int(lab)))
    rows.sort()
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "path", "label"])
        w.writerows(rows)
    print(f"wrote {len(rows)} images and {out / 'manifest.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="costal", description="Cost-effective active learning experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, strategy=True):
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--max-rounds", type=int)
        sp.add_argument("--no-early-stop", action="store_true", help="ignore the significance stopping rule")
        sp.add_argument("--cold-start", action="store_true", help="re-initialise the model every round")
        if strategy:
            sp.add_argument("--strategy", choices=STRATEGIES)

    run = sub.add_parser("run", help="run one experiment, write curve.csv and selection_log.csv")
    common(run)
    run.add_argument("--dump-aug", metavar="DIR", help="also write augmented images as PNG")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep-gamma", help="learning curves across gamma values")
    common(sw)
    sw.add_argument("--gammas", default="0,0.3,0.5,0.7,1")
    sw.add_argument("--seeds", type=int, default=5)
    sw.add_argument("--base-seed", type=int, default=0)
    sw.set_defaults(func=cmd_sweep)

    cmp_ = sub.add_parser("compare", help="compare strategies over several seeds")
    common(cmp_, strategy=False)
    cmp_.add_argument("--strategies", default="random,sa,sa_as")
    cmp_.add_argument("--seeds", type=int, default=10)
    cmp_.add_argument("--base-seed", type=int, default=0)
    cmp_.set_defaults(func=cmd_compare)

    gen = sub.add_parser("gen-data", help="write the synthetic dataset as PNGs plus manifest.csv")
    gen.add_argument("--config")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--n-samples", type=int)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level reporter
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
