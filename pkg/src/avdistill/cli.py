"""Command-line entry point.

Subcommands: train, eval, bench, gen-data, grad-check. Exit codes: 0 on
success, 1 on usage errors, 2 on data or configuration errors, 3 on numeric
failures (non-finite losses, failed gradient checks).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .bench import DEFAULT_VARIANTS, bench, format_table
from .checkpoint import load_checkpoint
from .config import RunConfig, build_run_config, parse_config_file
from .data import PairedBatch, SyntheticSpec, generate_synthetic, load_features, save_features
from .errors import (
    ConfigError,
    DataError,
    DeterminismError,
    EngineError,
    FormatError,
    NumericError,
)
from .evaluate import evaluate
from .gradcheck import grad_check
from .losses import LossConfig, composite_loss
from .model import TowerSpec, TwoTowerModel
from .softalign import partition_batch
from .train import train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avdistill",
        description="Cross-modal metric learning with progressive self-distillation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write checkpoint + metrics")
    _add_train_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--model", required=True, help="checkpoint file")
    p_eval.add_argument("--data", required=True, help="dataset file (.avfd or .csv)")
    p_eval.add_argument("--out", default=None, help="optional JSON report path")

    p_bench = sub.add_parser("bench", help="run the ablation grid")
    _add_train_flags(p_bench)
    p_bench.add_argument(
        "--variants",
        default=",".join(DEFAULT_VARIANTS),
        help="comma-separated variant names",
    )

    p_gen = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    p_gen.add_argument("--classes", type=int, default=10)
    p_gen.add_argument("--per-class", type=int, default=40)
    p_gen.add_argument("--audio-dim", type=int, default=128)
    p_gen.add_argument("--visual-dim", type=int, default=1024)
    p_gen.add_argument("--noise", type=float, default=0.05)
    p_gen.add_argument("--correlation", type=float, default=1.0)
    p_gen.add_argument("--label-noise", type=float, default=0.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="output path (.avfd or .csv)")

    p_check = sub.add_parser("grad-check", help="finite-difference check of the composite loss")
    p_check.add_argument("--seed", type=int, default=7)
    p_check.add_argument("--pairs", type=int, default=8)
    p_check.add_argument("--tolerance", type=float, default=1e-3)
    return parser


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--data", default=None, help="dataset file; omitted -> synthetic data")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.add_argument("--schedule", choices=("step", "linear", "cosine"), default=None)
    p.add_argument("--r-start", type=float, default=None)
    p.add_argument("--r-end", type=float, default=None)
    p.add_argument("--strategy", choices=("all", "hard"), default=None)
    p.add_argument("--aa", choices=("identity", "attention"), default=None)
    p.add_argument("--anchor", choices=("audio", "visual", "symmetric"), default=None)
    p.add_argument("--no-ldis", action="store_true", help="drop the pair-distance term")
    p.add_argument("--hidden", default=None, help="comma-separated hidden layer widths")
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--margin", type=float, default=None)
    p.add_argument("--eval-every", type=int, default=None)

    def _flag_overrides(args: argparse.Namespace) -> dict[str, object]:
        mapping = {
            "seed": "train.seed",
            "data": "data.path",
            "out": "train.out",
            "epochs": "train.epochs",
            "batch": "train.batch",
            "lr": "train.lr",
            "optimizer": "train.optimizer",
            "schedule": "schedule.kind",
            "r_start": "schedule.start",
            "r_end": "schedule.end",
            "strategy": "loss.strategy",
            "aa": "loss.proxy",
            "anchor": "loss.anchor",
            "dropout": "model.dropout",
            "margin": "loss.margin",
            "eval_every": "train.eval_every",
        }
        overrides: dict[str, object] = {}
        for attr, key in mapping.items():
            value = getattr(args, attr)
            if value is not None:
                overrides[key] = value
        if args.hidden is not None:
            overrides["model.hidden"] = tuple(int(h) for h in args.hidden.split(","))
        if args.no_ldis:
            overrides["loss.pair_weight"] = 0.0
        return overrides

    p.set_defaults(flag_overrides=_flag_overrides)


def _run_config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else None
    return build_run_config(file_values, args.flag_overrides(args))


def _cmd_train(args: argparse.Namespace) -> int:
    config = _run_config_from_args(args)
    result = train(config)
    report = result.final_report
    if report is not None:
        print(report.format_text())
    if result.checkpoint_path:
        print(f"checkpoint = {result.checkpoint_path}")
        print(f"metrics = {result.metrics_path}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.model)
    _, data = load_features(args.data)
    report = evaluate(model, data)
    print(report.format_text())
    if args.out:
        with open(args.out, "w") as f:
            json.dump(report.as_dict(), f, indent=2)
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    config = _run_config_from_args(args)
    names = tuple(v.strip() for v in args.variants.split(",") if v.strip())
    rows = bench(config, names, out_dir=config.output_dir)
    print(format_table(rows))
    return EXIT_OK


def _cmd_gen_data(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        n_classes=args.classes,
        pairs_per_class=args.per_class,
        audio_dim=args.audio_dim,
        visual_dim=args.visual_dim,
        noise_scale=args.noise,
        correlation=args.correlation,
        label_noise=args.label_noise,
        seed=args.seed,
    )
    meta, data = generate_synthetic(spec)
    save_features(args.out, meta, data)
    print(f"wrote {meta.n_pairs} pairs ({meta.n_classes} classes) to {args.out}")
    return EXIT_OK


def _cmd_grad_check(args: argparse.Namespace) -> int:
    """Check the full composite-loss gradient on a small synthetic rig."""
    if args.pairs < 2:
        raise ConfigError(f"--pairs must be >= 2, got {args.pairs}")
    spec = SyntheticSpec(
        n_classes=3,
        pairs_per_class=max(2, (args.pairs + 2) // 3),
        audio_dim=24,
        visual_dim=40,
        noise_scale=0.3,
        seed=args.seed,
    )
    _, data = generate_synthetic(spec)
    rng = np.random.default_rng(args.seed)
    rows = rng.choice(len(data), size=args.pairs, replace=False)
    batch = data.take(np.sort(rows))
    audio_spec = TowerSpec(input_dim=24, output_dim=3, hidden_dims=(16, 16, 16), dropout_rate=0.1)
    visual_spec = TowerSpec(input_dim=40, output_dim=3, hidden_dims=(16, 16, 16), dropout_rate=0.1)
    model = TwoTowerModel.create(audio_spec, visual_spec, seed=args.seed)
    plan = partition_batch(len(batch), 0.5, [args.seed, 1])
    cfg = LossConfig()

    def closure(params: list[np.ndarray]) -> tuple[float, list[np.ndarray]]:
        for target, source in zip(model.parameters(), params):
            target[...] = source
        breakdown, grads = composite_loss(
            model, batch, plan, cfg, step_seed=[args.seed, 2]
        )
        return breakdown.total, grads

    max_rel = grad_check(
        closure,
        model.parameters(),
        tolerance=args.tolerance,
        max_coords_per_tensor=24,
        seed=args.seed,
    )
    print(f"max relative error = {max_rel:.3e} (tolerance {args.tolerance:.1e})")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage problems and 0 for --help; fold into our contract.
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    handlers = {
        "train": _cmd_train,
        "eval": _cmd_eval,
        "bench": _cmd_bench,
        "gen-data": _cmd_gen_data,
        "grad-check": _cmd_grad_check,
    }
    try:
        return handlers[args.command](args)
    except (NumericError, DeterminismError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataError, FormatError, EngineError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
