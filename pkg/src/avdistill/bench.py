"""Ablation grid: named config variants trained under shared seeds.

The grid mirrors the usual ablation axes: drop the pair-distance term, hold
the labeled fraction at 1 (no self-distillation), swap the attention proxy for
identity, combine the two, switch the schedule shape, and switch triplet
mining. Every variant records its effective settings in the result manifest.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .config import RunConfig, config_manifest
from .errors import ConfigError
from .train import TrainResult, train

DEFAULT_VARIANTS = (
    "full",
    "no-ldis",
    "no-self-dis",
    "no-aa",
    "no-ldis-no-aa",
    "linear",
    "cosine",
    "hard-triplet",
)


def variant_config(base: RunConfig, name: str) -> RunConfig:
    """The named transform of the base config; unknown names are config errors."""
    loss = base.loss
    if name == "full":
        return base
    if name == "no-ldis":
        return dataclasses.replace(base, loss=dataclasses.replace(loss, pair_weight=0.0))
    if name == "no-self-dis":
        # Labeled fraction pinned at 1: every batch is fully label-supervised.
        return dataclasses.replace(base, schedule_start=1.0, schedule_end=1.0)
    if name == "no-aa":
        return dataclasses.replace(base, loss=dataclasses.replace(loss, proxy="identity"))
    if name == "no-ldis-no-aa":
        return dataclasses.replace(
            base, loss=dataclasses.replace(loss, pair_weight=0.0, proxy="identity")
        )
    if name == "linear":
        return dataclasses.replace(base, schedule_kind="linear")
    if name == "cosine":
        return dataclasses.replace(base, schedule_kind="cosine")
    if name == "hard-triplet":
        return dataclasses.replace(base, loss=dataclasses.replace(loss, strategy="hard"))
    raise ConfigError(f"unknown bench variant {name!r}, expected one of {DEFAULT_VARIANTS}")


def bench(
    base: RunConfig,
    variants: tuple[str, ...] = DEFAULT_VARIANTS,
    out_dir: str | Path | None = None,
) -> list[dict]:
    """Train every variant and tabulate final retrieval quality."""
    rows = []
    base_out = Path(out_dir) if out_dir else None
    for name in variants:
        cfg = variant_config(base, name)
        if base_out is not None:
            cfg = dataclasses.replace(cfg, output_dir=str(base_out / name))
        result: TrainResult = train(cfg)
        report = result.final_report
        rows.append(
            {
                "variant": name,
                "map_a2v": report.map_a2v if report else None,
                "map_v2a": report.map_v2a if report else None,
                "map_avg": report.map_avg if report else None,
                "manifest": config_manifest(cfg),
            }
        )
    if base_out is not None:
        base_out.mkdir(parents=True, exist_ok=True)
        with open(base_out / "bench.json", "w") as f:
            json.dump(rows, f, indent=2)
    return rows


def format_table(rows: list[dict]) -> str:
    """Aligned text table of the grid results."""
    header = f"{'variant':<16} {'map_a2v':>9} {'map_v2a':>9} {'map_avg':>9}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['variant']:<16} "
            f"{row['map_a2v']:>9.4f} {row['map_v2a']:>9.4f} {row['map_avg']:>9.4f}"
        )
    return "\n".join(lines)
