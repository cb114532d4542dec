"""Run configuration: defaults, flat `key = value` config files, CLI overrides.

Config files hold one dotted key per line (`loss.margin = 1.2`); blank lines
and `#` comments are ignored. Command-line flags override file values, which
override the built-in defaults. The defaults mirror the reference training
setup: three 1024-unit hidden layers, dropout 0.1, Adam at 1e-4, batch 400,
1000 epochs, margin 1.2, step schedule from 1.0 down to 0.2 in five plateaus.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .data import SyntheticSpec
from .errors import ConfigError
from .losses import LossConfig


@dataclass(frozen=True)
class RunConfig:
    data_path: str | None = None
    data_format: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    hidden_dims: tuple[int, ...] = (1024, 1024, 1024)
    dropout_rate: float = 0.1
    loss: LossConfig = field(default_factory=LossConfig)
    temperature: float = 1.0
    schedule_kind: str = "step"
    schedule_start: float = 1.0
    schedule_end: float = 0.2
    schedule_steps: int = 5
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    batch_size: int = 400
    epochs: int = 1000
    seed: int = 0
    eval_every: int = 10
    train_fraction: float = 0.8
    eval_ks: tuple[int, ...] = (1, 5, 10)
    output_dir: str | None = None


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in text.split(",") if part.strip())


# key -> (target dataclass field path, parser)
_KEYS: dict[str, tuple[str, object]] = {
    "data.path": ("data_path", str),
    "data.format": ("data_format", str),
    "synthetic.classes": ("synthetic.n_classes", int),
    "synthetic.pairs_per_class": ("synthetic.pairs_per_class", int),
    "synthetic.audio_dim": ("synthetic.audio_dim", int),
    "synthetic.visual_dim": ("synthetic.visual_dim", int),
    "synthetic.noise": ("synthetic.noise_scale", float),
    "synthetic.correlation": ("synthetic.correlation", float),
    "synthetic.label_noise": ("synthetic.label_noise", float),
    "synthetic.seed": ("synthetic.seed", int),
    "model.hidden": ("hidden_dims", _parse_int_list),
    "model.dropout": ("dropout_rate", float),
    "loss.margin": ("loss.margin", float),
    "loss.strategy": ("loss.strategy", str),
    "loss.anchor": ("loss.anchor_mode", str),
    "loss.proxy": ("loss.proxy", str),
    "loss.proxy_temperature": ("loss.proxy_temperature", float),
    "loss.label_weight": ("loss.label_weight", float),
    "loss.triplet_weight": ("loss.triplet_weight", float),
    "loss.pair_weight": ("loss.pair_weight", float),
    "align.temperature": ("temperature", float),
    "schedule.kind": ("schedule_kind", str),
    "schedule.start": ("schedule_start", float),
    "schedule.end": ("schedule_end", float),
    "schedule.steps": ("schedule_steps", int),
    "train.optimizer": ("optimizer", str),
    "train.lr": ("learning_rate", float),
    "train.batch": ("batch_size", int),
    "train.epochs": ("epochs", int),
    "train.seed": ("seed", int),
    "train.eval_every": ("eval_every", int),
    "train.fraction": ("train_fraction", float),
    "train.out": ("output_dir", str),
    "eval.ks": ("eval_ks", _parse_int_list),
}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read raw key/value pairs; syntax and unknown-key errors are config errors."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = value
    return values


def build_run_config(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, object] | None = None,
) -> RunConfig:
    """Layer defaults < config file < overrides into a validated RunConfig.

    `overrides` maps the same dotted keys to already-typed values (the CLI
    passes parsed flag values through here).
    """
    resolved: dict[str, object] = {}
    for key, raw in (file_values or {}).items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        _, parser = _KEYS[key]
        try:
            resolved[key] = parser(raw)  # type: ignore[operator]
        except (ValueError, TypeError) as e:
            raise ConfigError(f"bad value for {key!r}: {e}") from None
    for key, value in (overrides or {}).items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        resolved[key] = value

    top: dict[str, object] = {}
    nested: dict[str, dict[str, object]] = {"synthetic": {}, "loss": {}}
    for key, value in resolved.items():
        target, _ = _KEYS[key]
        if "." in target:
            group, attr = target.split(".", 1)
            nested[group][attr] = value
        else:
            top[target] = value
    base = RunConfig()
    try:
        synthetic = dataclasses.replace(base.synthetic, **nested["synthetic"])
        loss = dataclasses.replace(base.loss, **nested["loss"])
        return dataclasses.replace(base, synthetic=synthetic, loss=loss, **top)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {e}") from None


def config_manifest(config: RunConfig) -> dict[str, object]:
    """Flat summary of the settings that define a run, for logs and bench tables."""
    return {
        "data_path": config.data_path,
        "hidden_dims": list(config.hidden_dims),
        "dropout_rate": config.dropout_rate,
        "margin": config.loss.margin,
        "strategy": config.loss.strategy,
        "anchor_mode": config.loss.anchor_mode,
        "proxy": config.loss.proxy,
        "proxy_temperature": config.loss.proxy_temperature,
        "label_weight": config.loss.label_weight,
        "triplet_weight": config.loss.triplet_weight,
        "pair_weight": config.loss.pair_weight,
        "temperature": config.temperature,
        "schedule_kind": config.schedule_kind,
        "schedule_start": config.schedule_start,
        "schedule_end": config.schedule_end,
        "schedule_steps": config.schedule_steps,
        "optimizer": config.optimizer,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "epochs": config.epochs,
        "seed": config.seed,
        "eval_every": config.eval_every,
        "train_fraction": config.train_fraction,
    }
