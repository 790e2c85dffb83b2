"""Experiment configuration in a flat ``key = value`` text format.

Grammar, one entry per line::

    # comment (also allowed after a value)
    key = value
    list_key = a, b, c

Blank lines are ignored, keys may appear once, unknown keys are rejected.
Booleans are ``true``/``false``; ``auto`` selects a per-variant default.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


# variant -> (optimizer, learning rate, beta1)
GAN_DEFAULTS = {
    "dcgan": ("adam", 2e-4, 0.5),
    "wgan": ("rmsprop", 5e-5, 0.9),
    "wgan-gp": ("adam", 1e-4, 0.9),
}

WD_ON = "on"
WD_OFF = "off"


@dataclass
class ExperimentConfig:
    dataset_root: str = ""
    resolution: int = 32
    channels: int = 1
    split_ratio: float = 0.8
    skip_undecodable: bool = False

    classifier_presets: list = field(default_factory=lambda: ["small-4conv"])
    wd_variants: list = field(default_factory=lambda: [WD_ON, WD_OFF])
    weight_decay: float = 0.001
    wd_exempt_bias_norm: bool = False
    cnn_lr: float = 0.003
    cnn_epochs_base: int = 30
    cnn_epochs_merged: int = 60
    cnn_batch: int = 32
    augment_hflip: bool = True
    augment_rotate_deg: float = 10.0

    gan_variant: str = "dcgan"
    gan_optimizer: str = "auto"
    gan_lr: str = "auto"
    gan_beta1: str = "auto"
    gan_beta2: float = 0.999
    gan_iterations: int = 4000
    gan_batch: int = 32
    gan_eval_every: int = 200
    gan_snapshot_iters: list = field(default_factory=lambda: [0, 8, 16, 32, 64, 128, 192])
    gan_latent: int = 100
    gan_width: int = 16
    gan_n_critic: int = 5
    gan_gp_lambda: float = 10.0
    gan_clip: float = 0.01
    gan_eval_samples: int = 64
    is_splits: int = 1
    gate_k: float = 5.0
    gate_action: str = "fail"

    gamma_max: int = 8
    seed: int = 0
    transfer_cnn: str = ""
    transfer_gan: str = ""
    allow_empty_transfer: bool = False

    output_dir: str = "runs/ssce"
    clock: str = "wall"
    seconds_per_sample: float = 0.001
    report_formats: list = field(default_factory=lambda: ["csv", "json"])
    plots: bool = False
    resume: bool = True

    def __post_init__(self):
        self.validate()

    # -- derived GAN settings -------------------------------------------------

    def gan_settings(self) -> tuple[str, float, float]:
        opt, lr, beta1 = GAN_DEFAULTS[self.gan_variant]
        if self.gan_optimizer != "auto":
            opt = self.gan_optimizer
        if str(self.gan_lr) != "auto":
            lr = float(self.gan_lr)
        if str(self.gan_beta1) != "auto":
            beta1 = float(self.gan_beta1)
        return opt, lr, beta1

    def structures(self) -> list[tuple[str, bool]]:
        return [(p, wd == WD_ON) for p in self.classifier_presets for wd in self.wd_variants]

    # -- validation -----------------------------------------------------------

    def validate(self) -> None:
        positive_int = (
            "resolution", "cnn_epochs_base", "cnn_epochs_merged", "cnn_batch", "gan_iterations",
            "gan_batch", "gan_eval_every", "gan_latent", "gan_width", "gan_n_critic",
            "gan_eval_samples", "is_splits", "gamma_max",
        )
        for name in positive_int:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("cnn_lr", "gate_k", "gan_clip", "seconds_per_sample"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.weight_decay < 0 or self.gan_gp_lambda < 0:
            raise ConfigError("weight_decay and gan_gp_lambda must be non-negative")
        if self.channels not in (1, 3):
            raise ConfigError(f"channels must be 1 or 3, got {self.channels}")
        if not 0 < self.split_ratio < 1:
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.gan_variant not in GAN_DEFAULTS:
            raise ConfigError(f"gan_variant must be one of {sorted(GAN_DEFAULTS)}, got '{self.gan_variant}'")
        if self.gan_optimizer not in ("auto", "adam", "rmsprop"):
            raise ConfigError(f"gan_optimizer must be auto, adam or rmsprop, got '{self.gan_optimizer}'")
        for name in ("gan_lr", "gan_beta1"):
            v = str(getattr(self, name))
            if v != "auto":
                try:
                    float(v)
                except ValueError:
                    raise ConfigError(f"{name} must be 'auto' or a number, got '{v}'") from None
        if not self.wd_variants or any(v not in (WD_ON, WD_OFF) for v in self.wd_variants):
            raise ConfigError(f"wd_variants must be a non-empty list of on/off, got {self.wd_variants}")
        if not self.classifier_presets:
            raise ConfigError("classifier_presets must not be empty")
        if self.clock not in ("wall", "samples"):
            raise ConfigError(f"clock must be 'wall' or 'samples', got '{self.clock}'")
        if self.gate_action not in ("fail", "warn"):
            raise ConfigError(f"gate_action must be 'fail' or 'warn', got '{self.gate_action}'")
        if any(f not in ("csv", "json") for f in self.report_formats):
            raise ConfigError(f"report_formats entries must be csv or json, got {self.report_formats}")
        if any(int(i) < 0 for i in self.gan_snapshot_iters):
            raise ConfigError("gan_snapshot_iters must be non-negative")

    # -- serialization --------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        """Digest of every setting that can change results (the output location excluded)."""
        text = "\n".join(
            f"{f.name}={_format(getattr(self, f.name))}"
            for f in dataclasses.fields(self)
            if f.name not in ("output_dir", "resume", "plots", "report_formats", "dataset_root", "gate_action")
        )
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(f"expected true or false, got '{raw}'")
            return low == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if default and isinstance(default[0], int):
                return [int(x) for x in items]
            return items
        return raw
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def parse_config(text: str, **overrides) -> ExperimentConfig:
    defaults = ExperimentConfig()
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{line}'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        values[key] = _convert(key, raw, getattr(defaults, key))
    for key, v in overrides.items():
        if v is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown override '{key}'")
        values[key] = v
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from None
    return parse_config(text, **overrides)
