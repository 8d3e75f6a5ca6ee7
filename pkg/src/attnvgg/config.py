"""Experiment configuration: defaults, config-file parsing, CLI resolution.

Config files are flat ``key=value`` text, one pair per line, with ``#``
comments; keys match the field names below. Command-line flags override
file values, and every emitted report embeds the resolved result.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .losses import LOSS_KINDS

ARCH_NAMES = ("vgg16", "vgg_tiny")

# input dimensions used when a config leaves them unset
ARCH_DEFAULT_INPUT = {"vgg16": (128, 128, 3), "vgg_tiny": (32, 32, 1)}


@dataclass
class ExperimentConfig:
    arch: str = "vgg16"
    attention: bool = True
    loss: str = "ce_logcosh"
    alpha: float = 0.5
    beta: float = 0.5
    epochs: int = 250
    batch_size: int = 32
    lr0: float = 2e-6
    decay: float = 1e-6
    dropout: float = 0.5
    threshold: float = 0.5
    seed: int = 0
    input_height: int = 0  # 0 means "use the architecture default"
    input_width: int = 0
    input_channels: int = 0
    data_dir: str = ""
    labels: str = ""
    split: str = ""
    weights_in: str = ""
    weights_out: str = ""
    report_out: str = ""
    figure_out: str = ""
    log_out: str = ""
    out: str = ""

    def validate(self) -> "ExperimentConfig":
        if self.arch not in ARCH_NAMES:
            raise ConfigError(f"unknown arch {self.arch!r}, expected one of {ARCH_NAMES}")
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}, expected one of {LOSS_KINDS}")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ConfigError(f"loss weights alpha={self.alpha}, beta={self.beta} must be >= 0 and not both 0")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if self.decay < 0:
            raise ConfigError(f"decay must be >= 0, got {self.decay}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        return self

    @property
    def input_shape(self) -> tuple[int, int, int]:
        default = ARCH_DEFAULT_INPUT[self.arch]
        return (
            self.input_height or default[0],
            self.input_width or default[1],
            self.input_channels or default[2],
        )

    def resolved_dict(self) -> dict:
        d = asdict(self)
        d["input_height"], d["input_width"], d["input_channels"] = self.input_shape
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def load_config_file(path) -> dict:
    """Parse key=value pairs; unknown keys are rejected by name."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def resolve_config(file_path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then config-file values, then explicit overrides."""
    config = ExperimentConfig()
    if file_path:
        for key, value in load_config_file(file_path).items():
            setattr(config, key, value)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(config, key, value)
    return config.validate()
