"""Run configuration: the JSON document shared by embed and extract.

The config doubles as the extraction key; extract never guesses parameters.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

EMBED_MODES = ("additive", "substitutive")
SCORE_REDUCERS = ("mean", "median")


@dataclass(frozen=True)
class RunConfig:
    radius: float = 100.0
    strength: float = 20.0
    channel: int = 0
    conv_layers: int = 32
    kernel_size: int = 3
    theta: float = 0.001
    bit_length: int = 128
    embed_mode: str = "additive"
    redundancy: int = 1
    wavelet_levels: int = 1
    alpha: float = 0.01
    soft_temperature: float = 1.0
    seed: int = 0
    score_reducer: str = "mean"

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("radius must be > 0")
        if not self.strength > 0:
            raise ConfigError("strength must be > 0")
        if self.channel < 0:
            raise ConfigError("channel must be >= 0")
        if self.conv_layers < 0:
            raise ConfigError("conv_layers must be >= 0")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be a positive odd integer")
        if self.bit_length < 1:
            raise ConfigError("bit_length must be >= 1")
        if self.embed_mode not in EMBED_MODES:
            raise ConfigError(f"embed_mode must be one of {EMBED_MODES}")
        if self.redundancy < 1:
            raise ConfigError("redundancy must be >= 1")
        if self.wavelet_levels < 1:
            raise ConfigError("wavelet_levels must be >= 1")
        if not self.alpha > 0:
            raise ConfigError("alpha must be > 0")
        if not self.soft_temperature > 0:
            raise ConfigError("soft_temperature must be > 0")
        if not math.isfinite(self.theta):
            raise ConfigError("theta must be finite")
        if self.score_reducer not in SCORE_REDUCERS:
            raise ConfigError(f"score_reducer must be one of {SCORE_REDUCERS}")

    def check_channels(self, channels: int) -> None:
        if self.channel >= channels:
            raise ConfigError(f"watermark channel {self.channel} invalid for a {channels}-channel image")

    def replace(self, **kw) -> "RunConfig":
        d = asdict(self)
        d.update(kw)
        return RunConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(doc) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kw = {}
        for k, v in doc.items():
            default = getattr(cls, k)
            if isinstance(default, bool) or v is None:
                raise ConfigError(f"bad value for {k}: {v!r}")
            if isinstance(default, int) and not isinstance(default, bool):
                if isinstance(v, float) and v.is_integer():
                    v = int(v)
                if not isinstance(v, int) or isinstance(v, bool):
                    raise ConfigError(f"{k} must be an integer, got {v!r}")
            elif isinstance(default, float):
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise ConfigError(f"{k} must be a number, got {v!r}")
                v = float(v)
            elif isinstance(default, str) and not isinstance(v, str):
                raise ConfigError(f"{k} must be a string, got {v!r}")
            kw[k] = v
        return cls(**kw)


def load_config(path) -> RunConfig:
    try:
        with open(os.fspath(path)) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_dict(doc)


def save_config(cfg: RunConfig, path) -> None:
    with open(os.fspath(path), "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
