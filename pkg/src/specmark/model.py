"""Learned state of the codec and its JSON file format."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ImageIOError
from .nn import DEFAULT_ALPHA, DEFAULT_KERNEL, ConvLayer, ConvStack

FORMAT = "specmark_model_v1"
_ROLES = ("encoder", "harmonize", "decoder")


@dataclass
class SpecMarkModel:
    encoder: ConvStack
    harmonize: ConvStack  # always depth 1
    decoder: ConvStack
    theta: float = 0.001

    @classmethod
    def identity(cls, channels: int, depth: int = 0, kernel_size: int = DEFAULT_KERNEL,
                 theta: float = 0.001) -> "SpecMarkModel":
        """Model whose stacks are exact identities; the deterministic test profile."""
        return cls(ConvStack.identity(depth, channels, kernel_size),
                   ConvStack.identity(1, channels, kernel_size),
                   ConvStack.identity(depth, channels, kernel_size),
                   theta)

    @classmethod
    def initialize(cls, channels: int, depth: int, kernel_size: int = DEFAULT_KERNEL,
                   alpha: float = DEFAULT_ALPHA, theta: float = 0.001, seed=None,
                   noise: float = 1e-3) -> "SpecMarkModel":
        rng = np.random.default_rng(seed)
        return cls(ConvStack.near_identity(depth, channels, kernel_size, alpha, noise, rng),
                   ConvStack.near_identity(1, channels, kernel_size, alpha, noise, rng),
                   ConvStack.near_identity(depth, channels, kernel_size, alpha, noise, rng),
                   theta)

    @property
    def channels(self) -> int:
        return self.harmonize.layers[0].channels

    def copy(self) -> "SpecMarkModel":
        return SpecMarkModel(self.encoder.copy(), self.harmonize.copy(), self.decoder.copy(), self.theta)

    def to_dict(self) -> dict:
        layers = []
        for role, stack in zip(_ROLES, (self.encoder, self.harmonize, self.decoder)):
            for layer in stack.layers:
                layers.append({
                    "role": role,
                    "alpha": stack.alpha,
                    "k_size": layer.kernel_size,
                    "channels": layer.channels,
                    "weights": layer.weight.tolist(),
                })
        return {
            "format": FORMAT,
            "alpha": self.encoder.alpha if self.encoder.layers else self.harmonize.alpha,
            "channels": self.channels,
            "depth": {r: s.depth for r, s in zip(_ROLES, (self.encoder, self.harmonize, self.decoder))},
            "layers": layers,
            "theta": self.theta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SpecMarkModel":
        if doc.get("format") != FORMAT:
            raise ConfigError(f"unsupported model format {doc.get('format')!r}")
        default_alpha = float(doc.get("alpha", DEFAULT_ALPHA))
        stacks = {r: ConvStack([], default_alpha) for r in _ROLES}
        alphas = {r: None for r in _ROLES}
        for entry in doc["layers"]:
            role = entry.get("role")
            if role not in stacks:
                raise ConfigError(f"unknown layer role {role!r}")
            w = np.array(entry["weights"], dtype=np.float64)
            if w.ndim != 4 or w.shape[2] != int(entry["k_size"]):
                raise ConfigError(f"layer weights shape {w.shape} disagree with k_size")
            stacks[role].layers.append(ConvLayer(w))
            alphas[role] = float(entry.get("alpha", default_alpha))
        for r in _ROLES:
            if alphas[r] is not None:
                stacks[r].alpha = alphas[r]
        if len(stacks["harmonize"].layers) != 1:
            raise ConfigError("model must contain exactly one harmonize layer")
        return cls(stacks["encoder"], stacks["harmonize"], stacks["decoder"], float(doc["theta"]))


def save_model(model: SpecMarkModel, path) -> None:
    try:
        with open(os.fspath(path), "w") as fh:
            json.dump(model.to_dict(), fh)
    except OSError as exc:
        raise ImageIOError(f"cannot write model {path}: {exc}") from exc


def load_model(path) -> SpecMarkModel:
    try:
        with open(os.fspath(path)) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ImageIOError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file {path} is not valid JSON: {exc}") from exc
    try:
        return SpecMarkModel.from_dict(doc)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed model document {path}: {exc}") from exc
