"""Watermark extraction: permutation-DCT readout and threshold decoding."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import analyze, slot_layout
from .config import RunConfig
from .imagecore import Image
from .model import SpecMarkModel
from .nn import ConvStack, stack_forward
from .transforms import spectral_project_permute

DecodeConfig = RunConfig


@dataclass(frozen=True)
class DecodeResult:
    bits: np.ndarray
    per_bit_scores: np.ndarray
    redundancy_used: int


def reduce_scores(values: np.ndarray, bit_length: int, how: str = "mean") -> np.ndarray:
    """Collapse the repeated slot readings into one score per bit."""
    k = len(values)
    reps = -(-k // bit_length)
    padded = np.full(reps * bit_length, np.nan)
    padded[:k] = values
    grid = padded.reshape(reps, bit_length)
    if how == "median":
        return np.nanmedian(grid, axis=0)
    return np.nanmean(grid, axis=0)


def threshold_bits(scores, theta: float) -> np.ndarray:
    return (np.asarray(scores) > theta).astype(np.uint8)


def read_scores(img: Image, cfg: RunConfig, dec_stack: ConvStack):
    cfg.check_channels(img.channels)
    _, z = analyze(img, cfg.wavelet_levels, spectral_project_permute)
    mask, used = slot_layout(z.shape[1], cfg)
    z, _ = stack_forward(z, dec_stack)
    values = z[cfg.channel, mask.rows[:used], mask.cols[:used]]
    scores = reduce_scores(values, cfg.bit_length, cfg.score_reducer)
    return scores, used // cfg.bit_length


def _resolve(model, dec_stack, theta, channels, cfg):
    if dec_stack is None:
        dec_stack = model.decoder if model is not None else ConvStack.identity(0, channels, cfg.kernel_size)
    if theta is None:
        theta = model.theta if model is not None else cfg.theta
    return dec_stack, theta


def extract(img: Image, cfg: RunConfig, model: SpecMarkModel | None = None, *,
            dec_stack: ConvStack | None = None, theta: float | None = None) -> DecodeResult:
    """Decode the message; bit i is 1 iff its score strictly exceeds theta.

    Without a model the decoder stack is the identity and theta comes from ``cfg``.
    """
    dec_stack, theta = _resolve(model, dec_stack, theta, img.channels, cfg)
    scores, reps = read_scores(img, cfg, dec_stack)
    return DecodeResult(threshold_bits(scores, theta), scores, reps)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def soft_probabilities(scores, theta: float, tau: float) -> np.ndarray:
    return sigmoid((np.asarray(scores, dtype=np.float64) - theta) / tau)


def soft_extract(img: Image, cfg: RunConfig, model: SpecMarkModel | None = None, *,
                 dec_stack: ConvStack | None = None, theta: float | None = None) -> np.ndarray:
    dec_stack, theta = _resolve(model, dec_stack, theta, img.channels, cfg)
    scores, _ = read_scores(img, cfg, dec_stack)
    return soft_probabilities(scores, theta, cfg.soft_temperature)


def update_threshold(theta: float, grad: float, lr: float) -> float:
    if not (math.isfinite(theta) and math.isfinite(grad)):
        raise FloatingPointError("non-finite threshold or gradient")
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    return theta - lr * grad
