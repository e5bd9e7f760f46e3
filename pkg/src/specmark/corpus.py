"""Deterministic synthetic images and corpus discovery."""
from __future__ import annotations

import os

import numpy as np

from .errors import UnreadableImageError
from .imagecore import Image, load_image

IMAGE_SUFFIXES = (".png",)


def synthetic_image(size: int = 128, rng=None, channels: int = 3) -> Image:
    """Smooth colour field: gradients, low-frequency waves and soft blobs."""
    rng = np.random.default_rng(rng)
    h = w = size
    yy, xx = np.mgrid[0:h, 0:w] / size
    out = np.empty((channels, h, w))
    base = rng.uniform(60, 190, size=channels)
    for c in range(channels):
        gx, gy = rng.uniform(-40, 40, size=2)
        field = base[c] + gx * (xx - 0.5) + gy * (yy - 0.5)
        for _ in range(3):
            fx, fy = rng.uniform(0.5, 4.0, size=2)
            ph = rng.uniform(0, 2 * np.pi)
            field += rng.uniform(5, 20) * np.sin(2 * np.pi * (fx * xx + fy * yy) + ph)
        out[c] = field
    for _ in range(rng.integers(2, 6)):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        rad = rng.uniform(0.05, 0.25)
        amp = rng.uniform(-50, 50, size=channels)
        g = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * rad ** 2))
        out += amp[:, None, None] * g
    return Image(np.clip(np.round(out), 0, 255))


def synthetic_corpus(count: int, size: int = 128, seed: int = 0, channels: int = 3) -> list[Image]:
    return [synthetic_image(size, np.random.default_rng([seed, i]), channels) for i in range(count)]


def discover(corpus_dir) -> list[str]:
    """PNG files of a directory in lexicographic filename order."""
    try:
        entries = os.listdir(corpus_dir)
    except OSError as exc:
        raise UnreadableImageError(f"cannot list corpus {corpus_dir}: {exc}") from exc
    names = sorted(n for n in entries if n.lower().endswith(IMAGE_SUFFIXES))
    return [os.path.join(corpus_dir, n) for n in names]


def load_corpus(corpus_dir) -> tuple[list[str], list[Image]]:
    paths = discover(corpus_dir)
    return paths, [load_image(p) for p in paths]
