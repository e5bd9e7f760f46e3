"""Planar image container, PNG I/O and range handling.

Samples are float64 on the 0-255 scale, stored channel-major as a
``(channels, height, width)`` array.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import ImageIOError, UnreadableImageError, UnsupportedImageError


@dataclass(frozen=True, eq=False)
class Image:
    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] not in (1, 3):
            raise ValueError(f"expected (C,H,W) with C in {{1,3}}, got {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError("image must be at least 1x1")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.samples.shape

    def plane(self, c: int) -> np.ndarray:
        return self.samples[c]

    def planes(self) -> list[np.ndarray]:
        return [self.samples[c] for c in range(self.channels)]

    @classmethod
    def from_planes(cls, planes) -> "Image":
        return cls(np.stack([np.asarray(p, dtype=np.float64) for p in planes]))

    @classmethod
    def from_hwc(cls, arr) -> "Image":
        """Build from an interleaved ``(H, W)`` or ``(H, W, C)`` array."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            return cls(arr[None])
        return cls(np.moveaxis(arr, -1, 0))

    def to_hwc(self) -> np.ndarray:
        if self.channels == 1:
            return self.samples[0].copy()
        return np.moveaxis(self.samples, 0, -1).copy()

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.samples, other.samples)

    __hash__ = None


def clamp(img: Image) -> Image:
    return Image(np.clip(img.samples, 0.0, 255.0))


def round_half_away(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_uint8(img: Image) -> np.ndarray:
    """Rounded, range-checked ``(H, W)`` or ``(H, W, C)`` byte array."""
    q = round_half_away(img.samples)
    if q.min() < 0 or q.max() > 255:
        raise ValueError("samples fall outside [0, 255] after rounding; clamp first")
    out = q.astype(np.uint8)
    if img.channels == 1:
        return out[0]
    return np.ascontiguousarray(np.moveaxis(out, 0, -1))


def load_image(path) -> Image:
    path = os.fspath(path)
    try:
        pil = PILImage.open(path)
        pil.load()
    except FileNotFoundError as exc:
        raise UnreadableImageError(f"no such file: {path}") from exc
    except (UnidentifiedImageError, OSError) as exc:
        raise UnreadableImageError(f"cannot decode {path}: {exc}") from exc

    mode = pil.mode
    if mode == "P":
        if "transparency" in pil.info:
            raise UnsupportedImageError(f"{path}: palette image with transparency")
        pil = pil.convert("RGB")
    elif mode == "1":
        pil = pil.convert("L")
    elif mode in ("RGBA", "LA", "PA", "La", "RGBa"):
        raise UnsupportedImageError(f"{path}: alpha channel not supported")
    elif mode not in ("L", "RGB"):
        raise UnsupportedImageError(f"{path}: unsupported mode {mode!r} (need 8-bit L or RGB)")
    return Image.from_hwc(np.asarray(pil))


def save_image(img: Image, path) -> None:
    arr = to_uint8(img)
    try:
        PILImage.fromarray(arr).save(os.fspath(path), format="PNG")
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc
