"""Distortion attacks parameterised by a strength ``x`` in [0, 1]."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import ConfigError
from .imagecore import Image, to_uint8

STRENGTH_KINDS = ("rotation", "crop", "brightness", "contrast", "blur", "noise", "jpeg",
                  "geo", "deg", "combine")
FIXED_KINDS = ("none", "flip_h", "flip_v", "rescale", "saturation")
KINDS = STRENGTH_KINDS + FIXED_KINDS

# (start, end) of each linear strength range
RANGES = {
    "rotation": (9.0, 45.0),     # degrees, clockwise
    "crop": (0.10, 0.50),        # removed area fraction
    "brightness": (0.20, 1.00),  # relative increase
    "contrast": (0.20, 1.00),
    "blur": (4.0, 20.0),         # kernel size, px
    "noise": (0.02, 0.10),       # std on the 0-1 scale
    "jpeg": (90.0, 10.0),        # quality
}
RESCALE_FACTOR = 0.75
SATURATION_FACTOR = 1.4


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown attack kind {self.kind!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise ConfigError(f"attack strength must lie in [0, 1], got {self.strength}")


def _lerp(kind, x):
    a, b = RANGES[kind]
    return a + x * (b - a)


def strength_to_params(kind: str, x: float) -> dict:
    if kind not in KINDS:
        raise ConfigError(f"unknown attack kind {kind!r}")
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"attack strength must lie in [0, 1], got {x}")
    if kind == "rotation":
        return {"angle": _lerp(kind, x)}
    if kind == "crop":
        return {"ratio": _lerp(kind, x)}
    if kind in ("brightness", "contrast"):
        return {"factor": 1.0 + _lerp(kind, x)}
    if kind == "blur":
        return {"kernel_size": _lerp(kind, x)}
    if kind == "noise":
        return {"sigma": _lerp(kind, x)}
    if kind == "jpeg":
        return {"quality": 90.0 - x * (90.0 - 10.0)}
    if kind == "geo":
        return {"rotation": strength_to_params("rotation", x), "crop": strength_to_params("crop", x)}
    if kind == "deg":
        return {"blur": strength_to_params("blur", x), "noise": strength_to_params("noise", x),
                "jpeg": strength_to_params("jpeg", x)}
    if kind == "combine":
        return {"geo": strength_to_params("geo", x), "deg": strength_to_params("deg", x)}
    if kind == "rescale":
        return {"scale": RESCALE_FACTOR}
    if kind == "saturation":
        return {"factor": SATURATION_FACTOR}
    return {}


# --------------------------------------------------------------------------
# primitive transforms on (C, H, W) float arrays

def _per_plane(fn, x):
    return np.stack([fn(p) for p in x])


def resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Pixel-centre aligned bilinear resampling with edge clamping."""
    _, h, w = x.shape
    ri = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    ci = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    grid = np.meshgrid(np.clip(ri, 0, h - 1), np.clip(ci, 0, w - 1), indexing="ij")
    return _per_plane(lambda p: ndimage.map_coordinates(p, grid, order=1, mode="nearest"), x)


def rotate(x: np.ndarray, angle: float) -> np.ndarray:
    """Clockwise rotation about the centre, same canvas, reflected fill."""
    if angle == 0:
        return x.copy()
    return _per_plane(lambda p: ndimage.rotate(p, -angle, reshape=False, order=1, mode="reflect"), x)


def center_crop_resize(x: np.ndarray, ratio: float) -> np.ndarray:
    _, h, w = x.shape
    keep = math.sqrt(1.0 - ratio)
    ch, cw = max(1, round(h * keep)), max(1, round(w * keep))
    if ch < 2 or cw < 2:
        raise ValueError(f"crop leaves a degenerate {ch}x{cw} region")
    top, left = (h - ch) // 2, (w - cw) // 2
    return resize_bilinear(x[:, top:top + ch, left:left + cw], h, w)


def brightness(x: np.ndarray, factor: float) -> np.ndarray:
    return x * factor


def contrast(x: np.ndarray, factor: float) -> np.ndarray:
    mean = x.mean()
    return (x - mean) * factor + mean


def gaussian_blur(x: np.ndarray, kernel_size: float) -> np.ndarray:
    size = max(1, round(kernel_size))
    sigma = size / 4.0
    radius = size // 2
    return _per_plane(lambda p: ndimage.gaussian_filter(p, sigma, mode="reflect", radius=radius), x)


def gaussian_noise(x: np.ndarray, sigma: float, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return x + rng.normal(0.0, sigma * 255.0, size=x.shape)


def jpeg(x: np.ndarray, quality: float) -> np.ndarray:
    arr = to_uint8(Image(np.clip(x, 0, 255)))
    buf = io.BytesIO()
    # 4:4:4 keeps quality 100 near-lossless; baseline JPEG allows it
    PILImage.fromarray(arr).save(buf, format="JPEG", quality=int(round(quality)), subsampling=0)
    buf.seek(0)
    return Image.from_hwc(np.asarray(PILImage.open(buf))).samples.copy()


def saturation(x: np.ndarray, factor: float) -> np.ndarray:
    if x.shape[0] != 3:
        return x.copy()
    gray = 0.299 * x[0] + 0.587 * x[1] + 0.114 * x[2]
    return gray + factor * (x - gray)


def rescale(x: np.ndarray, scale: float) -> np.ndarray:
    _, h, w = x.shape
    small = resize_bilinear(x, max(1, round(h * scale)), max(1, round(w * scale)))
    return resize_bilinear(small, h, w)


def _sub_seed(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng([seed, salt])


def _apply(x, kind, params, seed):
    if kind == "none":
        return x.copy()
    if kind == "rotation":
        return rotate(x, params["angle"])
    if kind == "crop":
        return center_crop_resize(x, params["ratio"])
    if kind == "brightness":
        return brightness(x, params["factor"])
    if kind == "contrast":
        return contrast(x, params["factor"])
    if kind == "blur":
        return gaussian_blur(x, params["kernel_size"])
    if kind == "noise":
        return gaussian_noise(x, params["sigma"], _sub_seed(seed, 1))
    if kind == "jpeg":
        return jpeg(x, params["quality"])
    if kind == "geo":
        x = np.clip(rotate(x, params["rotation"]["angle"]), 0, 255)
        return center_crop_resize(x, params["crop"]["ratio"])
    if kind == "deg":
        x = np.clip(gaussian_blur(x, params["blur"]["kernel_size"]), 0, 255)
        x = np.clip(gaussian_noise(x, params["noise"]["sigma"], _sub_seed(seed, 1)), 0, 255)
        return jpeg(x, params["jpeg"]["quality"])
    if kind == "combine":
        x = np.clip(_apply(x, "geo", params["geo"], seed), 0, 255)
        return _apply(x, "deg", params["deg"], seed)
    if kind == "flip_h":
        return x[:, :, ::-1].copy()
    if kind == "flip_v":
        return x[:, ::-1, :].copy()
    if kind == "rescale":
        return rescale(x, params["scale"])
    if kind == "saturation":
        return saturation(x, params["factor"])
    raise ConfigError(f"unknown attack kind {kind!r}")


def apply_attack(img: Image, spec: AttackSpec) -> Image:
    params = strength_to_params(spec.kind, spec.strength)
    out = _apply(img.samples, spec.kind, params, spec.seed)
    return Image(np.clip(out, 0.0, 255.0))
