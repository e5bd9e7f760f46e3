"""Fidelity metrics, bit accuracy and robustness-curve aggregates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imagecore import Image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(a, b):
    a = a.samples if isinstance(a, Image) else np.asarray(a, dtype=np.float64)
    b = b.samples if isinstance(b, Image) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    """Mean squared error on the normalised 0-1 scale."""
    a, b = _pair(a, b)
    return float(np.mean(np.square((a - b) / 255.0)))


def mse255(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.square(a - b)))


def psnr(a, b) -> float:
    m = mse255(a, b)
    if m == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / m)


def _gauss_window():
    """1-D taps; the 11x11 window is their outer product."""
    r = SSIM_WINDOW // 2
    g = np.exp(-(np.arange(-r, r + 1) ** 2) / (2 * SSIM_SIGMA ** 2))
    return g / g.sum()


def _ssim_plane(x, y, win, data_range):
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    r = SSIM_WINDOW // 2

    def f(z):
        z = ndimage.correlate1d(z, win, axis=0, mode="reflect")
        return ndimage.correlate1d(z, win, axis=1, mode="reflect")[r:-r, r:-r]

    mx, my = f(x), f(y)
    sxx = f(x * x) - mx * mx
    syy = f(y * y) - my * my
    sxy = f(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(a, b, data_range: float = 255.0) -> float:
    """Gaussian-window SSIM (11x11, sigma 1.5) averaged over channels."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if min(a.shape[1:]) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    win = _gauss_window()
    return float(np.mean([_ssim_plane(x, y, win, data_range) for x, y in zip(a, b)]))


def bra(expected, decoded) -> float:
    e, d = np.asarray(expected), np.asarray(decoded)
    if e.shape != d.shape:
        raise ValueError("bit sequences differ in length")
    return float(np.mean(e == d))


@dataclass(frozen=True)
class PerfCurve:
    strengths: tuple[float, ...]
    performance: tuple[float, ...]
    quality: tuple[float, ...]

    def __post_init__(self):
        n = len(self.strengths)
        if n < 2:
            raise ValueError("a performance curve needs at least two points")
        if len(self.performance) != n or len(self.quality) != n:
            raise ValueError("curve columns differ in length")
        if any(b <= a for a, b in zip(self.strengths, self.strengths[1:])):
            raise ValueError("strengths must be strictly increasing")


def quality_at(curve: PerfCurve, level: float) -> float:
    """Degradation where performance first falls below ``level``.

    +inf if it never does, -inf if it is already below at the weakest strength.
    """
    p, q = curve.performance, curve.quality
    if p[0] < level:
        return -math.inf
    for i in range(1, len(p)):
        if p[i] < level:
            t = (p[i - 1] - level) / (p[i - 1] - p[i])
            return q[i - 1] + t * (q[i] - q[i - 1])
    return math.inf


def aggregate(curve: PerfCurve) -> dict:
    return {
        "avg_p": float(np.mean(curve.performance)),
        "avg_q": float(np.mean(curve.quality)),
        "q_at_095p": quality_at(curve, 0.95),
        "q_at_07p": quality_at(curve, 0.7),
    }
