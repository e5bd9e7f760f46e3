"""Encoder: radial mask, message expansion and spectral-domain embedding."""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import CapacityError, ConfigError
from .imagecore import Image
from .model import SpecMarkModel
from .nn import ConvStack, stack_forward
from .transforms import (
    SubBands,
    inverse_spectral,
    spectral_project_mirror,
    spectral_project_permute,
    wavelet_decompose,
    wavelet_reconstruct,
)

log = logging.getLogger(__name__)

EmbedConfig = RunConfig


@dataclass(frozen=True)
class RadialMask:
    h: int
    w: int
    r: float
    rows: np.ndarray
    cols: np.ndarray

    @property
    def coords(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def __len__(self) -> int:
        return len(self.rows)

    def as_array(self) -> np.ndarray:
        m = np.zeros((self.h, self.w), dtype=bool)
        m[self.rows, self.cols] = True
        return m


def make_mask(h: int, w: int, r: float) -> RadialMask:
    """Coefficients within distance ``r`` of ``(h/2, w/2)``, row-major."""
    if h < 1 or w < 1 or r < 0:
        raise ValueError("need h, w >= 1 and r >= 0")
    x = np.arange(h)[:, None] - h / 2
    y = np.arange(w)[None, :] - w / 2
    inside = np.sqrt(x * x + y * y) <= r
    rows, cols = np.nonzero(inside)
    return RadialMask(h, w, float(r), rows, cols)


@functools.lru_cache(maxsize=64)
def effective_radius(plane_dim: int, r: float) -> float:
    if plane_dim >= 2 * (r + 1):
        return float(r)
    fit = max(plane_dim / 2 - 1, 0.0)
    log.warning("radius %g does not fit a %dx%d spectral plane; using %g", r, plane_dim, plane_dim, fit)
    return fit


def as_bits(m) -> np.ndarray:
    bits = np.asarray(m)
    if bits.ndim != 1 or bits.size < 1:
        raise ValueError("message must be a non-empty 1D bit sequence")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("message bits must be 0 or 1")
    return bits.astype(np.uint8)


def parse_message(text: str, bit_length: int | None = None) -> np.ndarray:
    """Parse ``"0101..."`` or ``"0x1f..."`` (hex needs ``bit_length``)."""
    text = text.strip()
    if text.lower().startswith("0x"):
        if bit_length is None:
            raise ConfigError("hex messages need an explicit bit length")
        try:
            value = int(text[2:], 16)
        except ValueError as exc:
            raise ConfigError(f"bad hex message {text!r}") from exc
        if value >> bit_length:
            raise ConfigError(f"hex message does not fit in {bit_length} bits")
        return np.array([(value >> (bit_length - 1 - i)) & 1 for i in range(bit_length)], dtype=np.uint8)
    if not text or set(text) - {"0", "1"}:
        raise ConfigError(f"message must be a bit string or 0x-prefixed hex, got {text!r}")
    bits = np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")
    if bit_length is not None and len(bits) != bit_length:
        raise ConfigError(f"message has {len(bits)} bits, config expects {bit_length}")
    return bits.astype(np.uint8)


def format_bits(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def random_message(length: int, rng) -> np.ndarray:
    return np.random.default_rng(rng).integers(0, 2, size=length).astype(np.uint8)


def expand_message(m, capacity: int, redundancy: int = 1) -> np.ndarray:
    """Cyclic repetition: bit i of copy j lands in slot ``j*l + i``."""
    bits = as_bits(m)
    l = len(bits)
    if redundancy < 1:
        raise ValueError("redundancy must be >= 1")
    if capacity < l:
        raise CapacityError(f"mask holds {capacity} coefficients, message needs {l}")
    used = min(capacity, redundancy * l)
    return np.resize(bits, used)


def capacity_bound(H: int, W: int, channels: int, level: int, f_spectral: float,
                   bits_per_coeff: int = 1) -> int:
    """Upper bound on embeddable bits after an L-level wavelet split."""
    if not 0.2 <= f_spectral <= 0.5:
        raise ConfigError(f"f_spectral must lie in [0.2, 0.5], got {f_spectral}")
    if level < 1 or bits_per_coeff < 1 or min(H, W, channels) < 1:
        raise ConfigError("H, W, channels, level and bits_per_coeff must be positive")
    # exact rational arithmetic before the floor
    from fractions import Fraction
    return math.floor(Fraction(H * W * channels, 4 ** level) * Fraction(str(f_spectral)) * bits_per_coeff)


# --------------------------------------------------------------------------
# shared analysis / synthesis used by embed, extract and training

def analyze(img: Image, levels: int = 1, project=spectral_project_mirror):
    """Wavelet-split every channel and project its deepest hh band.

    Returns ``(pyramids, spectra)`` with ``spectra`` shaped ``(C, n, n)``.
    """
    pyramids, spectra = [], []
    for plane in img.planes():
        pyr = wavelet_decompose(plane, levels)
        hh = pyr[-1].hh
        if hh.shape[0] != hh.shape[1]:
            raise ConfigError(f"spectral plane must be square; image gives {hh.shape[0]}x{hh.shape[1]}")
        pyramids.append(pyr)
        spectra.append(project(hh))
    return pyramids, np.stack(spectra)


def synthesize(pyramids, spectra) -> np.ndarray:
    planes = []
    for pyr, z in zip(pyramids, spectra):
        pyr = list(pyr)
        pyr[-1] = pyr[-1].replace(hh=inverse_spectral(z))
        planes.append(wavelet_reconstruct(pyr))
    return np.stack(planes)


def slot_layout(n: int, cfg: RunConfig):
    """Mask for an ``n x n`` plane and the number of slots used."""
    mask = make_mask(n, n, effective_radius(n, cfg.radius))
    if len(mask) < cfg.bit_length:
        raise CapacityError(f"radial mask holds {len(mask)} coefficients, message needs {cfg.bit_length}")
    used = min(len(mask), cfg.redundancy * cfg.bit_length)
    return mask, used


def plane_size(height: int, width: int, levels: int) -> tuple[int, int]:
    for _ in range(levels):
        height, width = (height + 1) // 2, (width + 1) // 2
    return height, width


def mask_capacity(img_or_shape, cfg: RunConfig) -> int:
    if isinstance(img_or_shape, Image):
        h, w = img_or_shape.height, img_or_shape.width
    else:
        h, w = img_or_shape
    n, _ = plane_size(h, w, cfg.wavelet_levels)
    return len(make_mask(n, n, effective_radius(n, cfg.radius)))


def write_bits(z: np.ndarray, mask: RadialMask, expanded: np.ndarray, channel: int, strength: float,
               mode: str) -> np.ndarray:
    out = z.copy()
    k = len(expanded)
    rows, cols = mask.rows[:k], mask.cols[:k]
    payload = expanded.astype(np.float64) * strength
    if mode == "substitutive":
        out[channel, rows, cols] = payload
    elif mode == "additive":
        out[channel, rows, cols] += payload
    else:
        raise ConfigError(f"unknown embed mode {mode!r}")
    return out


def embed(img: Image, message, cfg: RunConfig, model: SpecMarkModel | None = None, *,
          clamp: bool = True, refine: int = 30, enc_stack: ConvStack | None = None,
          harmonize: ConvStack | None = None) -> Image:
    """Watermark ``img`` with ``message``; returns a new image.

    Passing ``model=None`` uses exact identity stacks. When clamping bites,
    up to ``refine`` rounds of alternating projection restore the written
    slot coefficients while keeping samples inside [0, 255].
    """
    cfg.check_channels(img.channels)
    bits = as_bits(message)
    if len(bits) != cfg.bit_length:
        raise ConfigError(f"message has {len(bits)} bits, config expects {cfg.bit_length}")
    if model is None:
        model = SpecMarkModel.identity(img.channels, 0, cfg.kernel_size)
    enc_stack = model.encoder if enc_stack is None else enc_stack
    harmonize = model.harmonize if harmonize is None else harmonize

    pyramids, z = analyze(img, cfg.wavelet_levels, spectral_project_mirror)
    mask, used = slot_layout(z.shape[1], cfg)
    expanded = expand_message(bits, len(mask), cfg.redundancy)
    assert len(expanded) == used

    z, _ = stack_forward(z, enc_stack)
    z = write_bits(z, mask, expanded, cfg.channel, cfg.strength, cfg.embed_mode)
    z, _ = stack_forward(z, harmonize)
    out = synthesize(pyramids, z)
    if clamp:
        out = _clamp_refined(out, z, mask, used, cfg, refine)
    return Image(out)


def _clamp_refined(samples, z, mask, used, cfg, rounds, tol=1e-9):
    rows, cols = mask.rows[:used], mask.cols[:used]
    target = z[cfg.channel, rows, cols]
    cur = np.clip(samples, 0.0, 255.0)
    if np.array_equal(cur, samples):
        return cur
    # only the watermark channel carries bits; the others just need the clip
    plane = cur[cfg.channel]
    for _ in range(rounds):
        pyr = wavelet_decompose(plane, cfg.wavelet_levels)
        zc = spectral_project_permute(pyr[-1].hh)
        if np.max(np.abs(zc[rows, cols] - target)) <= tol:
            break
        zc[rows, cols] = target
        pyr[-1] = pyr[-1].replace(hh=inverse_spectral(zc))
        plane = np.clip(wavelet_reconstruct(pyr), 0.0, 255.0)
    cur[cfg.channel] = plane
    return cur
