"""Orthonormal Haar wavelet and DCT-II spectral projections.

Two FFT constructions of the same orthonormal 2D DCT-II are provided:
``spectral_project_mirror`` (FFT of the 2N x 2N symmetric extension) and
``spectral_project_permute`` (even/odd reordering, one length-N FFT per
axis). Both equal ``scipy.fft.dctn(x, norm="ortho")``; the inverse is the
matching orthonormal DCT-III, which is also the adjoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class SubBands:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    # pre-padding plane shape; differs from 2x band shape only for odd inputs
    shape: tuple[int, int] | None = None

    def __post_init__(self):
        shapes = {np.shape(b) for b in (self.ll, self.lh, self.hl, self.hh)}
        if len(shapes) != 1:
            raise ValueError(f"sub-band shapes differ: {sorted(shapes)}")

    @property
    def band_shape(self) -> tuple[int, int]:
        return np.shape(self.ll)

    def replace(self, **kw) -> "SubBands":
        d = dict(ll=self.ll, lh=self.lh, hl=self.hl, hh=self.hh, shape=self.shape)
        d.update(kw)
        return SubBands(**d)

    def energy(self) -> float:
        return float(sum(np.sum(np.square(b)) for b in (self.ll, self.lh, self.hl, self.hh)))


@dataclass(frozen=True)
class BandSegmentation:
    kappa: int
    intervals: tuple[tuple[int, int], ...]


# --------------------------------------------------------------------------
# wavelet projection

def wavelet_project(plane) -> SubBands:
    """Single-level orthonormal 2D Haar analysis.

    ``lh`` holds vertical differences (horizontal edges), ``hl`` horizontal
    differences and ``hh`` the diagonal detail. Odd sizes are padded by one
    reflected row/column; the original shape is kept for the inverse.
    """
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("wavelet_project expects a 2D plane")
    h, w = x.shape
    if h < 2 or w < 2:
        raise ValueError(f"plane {h}x{w} is smaller than 2x2")
    if h % 2 or w % 2:
        x = np.pad(x, ((0, h % 2), (0, w % 2)), mode="symmetric")
    a = x[0::2, 0::2]
    b = x[0::2, 1::2]
    c = x[1::2, 0::2]
    d = x[1::2, 1::2]
    return SubBands(
        ll=(a + b + c + d) * 0.5,
        lh=(a + b - c - d) * 0.5,
        hl=(a - b + c - d) * 0.5,
        hh=(a - b - c + d) * 0.5,
        shape=(h, w),
    )


def inverse_wavelet(bands: SubBands) -> np.ndarray:
    ll, lh, hl, hh = (np.asarray(b, dtype=np.float64) for b in (bands.ll, bands.lh, bands.hl, bands.hh))
    if not (ll.shape == lh.shape == hl.shape == hh.shape) or ll.ndim != 2:
        raise ValueError("mismatched sub-band dimensions")
    bh, bw = ll.shape
    out = np.empty((2 * bh, 2 * bw))
    out[0::2, 0::2] = (ll + lh + hl + hh) * 0.5
    out[0::2, 1::2] = (ll + lh - hl - hh) * 0.5
    out[1::2, 0::2] = (ll - lh + hl - hh) * 0.5
    out[1::2, 1::2] = (ll - lh - hl + hh) * 0.5
    if bands.shape is not None and tuple(bands.shape) != out.shape:
        h, w = bands.shape
        if not (2 * bh - 1 <= h <= 2 * bh and 2 * bw - 1 <= w <= 2 * bw):
            raise ValueError(f"recorded shape {bands.shape} incompatible with bands {ll.shape}")
        out = out[:h, :w]
    return out


def wavelet_decompose(plane, levels: int) -> list[SubBands]:
    """Multi-level Haar pyramid; level j+1 decomposes the ll band of level j."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    out = []
    cur = np.asarray(plane, dtype=np.float64)
    for _ in range(levels):
        sb = wavelet_project(cur)
        out.append(sb)
        cur = sb.ll
    return out


def wavelet_reconstruct(pyramid: list[SubBands]) -> np.ndarray:
    cur = None
    for sb in reversed(pyramid):
        if cur is not None:
            sb = sb.replace(ll=cur)
        cur = inverse_wavelet(sb)
    return cur


def decomposition_level(pixel_count: int) -> int:
    if pixel_count < 1:
        raise ValueError("pixel_count must be positive")
    return max(1, math.floor(math.sqrt(math.log1p(pixel_count))))


def segment_bands(plane_dim: int, kappa: int) -> BandSegmentation:
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if kappa > plane_dim:
        raise ValueError(f"kappa={kappa} exceeds plane dimension {plane_dim}")
    edges = [(j * plane_dim) // kappa for j in range(kappa + 1)]
    return BandSegmentation(kappa, tuple(zip(edges[:-1], edges[1:])))


# --------------------------------------------------------------------------
# spectral projection

def _check_square(x: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape[0] < 1:
        raise ValueError(f"spectral projection needs a square plane, got shape {x.shape}")


def _ortho_scale(n: int) -> np.ndarray:
    s = np.full(n, math.sqrt(2.0 / n))
    s[0] = math.sqrt(1.0 / n)
    return s


def spectral_project_mirror(plane) -> np.ndarray:
    """DCT-II from the 2D FFT of the four-quadrant mirror extension.

    The real part of the raw extension FFT is off by a half-sample phase
    per axis, so the phase is removed before taking Re.
    """
    x = np.asarray(plane, dtype=np.float64)
    _check_square(x)
    n = x.shape[0]
    top = np.hstack([x, x[:, ::-1]])
    ext = np.vstack([top, top[::-1, :]])
    F = np.fft.fft2(ext)[:n, :n]
    phase = np.exp(-1j * np.pi * np.arange(n) / (2 * n))
    raw = np.real(F * np.outer(phase, phase)) / 4.0
    s = _ortho_scale(n)
    return raw * np.outer(s, s)


def _dct_rows_permute(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    v = np.concatenate([x[..., 0::2], x[..., 1::2][..., ::-1]], axis=-1)
    V = np.fft.fft(v, axis=-1)
    k = np.arange(n)
    ang = -np.pi * k / (2 * n)
    # Re(V * e^{i ang}); doubled to the unnormalized 2*sum convention
    real = 2.0 * (V.real * np.cos(ang) - V.imag * np.sin(ang))
    out = np.empty_like(real)
    out[..., 0] = real[..., 0] / (math.sqrt(n) * 2)
    out[..., 1:] = real[..., 1:] / (math.sqrt(n / 2) * 2)
    return out


def spectral_project_permute(plane) -> np.ndarray:
    """DCT-II by even/odd reordering and a length-N FFT, rows then columns."""
    x = np.asarray(plane, dtype=np.float64)
    _check_square(x)
    return _dct_rows_permute(_dct_rows_permute(x).T).T


spectral_project = spectral_project_permute


def _idct_rows(X: np.ndarray) -> np.ndarray:
    n = X.shape[-1]
    c = X / _ortho_scale(n)  # back to sum_n x_n cos(...) coefficients
    c_rev = np.zeros_like(c)
    c_rev[..., 1:] = c[..., :0:-1]
    k = np.arange(n)
    V = np.exp(1j * np.pi * k / (2 * n)) * (c - 1j * c_rev)
    v = np.fft.ifft(V, axis=-1).real
    out = np.empty_like(v)
    half = (n + 1) // 2
    out[..., 0::2] = v[..., :half]
    out[..., 1::2] = v[..., half:][..., ::-1]
    return out


def inverse_spectral(coeffs) -> np.ndarray:
    """Orthonormal 2D DCT-III; inverse and adjoint of the forward projections."""
    X = np.asarray(coeffs, dtype=np.float64)
    _check_square(X)
    return _idct_rows(_idct_rows(X).T).T


def dct2_direct(plane) -> np.ndarray:
    """Quadruple-sum orthonormal DCT-II. O(N^4); reference use only."""
    x = np.asarray(plane, dtype=np.float64)
    _check_square(x)
    n = x.shape[0]
    s = _ortho_scale(n)
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            acc = 0.0
            for i in range(n):
                cu = math.cos(math.pi * u * (2 * i + 1) / (2 * n))
                for j in range(n):
                    acc += x[i, j] * cu * math.cos(math.pi * v * (2 * j + 1) / (2 * n))
            out[u, v] = s[u] * s[v] * acc
    return out
