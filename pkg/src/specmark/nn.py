"""Small differentiable building blocks: same-size conv, LeakyReLU, Adam.

Everything works on ``(C, H, W)`` float64 arrays. Padding is reflective so
spectral planes keep no artificial dark border.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_ALPHA = 0.01
DEFAULT_KERNEL = 3


@dataclass
class ConvLayer:
    """``weight`` has shape ``(out_channels, in_channels, K, K)``; no bias."""
    weight: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 4 or self.weight.shape[2] != self.weight.shape[3]:
            raise ValueError(f"bad kernel shape {self.weight.shape}")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel size must be odd")

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[2]

    @property
    def channels(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def identity(cls, channels: int, kernel_size: int = DEFAULT_KERNEL) -> "ConvLayer":
        w = np.zeros((channels, channels, kernel_size, kernel_size))
        c = kernel_size // 2
        w[np.arange(channels), np.arange(channels), c, c] = 1.0
        return cls(w)

    def copy(self) -> "ConvLayer":
        return ConvLayer(self.weight.copy())


@dataclass
class ConvStack:
    layers: list[ConvLayer] = field(default_factory=list)
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("LeakyReLU slope must be positive")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @classmethod
    def identity(cls, depth: int, channels: int, kernel_size: int = DEFAULT_KERNEL) -> "ConvStack":
        """Exact identity map: delta kernels with slope 1, so negatives pass too."""
        return cls([ConvLayer.identity(channels, kernel_size) for _ in range(depth)], alpha=1.0)

    @classmethod
    def near_identity(cls, depth, channels, kernel_size=DEFAULT_KERNEL, alpha=DEFAULT_ALPHA,
                      noise=1e-3, rng=None) -> "ConvStack":
        rng = np.random.default_rng(rng)
        layers = []
        for _ in range(depth):
            layer = ConvLayer.identity(channels, kernel_size)
            layer.weight += rng.normal(0.0, noise, size=layer.weight.shape)
            layers.append(layer)
        return cls(layers, alpha=alpha)

    def params(self) -> list[np.ndarray]:
        return [l.weight for l in self.layers]

    def set_params(self, params) -> None:
        for layer, p in zip(self.layers, params, strict=True):
            layer.weight = np.asarray(p, dtype=np.float64)

    def copy(self) -> "ConvStack":
        return ConvStack([l.copy() for l in self.layers], self.alpha)


def _reflect_index(n: int, pad: int) -> np.ndarray:
    idx = np.arange(-pad, n + pad)
    idx = np.abs(idx)
    over = idx > n - 1
    idx[over] = 2 * (n - 1) - idx[over]
    return idx


def _pad(x: np.ndarray, pad: int):
    ri = _reflect_index(x.shape[1], pad)
    ci = _reflect_index(x.shape[2], pad)
    return x[:, ri][:, :, ci], ri, ci


def _unpad(g: np.ndarray, ri, ci, shape) -> np.ndarray:
    tmp = np.zeros((g.shape[0], shape[1], g.shape[2]))
    np.add.at(tmp, (slice(None), ri), g)
    out = np.zeros(shape)
    np.add.at(out, (slice(None), slice(None), ci), tmp)
    return out


def conv_forward(x, layer: ConvLayer) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    C, H, W = x.shape
    K = layer.kernel_size
    if C != layer.channels:
        raise ValueError(f"input has {C} channels, kernel expects {layer.channels}")
    if K > min(H, W):
        raise ValueError(f"kernel {K}x{K} larger than input {H}x{W}")
    p = K // 2
    xp = _pad(x, p)[0] if p else x
    w = layer.weight
    out = np.zeros((w.shape[0], H, W))
    for a in range(K):
        for b in range(K):
            out += np.einsum("oc,chw->ohw", w[:, :, a, b], xp[:, a:a + H, b:b + W], optimize=False)
    return out


def conv_backward(x, layer: ConvLayer, grad_out):
    """Returns ``(grad_input, grad_weight)`` for ``conv_forward(x, layer)``."""
    x = np.asarray(x, dtype=np.float64)
    C, H, W = x.shape
    K = layer.kernel_size
    p = K // 2
    if p:
        xp, ri, ci = _pad(x, p)
    else:
        xp = x
    w = layer.weight
    gw = np.empty_like(w)
    gxp = np.zeros_like(xp)
    for a in range(K):
        for b in range(K):
            win = xp[:, a:a + H, b:b + W]
            gw[:, :, a, b] = np.einsum("ohw,chw->oc", grad_out, win, optimize=False)
            gxp[:, a:a + H, b:b + W] += np.einsum("oc,ohw->chw", w[:, :, a, b], grad_out, optimize=False)
    gx = _unpad(gxp, ri, ci, x.shape) if p else gxp
    return gx, gw


def leaky_relu(x, alpha: float = DEFAULT_ALPHA):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, x, alpha * x)


def leaky_relu_grad(pre, alpha: float) -> np.ndarray:
    return np.where(np.asarray(pre) >= 0, 1.0, alpha)


@dataclass
class Tape:
    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    stack: ConvStack


def stack_forward(x, stack: ConvStack):
    """Apply conv + LeakyReLU per layer. Returns ``(output, tape)``."""
    cur = np.asarray(x, dtype=np.float64)
    if cur.ndim == 2:
        cur = cur[None]
    inputs, pre = [], []
    for layer in stack.layers:
        inputs.append(cur)
        z = conv_forward(cur, layer)
        pre.append(z)
        cur = leaky_relu(z, stack.alpha)
    return cur, Tape(inputs, pre, stack)


def stack_backward(tape: Tape, grad_out):
    """Reverse-mode pass; returns ``(grad_input, [grad_weight per layer])``."""
    g = np.asarray(grad_out, dtype=np.float64)
    n = len(tape.stack.layers)
    if n:
        expect = tape.preacts[-1].shape
        if g.shape != expect:
            raise ValueError(f"gradient shape {g.shape} does not match forward output {expect}")
    grads = [None] * n
    for i in reversed(range(n)):
        g = g * leaky_relu_grad(tape.preacts[i], tape.stack.alpha)
        g, grads[i] = conv_backward(tape.inputs[i], tape.stack.layers[i], g)
    return g, grads


# --------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw) -> "AdamState":
        return cls([np.zeros_like(p, dtype=np.float64) for p in params],
                   [np.zeros_like(p, dtype=np.float64) for p in params], **kw)


def adam_step(params, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state disagree in length")
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    for p, g, m in zip(params, grads, state.m):
        if np.shape(p) != g.shape or m.shape != g.shape:
            raise ValueError("parameter/gradient shape mismatch")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        new_p.append(np.asarray(p, dtype=np.float64) - lr * mhat / (np.sqrt(vhat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t, b1, b2, state.eps)
