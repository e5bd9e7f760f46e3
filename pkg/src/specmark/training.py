"""Losses and the joint encoder/decoder optimisation loop.

Backward passes through the wavelet and spectral projections use the
fact that both are orthonormal: the adjoint is the inverse.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .codec import analyze, as_bits, expand_message, slot_layout, synthesize, write_bits
from .config import RunConfig
from .decoder import extract, reduce_scores, soft_probabilities
from .errors import ConfigError, DivergenceError
from .imagecore import Image
from .metrics import bra
from .model import SpecMarkModel
from .nn import AdamState, adam_step, stack_backward, stack_forward
from .transforms import (
    SubBands,
    inverse_spectral,
    spectral_project_mirror,
    spectral_project_permute,
    wavelet_decompose,
    wavelet_reconstruct,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 300
    batch_size: int = 32
    dec_lr: float = 1e-3
    enc_lr: float = 1e-2
    halve_every: int = 100
    lambda_enc: float = 0.7
    lambda_dec: float = 1.0
    seed: int = 0
    eval_every: int = 0

    def __post_init__(self):
        if self.lambda_enc < 0 or self.lambda_dec < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.dec_lr < 0 or self.enc_lr < 0:
            raise ConfigError("learning rates must be non-negative")
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError("steps >= 0 and batch_size >= 1 required")

    def decoder_lr(self, step: int) -> float:
        """Decoder rate at 1-based ``step``; halves at every multiple of ``halve_every``."""
        if self.halve_every <= 0:
            return self.dec_lr
        return self.dec_lr * 0.5 ** (step // self.halve_every)


@dataclass
class TrainReport:
    rows: list[dict] = field(default_factory=list)

    def losses(self, key: str = "total") -> np.ndarray:
        return np.array([r[key] for r in self.rows])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["step", "L_enc", "L_dec", "L_total", "clean_BRA", "seconds"])
            for r in self.rows:
                b = r.get("clean_bra")
                wr.writerow([r["step"], repr(r["enc"]), repr(r["dec"]), repr(r["total"]),
                             "" if b is None else f"{b:.6f}", f"{r['seconds']:.4f}"])


# --------------------------------------------------------------------------
# losses

def encoder_loss(original, embedded) -> float:
    a = original.samples if isinstance(original, Image) else np.asarray(original, dtype=np.float64)
    b = embedded.samples if isinstance(embedded, Image) else np.asarray(embedded, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.square(b - a)))


def decoder_loss(message, probs) -> float:
    m = np.asarray(message, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if m.shape != p.shape:
        raise ValueError("message and probabilities differ in length")
    return float(np.mean(np.square(p - m)))


def decoder_loss_grad_theta(message, scores, theta: float, tau: float) -> float:
    """d decoder_loss / d theta for the logistic surrogate."""
    m = np.asarray(message, dtype=np.float64)
    p = soft_probabilities(scores, theta, tau)
    return float(np.sum(2.0 * (p - m) * p * (1.0 - p) * (-1.0 / tau)) / len(m))


def total_loss(l_enc: float, l_dec: float, lambda_enc: float = 0.7, lambda_dec: float = 1.0) -> float:
    if lambda_enc < 0 or lambda_dec < 0:
        raise ValueError("loss weights must be non-negative")
    return lambda_enc * l_enc + lambda_dec * l_dec


# --------------------------------------------------------------------------
# adjoints of the analysis/synthesis maps

def hh_adjoint(g_hh_planes, shape, levels: int) -> np.ndarray:
    """Adjoint of ``image -> deepest hh band`` for even-sized planes."""
    out = []
    for g in g_hh_planes:
        pyr = wavelet_decompose(np.zeros(shape), levels)
        pyr = [SubBands(np.zeros_like(s.ll), np.zeros_like(s.lh), np.zeros_like(s.hl), np.zeros_like(s.hh), s.shape)
               for s in pyr]
        pyr[-1] = pyr[-1].replace(hh=g)
        out.append(wavelet_reconstruct(pyr))
    return np.stack(out)


def synthesis_adjoint(g_samples: np.ndarray, levels: int) -> np.ndarray:
    """Gradient w.r.t. the hh spectra given the gradient w.r.t. the synthesized samples."""
    return np.stack([spectral_project_mirror(wavelet_decompose(g, levels)[-1].hh) for g in g_samples])


def _check_even(img: Image, levels: int) -> None:
    if img.height % (2 ** levels) or img.width % (2 ** levels):
        raise ConfigError(f"training needs image sides divisible by {2 ** levels}")


# --------------------------------------------------------------------------
# one differentiable pass

@dataclass
class PassResult:
    enc: float
    dec: float
    total: float
    grads_enc: list
    grads_harm: list
    grads_dec: list
    grad_theta: float
    probs: np.ndarray
    embedded: np.ndarray


def forward_backward(img: Image, message, model: SpecMarkModel, cfg: RunConfig,
                     lambda_enc: float = 0.7, lambda_dec: float = 1.0, clamp: bool = True,
                     mode: str = "additive") -> PassResult:
    """Embed, soft-decode and back-propagate the total loss for one image."""
    bits = as_bits(message)
    levels = cfg.wavelet_levels
    _check_even(img, levels)

    pyr, z0 = analyze(img, levels, spectral_project_mirror)
    mask, used = slot_layout(z0.shape[1], cfg)
    expanded = expand_message(bits, len(mask), cfg.redundancy)
    rows, cols = mask.rows[:used], mask.cols[:used]

    z1, tape_e = stack_forward(z0, model.encoder)
    z2 = write_bits(z1, mask, expanded, cfg.channel, cfg.strength, mode)
    z3, tape_h = stack_forward(z2, model.harmonize)
    raw = synthesize(pyr, z3)
    if clamp:
        out = np.clip(raw, 0.0, 255.0)
        inside = (raw >= 0.0) & (raw <= 255.0)
    else:
        out, inside = raw, None

    _, d0 = analyze(Image(out), levels, spectral_project_permute)
    d1, tape_d = stack_forward(d0, model.decoder)
    scores = reduce_scores(d1[cfg.channel, rows, cols], len(bits))
    tau = cfg.soft_temperature
    p = soft_probabilities(scores, model.theta, tau)

    l_enc = encoder_loss(img, out)
    l_dec = decoder_loss(bits, p)
    total = total_loss(l_enc, l_dec, lambda_enc, lambda_dec)

    # decoder path
    g_score = lambda_dec * 2.0 * (p - bits) / len(bits) * p * (1.0 - p) / tau
    grad_theta = float(-np.sum(g_score))
    counts = np.bincount(np.arange(used) % len(bits), minlength=len(bits))
    g_d1 = np.zeros_like(d1)
    g_d1[cfg.channel, rows, cols] = (g_score / counts)[np.arange(used) % len(bits)]
    g_d0, grads_dec = stack_backward(tape_d, g_d1)
    g_hh = np.stack([inverse_spectral(g) for g in g_d0])
    g_out = hh_adjoint(g_hh, img.shape[1:], levels)

    # encoder path
    g_out += lambda_enc * 2.0 * (out - img.samples) / out.size
    if inside is not None:
        g_out = g_out * inside
    g_z3 = synthesis_adjoint(g_out, levels)
    g_z2, grads_harm = stack_backward(tape_h, g_z3)
    if mode == "substitutive":
        g_z2 = g_z2.copy()
        g_z2[cfg.channel, rows, cols] = 0.0
    _, grads_enc = stack_backward(tape_e, g_z2)

    return PassResult(l_enc, l_dec, total, grads_enc, grads_harm, grads_dec, grad_theta, p, out)


# --------------------------------------------------------------------------
# training loop

def clean_bra(images, model: SpecMarkModel, cfg: RunConfig, rng) -> float:
    from .codec import embed, random_message
    rng = np.random.default_rng(rng)
    accs = []
    for img in images:
        m = random_message(cfg.bit_length, rng)
        w = embed(img, m, cfg.replace(embed_mode="additive"), model)
        accs.append(bra(m, extract(w, cfg, model).bits))
    return float(np.mean(accs))


def _params(model):
    return model.encoder.params() + model.harmonize.params(), model.decoder.params() + [np.array(model.theta)]


def _assign(model, enc_params, dec_params):
    ne = model.encoder.depth
    model.encoder.set_params(enc_params[:ne])
    model.harmonize.set_params(enc_params[ne:])
    model.decoder.set_params(dec_params[:-1])
    model.theta = float(dec_params[-1])


def train(corpus, cfg: RunConfig, tcfg: TrainConfig, model: SpecMarkModel | None = None,
          holdout=None, progress=None):
    """Jointly fit encoder stack, harmonize layer, decoder stack and theta.

    Returns ``(model, report)``. ``model`` defaults to a seeded near-identity init.
    """
    corpus = list(corpus)
    if not corpus:
        raise ConfigError("training corpus is empty")
    channels = corpus[0].channels
    cfg.check_channels(channels)
    if model is None:
        model = SpecMarkModel.initialize(channels, cfg.conv_layers, cfg.kernel_size, cfg.alpha,
                                         cfg.theta, seed=cfg.seed)
    model = model.copy()
    rng = np.random.default_rng([tcfg.seed, 0x5EC])
    enc_p, dec_p = _params(model)
    enc_state, dec_state = AdamState.zeros_like(enc_p), AdamState.zeros_like(dec_p)
    report = TrainReport()
    last_good = model.copy()
    bs = min(tcfg.batch_size, len(corpus))

    for step in range(1, tcfg.steps + 1):
        t0 = time.perf_counter()
        idx = rng.choice(len(corpus), size=bs, replace=False)
        g_enc = [np.zeros_like(p) for p in enc_p]
        g_dec = [np.zeros_like(p) for p in dec_p]
        sums = np.zeros(3)
        for i in idx:
            msg = rng.integers(0, 2, size=cfg.bit_length)
            r = forward_backward(corpus[i], msg, model, cfg, tcfg.lambda_enc, tcfg.lambda_dec)
            sums += (r.enc, r.dec, r.total)
            for acc, g in zip(g_enc, r.grads_enc + r.grads_harm):
                acc += g
            for acc, g in zip(g_dec, r.grads_dec + [np.array(r.grad_theta)]):
                acc += g
        sums /= bs
        if not np.all(np.isfinite(sums)):
            raise DivergenceError(f"non-finite loss at step {step}", checkpoint=last_good, step=step)
        g_enc = [g / bs for g in g_enc]
        g_dec = [g / bs for g in g_dec]
        try:
            if tcfg.enc_lr > 0:
                enc_p, enc_state = adam_step(enc_p, g_enc, enc_state, tcfg.enc_lr)
            lr_d = tcfg.decoder_lr(step)
            if lr_d > 0:
                dec_p, dec_state = adam_step(dec_p, g_dec, dec_state, lr_d)
        except FloatingPointError as exc:
            raise DivergenceError(f"non-finite gradient at step {step}", checkpoint=last_good, step=step) from exc
        _assign(model, enc_p, dec_p)
        enc_p, dec_p = _params(model)
        last_good = model.copy()

        row = {"step": step, "enc": float(sums[0]), "dec": float(sums[1]), "total": float(sums[2]),
               "clean_bra": None, "seconds": time.perf_counter() - t0}
        if holdout and tcfg.eval_every and (step % tcfg.eval_every == 0 or step == tcfg.steps):
            row["clean_bra"] = clean_bra(holdout, model, cfg, [tcfg.seed, step])
        report.rows.append(row)
        if progress:
            progress(row)
        log.debug("step %d total %.5f enc %.5f dec %.5f", step, *sums[[2, 0, 1]])
    return model, report
