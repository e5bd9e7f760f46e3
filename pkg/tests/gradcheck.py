"""Finite-difference oracles for the training pass."""
import numpy as np

from specmark import Image, RunConfig
from specmark.codec import analyze, expand_message, slot_layout, synthesize, write_bits
from specmark.model import SpecMarkModel
from specmark.nn import ConvStack, stack_forward
from specmark.training import encoder_loss, forward_backward, synthesis_adjoint
from specmark.transforms import spectral_project_mirror, spectral_project_permute

MARGIN = 1e-2
CFG = RunConfig(radius=3, bit_length=4, strength=2.0, soft_temperature=40.0, embed_mode="additive")


def preacts(img, msg, model, cfg):
    """Every LeakyReLU input of the clamp-free pass."""
    pyr, z0 = analyze(img, cfg.wavelet_levels, spectral_project_mirror)
    mask, _ = slot_layout(z0.shape[1], cfg)
    z1, te = stack_forward(z0, model.encoder)
    z2 = write_bits(z1, mask, expand_message(msg, len(mask), cfg.redundancy), cfg.channel, cfg.strength,
                    cfg.embed_mode)
    z3, th = stack_forward(z2, model.harmonize)
    _, d0 = analyze(Image(synthesize(pyr, z3)), cfg.wavelet_levels, spectral_project_permute)
    _, td = stack_forward(d0, model.decoder)
    return te.preacts + th.preacts + td.preacts


def random_point(rng, size=16, channels=1, depth=1, cfg=CFG, tries=500):
    """Random (image, message, model) with all LeakyReLU inputs at least MARGIN from 0."""
    for _ in range(tries):
        img = Image(rng.uniform(0, 255, size=(channels, size, size)))
        msg = rng.integers(0, 2, cfg.bit_length)
        model = SpecMarkModel.initialize(channels, depth, 3, cfg.alpha, float(rng.normal(0, 2)),
                                         seed=int(rng.integers(2 ** 31)), noise=0.05)
        if all(np.min(np.abs(z)) > MARGIN for z in preacts(img, msg, model, cfg)):
            return img, msg, model
    raise RuntimeError("no point away from the LeakyReLU kink")


def _loss(img, msg, model, cfg):
    return forward_backward(img, msg, model, cfg, clamp=False).total


def _signs(img, msg, model, cfg):
    return [np.signbit(z) for z in preacts(img, msg, model, cfg)]


def _close(a, fd, scale, rel):
    return abs(a - fd) <= rel * max(abs(fd), abs(a), 1e-7 * scale)


def _stencil(perturb, img, msg, model, cfg, h):
    """Five-point derivative; None if any stencil point flips a LeakyReLU input."""
    base = _signs(img, msg, model, cfg)
    vals = {}
    for k in (-2, -1, 1, 2):
        m = model.copy()
        perturb(m, k * h)
        if any(not np.array_equal(a, b) for a, b in zip(base, _signs(img, msg, m, cfg))):
            return None
        vals[k] = _loss(img, msg, m, cfg)
    return (8 * (vals[1] - vals[-1]) - (vals[2] - vals[-2])) / (12 * h)


def _weight_perturb(attr, li, idx):
    def f(m, d):
        getattr(m, attr).layers[li].weight[idx] += d
    return f


def _theta_perturb(m, d):
    m.theta += d


def check_point(img, msg, model, cfg=CFG, rng=None, per_tensor=4, rel=1e-4, h=1e-4):
    """Compare analytic and finite-difference gradients; returns list of failures."""
    rng = np.random.default_rng(rng)
    res = forward_backward(img, msg, model, cfg, clamp=False)
    bad = []
    groups = [("enc", res.grads_enc), ("harm", res.grads_harm), ("dec", res.grads_dec)]
    for name, grads in groups:
        scale = max((np.max(np.abs(g)) for g in grads), default=0.0)
        for li, g in enumerate(grads):
            for _ in range(per_tensor):
                idx = tuple(int(rng.integers(s)) for s in g.shape)
                fd = _stencil(_weight_perturb(_attr(name), li, idx), img, msg, model, cfg, h)
                if fd is None:
                    fd = _stencil(_weight_perturb(_attr(name), li, idx), img, msg, model, cfg, h / 100)
                if fd is None or not _close(g[idx], fd, scale, rel):
                    bad.append((name, li, idx, g[idx], fd))
    fd = _stencil(_theta_perturb, img, msg, model, cfg, h)
    if not _close(res.grad_theta, fd, abs(res.grad_theta), rel):
        bad.append(("theta", 0, (), res.grad_theta, fd))
    return bad


def _attr(name):
    return {"enc": "encoder", "harm": "harmonize", "dec": "decoder"}[name]


def check_spectral_coefficient(rng, size=16, levels=1, n_coeffs=5, rel=1e-4, h=1e-4):
    """d L_enc / d z through inverse spectral + inverse wavelet against central differences."""
    rng = np.random.default_rng(rng)
    img = Image(rng.uniform(0, 255, size=(1, size, size)))
    pyr, z = analyze(img, levels)
    z = z + rng.normal(0, 5, z.shape)
    loss = lambda zz: encoder_loss(img, synthesize(pyr, zz))
    out = synthesize(pyr, z)
    grad = synthesis_adjoint(2.0 * (out - img.samples) / out.size, levels)
    bad = []
    for _ in range(n_coeffs):
        idx = tuple(int(rng.integers(s)) for s in z.shape)
        zp, zm = z.copy(), z.copy()
        zp[idx] += h
        zm[idx] -= h
        fd = (loss(zp) - loss(zm)) / (2 * h)
        if not _close(grad[idx], fd, np.max(np.abs(grad)), rel):
            bad.append((idx, grad[idx], fd))
    return bad
