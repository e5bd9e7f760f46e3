import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from specmark.transforms import (
    SubBands,
    dct2_direct,
    decomposition_level,
    inverse_spectral,
    inverse_wavelet,
    segment_bands,
    spectral_project_mirror,
    spectral_project_permute,
    wavelet_decompose,
    wavelet_project,
    wavelet_reconstruct,
)

FORWARD = [spectral_project_mirror, spectral_project_permute]


def energy(x):
    return float(np.sum(np.square(x)))


# -- wavelet ---------------------------------------------------------------

def test_haar_constant():
    sb = wavelet_project(np.ones((2, 2)))
    assert sb.ll.tolist() == [[2.0]]
    assert sb.lh.tolist() == sb.hl.tolist() == sb.hh.tolist() == [[0.0]]


def test_haar_impulse():
    sb = wavelet_project(np.array([[1.0, 0.0], [0.0, 0.0]]))
    for band in (sb.ll, sb.lh, sb.hl, sb.hh):
        assert band.tolist() == [[0.5]]


def test_haar_hh_is_diagonal_detail():
    checker = np.array([[1.0, -1.0], [-1.0, 1.0]])
    sb = wavelet_project(np.tile(checker, (2, 2)))
    assert np.allclose(sb.hh, 2.0) and np.allclose(sb.ll, 0) and np.allclose(sb.lh, 0) and np.allclose(sb.hl, 0)


def test_inverse_wavelet_examples():
    z = np.zeros((1, 1))
    assert np.array_equal(inverse_wavelet(SubBands(z, z, z, z)), np.zeros((2, 2)))
    assert np.array_equal(inverse_wavelet(SubBands(np.array([[2.0]]), z, z, z)), np.ones((2, 2)))


def test_wavelet_round_trip(rng):
    p = rng.normal(size=(64, 64))
    assert np.max(np.abs(inverse_wavelet(wavelet_project(p)) - p)) < 1e-9


def test_wavelet_odd_sizes_round_trip(rng):
    p = rng.normal(size=(9, 14))
    sb = wavelet_project(p)
    assert sb.band_shape == (5, 7)
    assert np.max(np.abs(inverse_wavelet(sb) - p)) < 1e-9


def test_wavelet_errors():
    with pytest.raises(ValueError):
        wavelet_project(np.ones((1, 4)))
    z = np.zeros((2, 2))
    with pytest.raises(ValueError):
        SubBands(z, z, z, np.zeros((3, 3)))


def test_multilevel_round_trip(rng):
    p = rng.normal(size=(32, 32))
    pyr = wavelet_decompose(p, 3)
    assert [s.band_shape for s in pyr] == [(16, 16), (8, 8), (4, 4)]
    assert np.max(np.abs(wavelet_reconstruct(pyr) - p)) < 1e-9


# -- decomposition level / segmentation --------------------------------------

@pytest.mark.parametrize("n,kappa", [(262144, 3), (65536, 3), (1, 1)])
def test_decomposition_level(n, kappa):
    assert decomposition_level(n) == kappa


def test_decomposition_level_matches_formula():
    for n in [2, 10, 100, 5000, 10 ** 6, 10 ** 9]:
        assert decomposition_level(n) == max(1, math.floor(math.sqrt(math.log(1 + n))))
    with pytest.raises(ValueError):
        decomposition_level(0)


def test_segment_examples():
    assert segment_bands(8, 2).intervals == ((0, 4), (4, 8))
    assert segment_bands(8, 1).intervals == ((0, 8),)
    with pytest.raises(ValueError):
        segment_bands(3, 4)


@given(st.integers(1, 300), st.integers(1, 300))
def test_segment_partition(L, kappa):
    if kappa > L:
        return
    seg = segment_bands(L, kappa)
    covered = [i for a, b in seg.intervals for i in range(a, b)]
    assert covered == list(range(L))
    assert len(seg.intervals) == kappa


# -- spectral projections ------------------------------------------------------

@pytest.mark.parametrize("fwd", FORWARD)
def test_dc_only_for_constant(fwd):
    c = fwd(np.ones((4, 4)))
    expect = np.zeros((4, 4))
    expect[0, 0] = 4.0
    assert np.max(np.abs(c - expect)) < 1e-12


@pytest.mark.parametrize("fwd", FORWARD)
def test_one_point_identity(fwd):
    assert fwd(np.array([[3.25]])).tolist() == [[3.25]]


@pytest.mark.parametrize("fwd", FORWARD)
def test_parseval_16(fwd, rng):
    x = rng.normal(size=(16, 16))
    assert abs(energy(fwd(x)) - energy(x)) <= 1e-9 * energy(x)


def test_constructions_agree_32(rng):
    x = rng.normal(size=(32, 32))
    assert np.max(np.abs(spectral_project_mirror(x) - spectral_project_permute(x))) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 7, 8, 12, 16])
def test_against_direct_sum(n, rng):
    x = rng.normal(size=(n, n))
    ref = dct2_direct(x)
    for fwd in FORWARD:
        assert np.max(np.abs(fwd(x) - ref)) < 1e-9


def test_direct_sum_oracle_is_independent(rng):
    # the oracle itself against scipy's orthonormal DCT-II
    import scipy.fft

    x = rng.normal(size=(6, 6))
    assert np.max(np.abs(dct2_direct(x) - scipy.fft.dctn(x, norm="ortho"))) < 1e-12


def test_inverse_examples(rng):
    dc = np.zeros((4, 4))
    dc[0, 0] = 4.0
    assert np.max(np.abs(inverse_spectral(dc) - 1.0)) < 1e-12
    assert np.array_equal(inverse_spectral(np.zeros((5, 5))), np.zeros((5, 5)))
    x = rng.normal(size=(32, 32))
    assert np.max(np.abs(inverse_spectral(spectral_project_mirror(x)) - x)) < 1e-9


def test_non_square_rejected():
    for fn in FORWARD + [inverse_spectral]:
        with pytest.raises(ValueError):
            fn(np.zeros((4, 5)))


def test_deterministic(rng):
    x = rng.normal(size=(24, 24))
    assert np.array_equal(spectral_project_permute(x), spectral_project_permute(x.copy()))


planes = st.integers(1, 24).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-1e3, 1e3, allow_nan=False)))


@settings(max_examples=60, deadline=None)
@given(planes, planes, st.floats(-5, 5), st.floats(-5, 5))
def test_linearity(x, y, a, b):
    if x.shape != y.shape:
        return
    for fwd in FORWARD:
        lhs = fwd(a * x + b * y)
        rhs = a * fwd(x) + b * fwd(y)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * (1 + np.max(np.abs(lhs)))


@settings(max_examples=60, deadline=None)
@given(planes)
def test_round_trip_and_parseval_property(x):
    e = energy(x)
    for fwd in FORWARD:
        c = fwd(x)
        assert abs(energy(c) - e) <= 1e-9 * max(e, 1e-300)
        assert np.max(np.abs(inverse_spectral(c) - x)) <= 1e-9 * (1 + np.max(np.abs(x)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 16).flatmap(lambda n: st.tuples(
    arrays(np.float64, (2 * n, 2 * n), elements=st.floats(-100, 100)),
    arrays(np.float64, (2 * n, 2 * n), elements=st.floats(-100, 100)))))
def test_adjoint_property(pair):
    x, y = pair
    # spectral: <T x, y> = <x, T^-1 y>
    assert abs(np.vdot(spectral_project_permute(x), y) - np.vdot(x, inverse_spectral(y))) <= 1e-9 * (
        1 + np.abs(x).sum() * np.abs(y).max())
    # wavelet: <W x, bands> = <x, W^-1 bands>
    sb = wavelet_project(x)
    h = x.shape[0] // 2
    bands = SubBands(y[:h, :h], y[:h, h:], y[h:, :h], y[h:, h:])
    lhs = sum(np.vdot(a, b) for a, b in zip((sb.ll, sb.lh, sb.hl, sb.hh), (bands.ll, bands.lh, bands.hl, bands.hh)))
    rhs = np.vdot(x, inverse_wavelet(bands))
    assert abs(lhs - rhs) <= 1e-9 * (1 + np.abs(x).sum() * np.abs(y).max())


def test_wavelet_linearity_and_parseval(rng):
    x, y = rng.normal(size=(2, 16, 16))
    a, b = 1.7, -0.3
    s1, sx, sy = wavelet_project(a * x + b * y), wavelet_project(x), wavelet_project(y)
    for band in ("ll", "lh", "hl", "hh"):
        assert np.max(np.abs(getattr(s1, band) - a * getattr(sx, band) - b * getattr(sy, band))) < 1e-9
    assert abs(sx.energy() - energy(x)) <= 1e-9 * energy(x)


def test_composed_pipeline_parseval(rng):
    x = rng.normal(size=(64, 64))
    sb = wavelet_project(x)
    spec = spectral_project_permute(sb.hh)
    total = energy(sb.ll) + energy(sb.lh) + energy(sb.hl) + energy(spec)
    assert abs(total - energy(x)) <= 1e-9 * energy(x)
