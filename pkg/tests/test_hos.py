import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hosdetect import _kernels, hos
from hosdetect.errors import ConfigError


def rand_X(seed, M=6, K=16):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(M, K + 1)) + 1j * rng.normal(size=(M, K + 1))


@pytest.mark.parametrize("seed", range(3))
def test_bispectrum_backends_agree(seed):
    X = rand_X(seed)
    ref = _kernels._bispectrum_numpy(X, 16)
    assert np.allclose(_kernels._bispectrum_loops(X, 16), ref, atol=1e-12, rtol=1e-9)
    assert np.allclose(_kernels._bispectrum_loops.py_func(X, 16), ref, atol=1e-12, rtol=1e-9)


@pytest.mark.parametrize("Kt", [4, 7, 16])
def test_trispectrum_backends_agree(Kt):
    X = rand_X(Kt)
    ref = _kernels._trispectrum_numpy(X, 16, Kt)
    assert np.allclose(_kernels._trispectrum_loops(X, 16, Kt), ref, atol=1e-12, rtol=1e-9)
    assert np.allclose(_kernels._trispectrum_loops.py_func(X, 16, Kt), ref, atol=1e-12, rtol=1e-9)


def test_bispectrum_direct_definition():
    X = rand_X(7, K=10)
    B = _kernels._bispectrum_numpy(X, 10)
    for m in range(1, 10):
        for n in range(1, 11 - m):
            direct = np.mean(X[:, m] * X[:, n] * np.conj(X[:, m + n]))
            assert B[m, n] == pytest.approx(direct, abs=1e-12)
    assert B[0, 3] == 0 and B[6, 6] == 0


def test_trispectrum_direct_definition():
    X = rand_X(8, K=12)
    T = _kernels._trispectrum_numpy(X, 12, 8)
    for m, n, o in [(1, 1, 1), (2, 3, 7), (4, 4, 4), (8, 3, 1)]:
        direct = np.mean(X[:, m] * X[:, n] * X[:, o] * np.conj(X[:, m + n + o]))
        assert T[m, n, o] == pytest.approx(direct, abs=1e-12)
    assert T[5, 5, 5] == 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_coherence_symmetry_and_scale(seed):
    x = np.random.default_rng(seed).normal(size=64 * 16)
    cfg = hos.SegmentConfig(M=16, N=64)
    a = hos.compute_spectra(x, cfg)
    b = hos.compute_spectra(1000 * x, cfg)
    assert np.array_equal(a.bic.raw, a.bic.raw.T)
    t = a.tric.raw
    for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0), (1, 2, 0), (2, 0, 1)]:
        assert np.array_equal(t, t.transpose(perm))
    assert np.max(np.abs(a.bic.raw - b.bic.raw)) < 1e-12
    assert np.max(np.abs(a.tric.raw - b.tric.raw)) < 1e-12


def test_floor_keeps_phase_and_lifts_small_bins():
    X = np.array([[0.0, 10.0, 1e-5 * np.exp(1j * 0.7), 0.0]])
    Y = hos.apply_floor(X, 1e-3)
    assert Y[0, 1] == 10.0
    assert abs(Y[0, 2]) == pytest.approx(1e-5)
    assert np.angle(Y[0, 2]) == pytest.approx(0.7)
    assert Y[0, 3] == pytest.approx(1e-5)
    assert Y[0, 0] == pytest.approx(1e-5)


def test_dc_record_is_fully_floored_with_rect_window():
    x = np.full(256, 3.0)
    S = hos.segment_window_fft(x, hos.SegmentConfig(M=4, N=64, window="rect"))
    assert np.all(np.abs(S.X) == 0)  # no peak to scale the floor against


def test_pure_tone_bin_power():
    N, M = 64, 8
    n = np.arange(N * M)
    x = 2.0 * np.cos(2 * math.pi * 8 * n / N)
    S = hos.segment_window_fft(x, hos.SegmentConfig(M=M, N=N, window="rect"))
    P = hos.power_spectrum(S)
    assert P[8] == pytest.approx(1.0, rel=1e-12)
    assert np.argmax(P) == 8


def test_quadratic_coupling_gives_unit_bicoherence():
    N, M = 64, 64
    rng = np.random.default_rng(3)
    segs = []
    for _ in range(M):
        p1, p2 = rng.uniform(0, 2 * math.pi, 2)
        n = np.arange(N)
        segs.append(np.cos(2 * math.pi * 5 * n / N + p1) + np.cos(2 * math.pi * 9 * n / N + p2)
                    + np.cos(2 * math.pi * 14 * n / N + p1 + p2))
    x = np.concatenate(segs)
    cfg = hos.SegmentConfig(M=M, N=N, window="rect")
    out = hos.compute_spectra(x, cfg, tri=False)
    assert out.bic.at(5, 9) == pytest.approx(1.0, abs=1e-9)
    assert out.bic.at(5, 5) < 0.3


def test_domains():
    K = 8
    mask = hos.bi_domain(K)
    assert mask[1, 7] and not mask[1, 8] and not mask[0, 3]
    tri = hos.tri_domain(K, 6)
    assert tri[2, 3, 3] and not tri[2, 3, 4] and tri.shape == (7, 7, 7)


def test_config_validation():
    with pytest.raises(ConfigError):
        hos.SegmentConfig(M=0, N=64)
    with pytest.raises(ConfigError):
        hos.SegmentConfig(M=4, N=2)
    with pytest.raises(ConfigError):
        hos.SegmentConfig(M=4, N=64, window="blackman")
    with pytest.raises(ConfigError):
        hos.SegmentConfig(M=4, N=64, sigma_floor=1.5)
    with pytest.raises(ConfigError):
        hos.SegmentConfig(M=4, N=64, max_tri_bin=40)
    with pytest.raises(ConfigError):
        hos.segment_window_fft(np.zeros(100), hos.SegmentConfig(M=4, N=64))
    assert hos.SegmentConfig(M=4, N=512).tri_bins == hos.TRI_BIN_CAP


def test_default_segmentation_covers_eight_cycles():
    fs, f = 1000.0, 33.8
    x = np.sin(2 * math.pi * f * np.arange(32768) / fs)
    cfg = hos.default_segment_config(x, 1 / fs)
    assert cfg.N == 256 and cfg.M == 128
    assert cfg.N / fs * f >= 8
    noise = np.random.default_rng(0).normal(size=8192)
    assert hos.default_segment_config(noise, 1.0).M == 64


def test_segment_order_options():
    x = np.full(256, 3.0)
    S = hos.segment_window_fft(x, hos.SegmentConfig(M=4, N=64, order="mean_first"))
    assert np.all(np.abs(S.X) == 0)
    # windowing first leaves the tapered DC shape, which leaks into bin 1
    S = hos.segment_window_fft(x, hos.SegmentConfig(M=4, N=64))
    assert np.all(np.abs(S.X[:, 1]) > 0.5)
