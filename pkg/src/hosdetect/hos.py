"""Segment-averaged power spectrum, bispectrum, trispectrum and coherences.

Bins are addressed by their DFT index: column ``k`` of every array is bin
``k`` (frequency ``k * df``).  Column 0 is carried along for indexing
convenience but lies outside every estimation domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConfigError

TRI_BIN_CAP = 128


@dataclass(frozen=True)
class SegmentConfig:
    """Segmentation and estimator settings.

    ``order="window_first"`` windows each segment and then subtracts its mean;
    ``order="mean_first"`` subtracts the mean first.
    """

    M: int
    N: int
    window: str = "hann"
    sigma_floor: float = 0.001
    max_tri_bin: Optional[int] = None
    order: str = "window_first"

    def __post_init__(self):
        if self.M < 1:
            raise ConfigError(f"need at least one segment, got M={self.M}")
        if self.N < 4:
            raise ConfigError(f"segment length must be >= 4, got N={self.N}")
        if self.window not in ("hann", "rect"):
            raise ConfigError(f"unknown window {self.window!r}")
        if not 0 < self.sigma_floor < 1:
            raise ConfigError(f"sigma_floor must lie in (0, 1), got {self.sigma_floor}")
        if self.order not in ("window_first", "mean_first"):
            raise ConfigError(f"unknown order {self.order!r}")
        if self.max_tri_bin is not None and not 1 <= self.max_tri_bin <= self.N // 2:
            raise ConfigError(
                f"max_tri_bin={self.max_tri_bin} must lie in [1, N/2={self.N // 2}]"
            )

    @property
    def half(self) -> int:
        return self.N // 2

    @property
    def tri_bins(self) -> int:
        if self.max_tri_bin is not None:
            return self.max_tri_bin
        return min(self.half, TRI_BIN_CAP)

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "window": self.window,
            "sigma_floor": self.sigma_floor,
            "max_tri_bin": self.tri_bins,
            "order": self.order,
        }


def window(name: str, N: int) -> np.ndarray:
    """Hann ``(1 - cos(2 pi l / (N-1))) / 2`` or rectangular."""
    if name == "rect":
        return np.ones(N)
    l = np.arange(N)
    return 0.5 * (1.0 - np.cos(2 * math.pi * l / (N - 1)))


@dataclass
class SegmentSpectra:
    X: np.ndarray  # (M, N/2 + 1), post-floor
    df: float
    cfg: SegmentConfig


@dataclass
class CoherenceMap:
    order: str  # "bi" or "tri"
    raw: np.ndarray
    mask: np.ndarray
    df: float

    @property
    def values(self) -> np.ndarray:
        """Raw values clamped to [0, 1]."""
        return np.clip(self.raw, 0.0, 1.0)

    def at(self, *bins) -> float:
        return float(self.raw[tuple(bins)])


@dataclass
class SpectrumSet:
    power: np.ndarray
    bispec: np.ndarray
    trispec: Optional[np.ndarray]
    df: float
    cfg: SegmentConfig
    bic: Optional[CoherenceMap] = None
    tric: Optional[CoherenceMap] = None
    meta: dict = field(default_factory=dict)

    def freqs(self) -> np.ndarray:
        return np.arange(self.power.size) * self.df


def apply_floor(X: np.ndarray, sigma: float) -> np.ndarray:
    """Per segment, lift bins under ``sigma * max`` to magnitude ``sigma**2 * max``.

    Phases are kept; exact zeros get phase 0.  The max runs over bins 1..N/2.
    Bin 0 is set to the floor value too so that no bin is left at zero.
    """
    X = X.copy()
    mag = np.abs(X)
    peak = mag[:, 1:].max(axis=1, keepdims=True)
    low = mag < sigma * peak
    low[:, 0] = True
    phase = np.where(mag > 0, X / np.where(mag > 0, mag, 1.0), 1.0)
    X[low] = (sigma * sigma * np.broadcast_to(peak, X.shape) * phase)[low]
    return X


def segment_window_fft(x, cfg: SegmentConfig, dt: float = 1.0) -> SegmentSpectra:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ConfigError("expected a single channel")
    if cfg.M * cfg.N > x.size:
        raise ConfigError(f"M*N={cfg.M * cfg.N} exceeds record length {x.size}")
    seg = x[: cfg.M * cfg.N].reshape(cfg.M, cfg.N)
    w = window(cfg.window, cfg.N)
    if cfg.order == "window_first":
        seg = seg * w
        seg = seg - seg.mean(axis=1, keepdims=True)
    else:
        seg = seg - seg.mean(axis=1, keepdims=True)
        seg = seg * w
    X = np.fft.rfft(seg, axis=1)[:, : cfg.half + 1] / cfg.N
    X = apply_floor(X, cfg.sigma_floor)
    return SegmentSpectra(X=X, df=1.0 / (cfg.N * dt), cfg=cfg)


def power_spectrum(S: SegmentSpectra) -> np.ndarray:
    return np.mean((S.X * np.conj(S.X)).real, axis=0)


def bispectrum(S: SegmentSpectra) -> np.ndarray:
    """Grid ``B[m, n]`` for ``m, n >= 1, m + n <= N/2``; zero elsewhere."""
    X = np.ascontiguousarray(S.X)
    return _kernels.bispectrum_canonical(X, S.cfg.half)


def trispectrum(S: SegmentSpectra, cfg: Optional[SegmentConfig] = None) -> np.ndarray:
    """Dense cube ``T[m, n, o]`` up to ``max_tri_bin``, filled by permutation symmetry."""
    cfg = cfg or S.cfg
    if cfg.max_tri_bin is not None and cfg.max_tri_bin > cfg.half:
        raise ConfigError(f"max_tri_bin={cfg.max_tri_bin} exceeds N/2={cfg.half}")
    X = np.ascontiguousarray(S.X)
    return _kernels.trispectrum_canonical(X, cfg.half, cfg.tri_bins)


def bi_domain(K: int) -> np.ndarray:
    m = np.arange(K + 1)
    return (m[:, None] >= 1) & (m[None, :] >= 1) & (m[:, None] + m[None, :] <= K)


def tri_domain(K: int, Kt: int) -> np.ndarray:
    m = np.arange(Kt + 1)
    a, b, c = np.meshgrid(m, m, m, indexing="ij")
    return (a >= 1) & (b >= 1) & (c >= 1) & (a + b + c <= K)


def _safe_ratio(num, den):
    out = np.zeros_like(num)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def bicoherence(P: np.ndarray, B: np.ndarray, df: float = 1.0) -> CoherenceMap:
    K = B.shape[0] - 1
    mask = bi_domain(K)
    r = np.sqrt(P[: K + 1])
    idx = np.arange(K + 1)
    s = np.minimum(idx[:, None] + idx[None, :], K)
    den = r[:, None] * r[None, :] * r[s]
    raw = np.where(mask, _safe_ratio(np.abs(B), den), 0.0)
    return CoherenceMap("bi", raw, mask, df)


def tricoherence(P: np.ndarray, T: np.ndarray, K: Optional[int] = None, df: float = 1.0) -> CoherenceMap:
    Kt = T.shape[0] - 1
    K = P.size - 1 if K is None else K
    mask = tri_domain(K, Kt)
    r = np.sqrt(P)
    idx = np.arange(Kt + 1)
    s = np.minimum(idx[:, None, None] + idx[None, :, None] + idx[None, None, :], K)
    den = r[idx][:, None, None] * r[idx][None, :, None] * r[idx][None, None, :] * r[s]
    raw = np.where(mask, _safe_ratio(np.abs(T), den), 0.0)
    # the denominator product rounds differently per permutation; mirror the canonical cell
    srt = np.sort(np.stack(np.meshgrid(idx, idx, idx, indexing="ij")), axis=0)
    raw = raw[srt[0], srt[1], srt[2]]
    return CoherenceMap("tri", raw, mask, df)


def compute_spectra(x, cfg: SegmentConfig, dt: float = 1.0, tri: bool = True) -> SpectrumSet:
    """Steps from segmentation through both coherence maps for one channel."""
    S = segment_window_fft(x, cfg, dt)
    P = power_spectrum(S)
    B = bispectrum(S)
    out = SpectrumSet(power=P, bispec=B, trispec=None, df=S.df, cfg=cfg)
    out.bic = bicoherence(P, B, S.df)
    if tri:
        out.trispec = trispectrum(S, cfg)
        out.tric = tricoherence(P, out.trispec, cfg.half, S.df)
    return out


def _next_pow2(n: float) -> int:
    return 1 << max(2, math.ceil(math.log2(max(n, 4))))


def dominant_frequency(x, dt: float) -> Optional[float]:
    """Frequency of the strongest non-DC line in a whole-record periodogram.

    Returns None unless the peak stands ``max(10, 4 ln n)`` times above the
    median of the ``n`` bins; the length-dependent part keeps the largest of
    many white-noise bins from passing.
    """
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    spec = np.abs(np.fft.rfft(x * window("hann", x.size))) ** 2
    spec[0] = 0.0
    ratio = max(10.0, 4.0 * math.log(max(spec.size - 1, 1)))
    if spec.size < 3 or np.max(spec) <= ratio * np.median(spec[1:]):
        return None
    k = int(np.argmax(spec))
    return k / (x.size * dt)


def default_segment_config(x, dt: float, cycles: int = 8, fallback_segments: int = 64, **kw) -> SegmentConfig:
    """N = smallest power of two holding ``cycles`` periods of the dominant tone,
    M = floor(L / N).

    Without a dominant tone N is chosen so that about ``fallback_segments``
    segments fit.
    """
    L = len(x)
    f = dominant_frequency(x, dt)
    if f is not None:
        N = _next_pow2(cycles / (f * dt))
    else:
        N = 1 << max(4, int(math.floor(math.log2(max(L / fallback_segments, 16)))))
    while N > L and N > 16:
        N //= 2
    kw.setdefault("max_tri_bin", None)
    return replace(SegmentConfig(M=max(1, L // N), N=N), **kw)
