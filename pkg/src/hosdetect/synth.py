"""Seeded test-signal generators and the first-order low-pass test filter."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sps

from .errors import ConfigError
from .hardlimit import HardLimitSpec, SineInput, apply_limit


class PhaseMode(str, enum.Enum):
    FIXED = "fixed"
    PER_SEGMENT_RANDOM = "per_segment_random"


@dataclass(frozen=True)
class Tone:
    freq: float
    amplitude: float = 1.0
    phase: float = 0.0
    mode: PhaseMode = PhaseMode.FIXED


@dataclass(frozen=True)
class ToneSpec:
    tones: Sequence[Tone]
    fs: float
    length: int
    noise_db: Optional[float] = -20.0
    # additive white noise, dB relative to unit power; None disables
    additive_db: Optional[float] = None
    segment_length: Optional[int] = None

    def __post_init__(self):
        if self.length <= 0:
            raise ConfigError("length must be positive")
        for t in self.tones:
            if not 0 < t.freq < self.fs / 2:
                raise ConfigError(f"tone at {t.freq} Hz is outside (0, fs/2)")
        if any(PhaseMode(t.mode) is PhaseMode.PER_SEGMENT_RANDOM for t in self.tones):
            if not self.segment_length:
                raise ConfigError("per-segment random phases need segment_length")


def case_one(phi3: float = 0.0, fs: float = 5.0, length: int = 8192,
             noise_db: float = -20.0, randomize_sum: bool = False,
             segment_length: Optional[int] = None) -> ToneSpec:
    """Three tones f1, f2 and f1 + f2, the sum tone optionally decoupled."""
    f1, f2 = 0.6381, 0.8345
    mode = PhaseMode.PER_SEGMENT_RANDOM if randomize_sum else PhaseMode.FIXED
    tones = (Tone(f1), Tone(f2), Tone(f1 + f2, phase=phi3, mode=mode))
    return ToneSpec(tones, fs, length, noise_db=noise_db, segment_length=segment_length)


def gen_tones(spec: ToneSpec, seed: int = 0) -> np.ndarray:
    """Sum of cosines with white Gaussian phase noise inside each argument.

    ``noise_db`` sets the phase-noise variance as ``10**(noise_db/10)`` rad^2.
    """
    rng = np.random.default_rng(seed)
    n = np.arange(spec.length)
    x = np.zeros(spec.length)
    sd = 0.0 if spec.noise_db is None else math.sqrt(10 ** (spec.noise_db / 10))
    for tone in spec.tones:
        phase = np.full(spec.length, tone.phase, dtype=float)
        if PhaseMode(tone.mode) is PhaseMode.PER_SEGMENT_RANDOM:
            nseg = -(-spec.length // spec.segment_length)
            draws = rng.uniform(0, 2 * math.pi, nseg)
            phase += np.repeat(draws, spec.segment_length)[: spec.length]
        w = rng.normal(0.0, sd, spec.length) if sd else 0.0
        x += tone.amplitude * np.cos(2 * math.pi * tone.freq * n / spec.fs + phase + w)
    if spec.additive_db is not None:
        x += rng.normal(0.0, math.sqrt(10 ** (spec.additive_db / 10)), spec.length)
    return x


def gen_clipped_sine(inp: SineInput, spec: HardLimitSpec, fs: float, length: int,
                     seed: int = 0, noise_db: Optional[float] = None,
                     phase: float = 0.0) -> np.ndarray:
    """``apply_limit`` over ``A0 + A sin(2 pi f n / fs + phase)`` plus optional noise.

    The noise is added after the limiter; ``noise_db`` is relative to the
    power of the unclipped sine, ``A**2 / 2``.
    """
    if not inp.f < fs / 2:
        raise ConfigError(f"f={inp.f} must lie below fs/2={fs / 2}")
    n = np.arange(length)
    y = apply_limit(spec, inp.A0 + inp.A * np.sin(2 * math.pi * inp.f * n / fs + phase))
    if noise_db is not None:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, inp.A * math.sqrt(0.5 * 10 ** (noise_db / 10)), length)
    return np.asarray(y, dtype=float)


@dataclass(frozen=True)
class FilterSpec:
    cutoff_hz: float
    fs: float
    kind: str = "first_order_lowpass"

    def __post_init__(self):
        if self.kind != "first_order_lowpass":
            raise ConfigError(f"unsupported filter kind {self.kind!r}")
        if not 0 < self.cutoff_hz < self.fs / 2:
            raise ConfigError("cutoff must lie in (0, fs/2)")

    def coefficients(self):
        """Bilinear discretisation of ``wc / (s + wc)`` with cutoff prewarping."""
        wc = 2 * self.fs * math.tan(math.pi * self.cutoff_hz / self.fs)
        return sps.bilinear([wc], [1.0, wc], fs=self.fs)

    def response(self, f) -> np.ndarray:
        b, a = self.coefficients()
        z = np.exp(2j * math.pi * np.asarray(f, dtype=float) / self.fs)
        return np.polyval(b[::-1], 1 / z) / np.polyval(a[::-1], 1 / z)


def apply_filter(x, spec: FilterSpec) -> np.ndarray:
    """Causal IIR realisation, starting from rest."""
    b, a = spec.coefficients()
    return sps.lfilter(b, a, np.asarray(x, dtype=float))
