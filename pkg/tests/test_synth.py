import math

import numpy as np
import pytest

from hosdetect import synth
from hosdetect.errors import ConfigError
from hosdetect.hardlimit import HardLimitSpec, LimitKind, SineInput


def test_tones_are_deterministic_per_seed():
    spec = synth.case_one()
    a = synth.gen_tones(spec, seed=4)
    assert np.array_equal(a, synth.gen_tones(spec, seed=4))
    assert not np.array_equal(a, synth.gen_tones(spec, seed=5))


def test_noiseless_tone_is_exact():
    spec = synth.ToneSpec([synth.Tone(0.5, amplitude=2.0, phase=0.3)], fs=5.0, length=100, noise_db=None)
    n = np.arange(100)
    assert np.allclose(synth.gen_tones(spec), 2.0 * np.cos(2 * math.pi * 0.5 * n / 5.0 + 0.3))


def test_phase_noise_variance():
    spec = synth.ToneSpec([synth.Tone(1.0)], fs=8.0, length=200000, noise_db=-20.0)
    x = synth.gen_tones(spec, seed=1)
    n = np.arange(spec.length)
    # E[cos(theta + w)] = cos(theta) exp(-var / 2)
    c = 2 * np.mean(x * np.cos(2 * math.pi * n / 8.0))
    assert c == pytest.approx(math.exp(-0.01 / 2), abs=3e-3)


def test_case_one_layout():
    spec = synth.case_one(phi3=math.pi / 2)
    f = [t.freq for t in spec.tones]
    assert f[2] == pytest.approx(f[0] + f[1])
    assert spec.tones[2].phase == pytest.approx(math.pi / 2)
    with pytest.raises(ConfigError):
        synth.case_one(randomize_sum=True)


def test_random_phase_constant_within_segment():
    spec = synth.ToneSpec([synth.Tone(1.0, mode=synth.PhaseMode.PER_SEGMENT_RANDOM)], fs=16.0,
                          length=64, noise_db=None, segment_length=16)
    x = synth.gen_tones(spec, seed=2)
    n = np.arange(64)
    ph = np.angle(np.exp(1j * np.arccos(np.clip(x, -1, 1))))
    # each segment is a pure cosine with its own phase
    for s in range(4):
        seg = x[16 * s: 16 * (s + 1)]
        z = np.sum(seg * np.exp(-2j * math.pi * n[:16] / 16.0))
        assert abs(z) == pytest.approx(8.0, rel=1e-9)
    assert ph.shape == (64,)


def test_tone_spec_validation():
    with pytest.raises(ConfigError):
        synth.ToneSpec([synth.Tone(3.0)], fs=5.0, length=10)
    with pytest.raises(ConfigError):
        synth.ToneSpec([synth.Tone(1.0)], fs=5.0, length=0)


def test_clipped_sine_bounds_and_noise():
    lim = HardLimitSpec(LimitKind.BILATERAL, a=0.5)
    x = synth.gen_clipped_sine(SineInput(1.0, 33.8), lim, 1000.0, 4096)
    assert x.max() == 0.5 and x.min() == -0.5
    y = synth.gen_clipped_sine(SineInput(1.0, 33.8), lim, 1000.0, 4096, seed=3, noise_db=-40.0)
    assert np.std(y - x) == pytest.approx(math.sqrt(0.5e-4), rel=0.05)
    with pytest.raises(ConfigError):
        synth.gen_clipped_sine(SineInput(1.0, 600.0), lim, 1000.0, 10)


def test_filter_response():
    spec = synth.FilterSpec(cutoff_hz=67.6, fs=1000.0)
    assert abs(spec.response(67.6)) == pytest.approx(1 / math.sqrt(2), rel=1e-9)
    assert abs(spec.response(0.0)) == pytest.approx(1.0)
    f = 20.0
    n = np.arange(20000)
    y = synth.apply_filter(np.sin(2 * math.pi * f * n / 1000.0), spec)
    amp = 2 * abs(np.mean(y[10000:] * np.exp(-2j * math.pi * f * n[10000:] / 1000.0)))
    assert amp == pytest.approx(abs(spec.response(f)), rel=1e-3)
    with pytest.raises(ConfigError):
        synth.FilterSpec(600.0, 1000.0)
    with pytest.raises(ConfigError):
        synth.FilterSpec(10.0, 1000.0, kind="butter")
