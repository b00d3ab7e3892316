import math

import numpy as np
import pytest

from hosdetect import detect, hos, synth
from hosdetect.errors import InconsistentEvidence, NoDominantTone
from hosdetect.hardlimit import HardLimitSpec, LimitKind, SineInput

FS, F, L = 1000.0, 33.8, 32768


def clipped(kind, eta, seed=1, length=L):
    return synth.gen_clipped_sine(SineInput(1.0, F), HardLimitSpec(kind, 1.0 / eta), FS, length,
                                  seed=seed, noise_db=-40.0)


@pytest.fixture(scope="module")
def reports():
    out = {}
    for name, x in [("uni", clipped("unilateral", 2.0)), ("bi", clipped("bilateral", 2.0)),
                    ("bi5", clipped("bilateral", 5.0)), ("sine", clipped("bilateral", 0.2))]:
        out[name] = detect.analyze_channel(x, 1 / FS, keep_spectra=True)
    return out


def test_unilateral(reports):
    r = reports["uni"]
    assert r.classification is detect.Classification.UNILATERAL
    assert r.eta_sat == pytest.approx(2.0, rel=0.05)
    assert r.fundamental_hz == pytest.approx(F, abs=0.5)
    assert any(p.harmonics == (1, 1) and p.value >= 0.9 for p in r.bic_peaks)
    assert any(p.harmonics == (1, 1, 1) and p.value >= 0.9 for p in r.tric_peaks)


def test_bilateral(reports):
    for key, eta in (("bi", 2.0), ("bi5", 5.0)):
        r = reports[key]
        assert r.classification is detect.Classification.BILATERAL
        assert r.eta_sat == pytest.approx(eta, rel=0.05)
        assert not r.bic_peaks.on_grid()
        assert any(p.harmonics == (1, 1, 3) for p in r.tric_peaks)


def test_pure_sine(reports):
    r = reports["sine"]
    assert r.classification is detect.Classification.NONE
    assert r.eta_sat is None


def test_report_serialises(reports):
    d = reports["uni"].to_dict(max_peaks=3)
    assert d["classification"] == "UnilateralSaturation"
    assert len(d["bic_peaks"]) <= 3 and d["bic_peak_count"] >= len(d["bic_peaks"])
    assert d["segment_config"]["N"] == 256


def test_noise_and_quiet_channels():
    r = detect.analyze_channel(np.random.default_rng(0).normal(size=8192), 1.0)
    assert r.classification is detect.Classification.NONE
    q = detect.analyze_channel(np.full(4096, 2.5), 1e-3)
    assert q.classification is detect.Classification.NONE and "quiet channel" in q.notes
    with pytest.raises(NoDominantTone):
        detect.fundamental_frequency(np.ones(64))


def test_find_peaks_canonical_and_thresholded():
    raw = np.zeros((9, 9))
    raw[2, 3] = raw[3, 2] = 0.8
    raw[1, 1] = 0.2
    cmap = hos.CoherenceMap("bi", raw, hos.bi_domain(8), 1.0)
    peaks = detect.find_peaks(cmap)
    assert peaks.coords() == {(2, 3)}
    assert peaks.near((3, 2)).value == 0.8


def test_harmonic_tagging_needs_lines():
    P = np.full(65, 1e-6)
    P[[10, 20]] = 1.0
    peaks = detect.PeakList("bi", [detect.Peak((10, 10), (10.0, 10.0), 0.95),
                                   detect.Peak((10, 11), (10.0, 11.0), 0.95)])
    cfg = detect.DetectionConfig(harmonic_tol=0.5)
    tagged = detect.tag_harmonics(peaks, 10.0, 1.0, cfg, P)
    assert tagged.entries[0].harmonics == (1, 1)
    assert tagged.entries[1].harmonics is None
    P[20] = 1e-6
    assert detect.tag_harmonics(peaks, 10.0, 1.0, cfg, P).on_grid() == []


def test_inconsistent_evidence():
    bic = detect.PeakList("bi", [detect.Peak((5, 5), (5.0, 5.0), 0.9, (1, 1))])
    tric = detect.PeakList("tri")
    with pytest.warns(UserWarning):
        assert detect.classify(bic, tric) is detect.Classification.UNILATERAL
    with pytest.raises(InconsistentEvidence):
        detect.classify(bic, tric, strict=True)
    even = detect.PeakList("tri", [detect.Peak((5, 5, 10), (5, 5, 10), 0.9, (1, 1, 2))])
    assert detect.classify(detect.PeakList("bi"), even) is detect.Classification.NONE


def test_estimate_saturation_from_pure_lines():
    # windowed spectrum of an exact clipped sine at an integer bin
    N, M = 256, 32
    n = np.arange(N * M)
    lim = HardLimitSpec(LimitKind.UNILATERAL, a=0.5)
    x = np.minimum(np.sin(2 * math.pi * 8 * n / N), lim.upper)
    cfg = hos.SegmentConfig(M=M, N=N)
    P = hos.power_spectrum(hos.segment_window_fft(x - x.mean(), cfg))
    eta = detect.estimate_saturation(P, 8.0, detect.Classification.UNILATERAL, 1.0)
    assert eta == pytest.approx(2.0, rel=1e-2)  # aliased high harmonics
    with pytest.raises(ValueError):
        detect.estimate_saturation(P, 8.0, detect.Classification.NONE, 1.0)


def test_analyze_three_phase_routes_axes():
    fs = 1000.0
    t = np.arange(8192) / fs
    xd = 1.0 + 0.2 * np.minimum(np.sin(2 * math.pi * 33.8 * t), 0.5)
    from hosdetect.dq import inverse_dq0
    rec = inverse_dq0(xd, np.zeros_like(xd), None, 1 / fs, 50.0, 0.4)
    d, q = detect.analyze(rec)
    assert d.axis == "d" and q.axis == "q"
    assert d.classification is detect.Classification.UNILATERAL
    assert q.classification is detect.Classification.NONE
