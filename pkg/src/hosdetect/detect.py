"""Peak extraction, classification and saturation-level estimation."""
from __future__ import annotations

import enum
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from . import hos
from .dq import DqSignal, WaveformRecord, dq0_transform, estimate_theta0
from .errors import HosDetectError, InconsistentEvidence, NoDominantTone, OutOfRange
from .hardlimit import LimitKind, invert_saturation

log = logging.getLogger(__name__)

LOBE_HALFWIDTH = 2


class Classification(str, enum.Enum):
    UNILATERAL = "UnilateralSaturation"
    BILATERAL = "BilateralSaturation"
    NONE = "NoHardLimitNonlinearity"


@dataclass(frozen=True)
class DetectionConfig:
    sigma_b: float = 0.3
    harmonic_tol: float = 1.0
    # 0 disables; coherent leakage forms broad plateaus around true peaks
    min_prominence: float = 0.0
    # highest harmonic index per coordinate that counts as evidence
    max_harmonic: int = 3
    # a coupled frequency must carry this multiple of the median bin power
    line_ratio: float = 10.0
    # AC rms below this fraction of the reference scale counts as a quiet channel
    quiet_rel: float = 1e-9

    def __post_init__(self):
        if not 0 < self.sigma_b < 1:
            raise ValueError(f"sigma_b must lie in (0, 1), got {self.sigma_b}")

    def to_dict(self) -> dict:
        return {
            "sigma_b": self.sigma_b,
            "harmonic_tol": self.harmonic_tol,
            "min_prominence": self.min_prominence,
            "max_harmonic": self.max_harmonic,
            "line_ratio": self.line_ratio,
            "quiet_rel": self.quiet_rel,
        }


@dataclass(frozen=True)
class Peak:
    bins: tuple
    freqs: tuple
    value: float
    harmonics: Optional[tuple] = None  # harmonic indices when on the grid

    @property
    def on_grid(self) -> bool:
        return self.harmonics is not None

    def to_dict(self) -> dict:
        return {
            "bins": list(self.bins),
            "freqs_hz": [float(f) for f in self.freqs],
            "value_raw": float(self.value),
            "value": float(min(max(self.value, 0.0), 1.0)),
            "harmonics": list(self.harmonics) if self.harmonics else None,
        }


@dataclass
class PeakList:
    order: str
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def coords(self) -> set:
        return {p.bins for p in self.entries}

    def on_grid(self) -> list:
        return [p for p in self.entries if p.on_grid]

    def near(self, bins, tol: float = 1.0) -> Optional[Peak]:
        for p in self.entries:
            if all(abs(a - b) <= tol for a, b in zip(sorted(p.bins), sorted(bins))):
                return p
        return None


def _full_map(cmap: hos.CoherenceMap) -> np.ndarray:
    return np.where(cmap.mask, cmap.raw, 0.0)


def find_peaks(cmap: hos.CoherenceMap, cfg: DetectionConfig = DetectionConfig()) -> PeakList:
    """Local maxima above ``sigma_b`` on the canonical region (sorted coordinates).

    Neighbourhood is the 8- (2-D) or 26- (3-D) connected set on the
    symmetric map.  A cell counts as a maximum when no neighbour is larger,
    so ties with its own mirror images do not suppress it.  Plateaus are
    rejected by requiring ``min_prominence`` over the neighbourhood median.
    """
    full = _full_map(cmap)
    ndim = full.ndim
    footprint = np.ones((3,) * ndim, dtype=bool)
    footprint[(1,) * ndim] = False
    neigh_max = ndimage.maximum_filter(full, footprint=footprint, mode="constant", cval=0.0)
    cand = (full >= cfg.sigma_b) & (full >= neigh_max) & cmap.mask
    idx = np.argwhere(cand)
    if idx.size:
        idx = idx[np.all(np.diff(idx, axis=1) >= 0, axis=1)]
    padded = np.pad(full, 1)
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=ndim) if any(o)]
    entries = []
    for cell in idx:
        vals = [padded[tuple(cell + 1 + np.array(o))] for o in offsets]
        v = float(full[tuple(cell)])
        if v - float(np.median(vals)) < cfg.min_prominence:
            continue
        bins = tuple(int(c) for c in cell)
        entries.append(Peak(bins, tuple(b * cmap.df for b in bins), v))
    entries.sort(key=lambda p: (-p.value, p.bins))
    return PeakList(cmap.order, entries)


def _harmonic_indices(bins, f0_bins: float, tol: float, max_h: int) -> Optional[tuple]:
    out = []
    for b in bins:
        i = int(round(b / f0_bins))
        if i < 1 or i > max_h or abs(b - i * f0_bins) > tol:
            return None
        out.append(i)
    return tuple(out)


def line_present(P: np.ndarray, f_bins: float, tol: float, ratio: float) -> bool:
    """True when some bin within ``tol`` of ``f_bins`` stands ``ratio`` x above the median."""
    lo = max(1, int(math.ceil(f_bins - tol)))
    hi = min(P.size - 1, int(math.floor(f_bins + tol)))
    if hi < lo:
        return False
    return bool(np.max(P[lo : hi + 1]) >= ratio * np.median(P[1:]))


def tag_harmonics(peaks: PeakList, f0: float, df: float, cfg: DetectionConfig,
                  P: Optional[np.ndarray] = None) -> PeakList:
    """Attach harmonic indices to peaks lying on the (i f0, j f0[, k f0]) grid.

    With a power spectrum ``P``, a grid peak only keeps its indices when every
    harmonic it couples, the sum frequency included, is a spectral line.
    """
    f0_bins = f0 / df
    tagged = []
    for p in peaks:
        h = _harmonic_indices(p.bins, f0_bins, cfg.harmonic_tol, cfg.max_harmonic)
        if h is not None and P is not None:
            needed = set(h) | {sum(h)}
            if not all(line_present(P, i * f0_bins, cfg.harmonic_tol + 1, cfg.line_ratio)
                       for i in needed):
                h = None
        tagged.append(Peak(p.bins, p.freqs, p.value, h))
    return PeakList(peaks.order, tagged)


def fundamental_frequency(P: np.ndarray, df: float = 1.0) -> float:
    """Strongest non-DC bin, refined by a parabola through the log powers."""
    P = np.asarray(P, dtype=float)
    body = P[1:]
    if body.size < 3 or not np.max(body) > 10 * np.median(body):
        raise NoDominantTone("no bin exceeds 10x the median power", step="fundamental")
    k = int(np.argmax(body)) + 1
    delta = 0.0
    if 1 < k < P.size - 1 and min(P[k - 1], P[k + 1]) > 0:
        a, b, c = np.log(P[k - 1]), np.log(P[k]), np.log(P[k + 1])
        den = a - 2 * b + c
        if den < 0:
            delta = 0.5 * (a - c) / den
    return (k + delta) * df


def classify(bic_peaks: PeakList, tric_peaks: PeakList, f0: Optional[float] = None,
             cfg: DetectionConfig = DetectionConfig(), df: float = 1.0,
             strict: bool = False, P: Optional[np.ndarray] = None) -> Classification:
    """Decision table: bicoherence first, then tricoherence.

    With ``f0`` given, peaks are first gated to the harmonic grid; otherwise
    peaks are taken as already tagged.  Bicoherence evidence without
    tricoherence support is classified unilateral with a warning (or raises
    when ``strict``).
    """
    if f0 is not None:
        bic_peaks = tag_harmonics(bic_peaks, f0, df, cfg, P)
        tric_peaks = tag_harmonics(tric_peaks, f0, df, cfg, P)
    bic_ev = bic_peaks.on_grid()
    tric_ev = tric_peaks.on_grid()
    if bic_ev and tric_ev:
        return Classification.UNILATERAL
    if bic_ev:
        msg = "bicoherence peaks without tricoherence support"
        if strict:
            raise InconsistentEvidence(msg, step="classify")
        warnings.warn(msg)
        return Classification.UNILATERAL
    if any(all(i % 2 for i in p.harmonics) for p in tric_ev):
        return Classification.BILATERAL
    return Classification.NONE


def harmonic_power(P: np.ndarray, f_hz: float, df: float, halfwidth: int = LOBE_HALFWIDTH) -> float:
    """Power summed over the window main lobe around ``f_hz``."""
    k = int(round(f_hz / df))
    if k - halfwidth < 1 or k + halfwidth >= P.size:
        raise OutOfRange(f"harmonic at {f_hz:.3f} Hz falls outside the spectrum", step="saturation")
    return float(np.sum(P[k - halfwidth : k + halfwidth + 1]))


def harmonic_amplitude(P: np.ndarray, f_hz: float, df: float, window: str = "hann") -> float:
    """Sinusoid amplitude behind a spectral line (window power gain removed)."""
    N = 2 * (P.size - 1)
    w = hos.window(window, N)
    gain = float(np.sum(w * w)) / N
    return 2.0 * math.sqrt(harmonic_power(P, f_hz, df) / gain)


def estimate_saturation(P: np.ndarray, f0: float, classification: Classification,
                        df: float = 1.0) -> float:
    """Invert the measured HD2 (unilateral) or HD3 (bilateral) ratio to eta_sat."""
    classification = Classification(classification)
    if classification is Classification.NONE:
        raise ValueError("no saturation level for an unclassified record")
    order, kind = (2, LimitKind.UNILATERAL) if classification is Classification.UNILATERAL \
        else (3, LimitKind.BILATERAL)
    hd = math.sqrt(harmonic_power(P, order * f0, df) / harmonic_power(P, f0, df))
    return invert_saturation(hd, kind)


@dataclass
class DetectionReport:
    axis: str
    classification: Classification
    fundamental_hz: Optional[float] = None
    eta_sat: Optional[float] = None
    bic_peaks: PeakList = field(default_factory=lambda: PeakList("bi"))
    tric_peaks: PeakList = field(default_factory=lambda: PeakList("tri"))
    harmonic_amplitudes: dict = field(default_factory=dict)
    segment_config: Optional[hos.SegmentConfig] = None
    notes: list = field(default_factory=list)
    spectra: Optional[hos.SpectrumSet] = field(default=None, repr=False)

    def to_dict(self, max_peaks: int = 50) -> dict:
        return {
            "axis": self.axis,
            "classification": self.classification.value,
            "fundamental_hz": self.fundamental_hz,
            "eta_sat": self.eta_sat,
            "bic_peaks": [p.to_dict() for p in self.bic_peaks.entries[:max_peaks]],
            "tric_peaks": [p.to_dict() for p in self.tric_peaks.entries[:max_peaks]],
            "bic_peak_count": len(self.bic_peaks),
            "tric_peak_count": len(self.tric_peaks),
            "harmonic_amplitudes": dict(self.harmonic_amplitudes),
            "segment_config": self.segment_config.to_dict() if self.segment_config else None,
            "notes": list(self.notes),
        }


def analyze_channel(x, dt: float, seg: Optional[hos.SegmentConfig] = None,
                    det: DetectionConfig = DetectionConfig(), axis: str = "d",
                    keep_spectra: bool = False, ref_scale: Optional[float] = None) -> DetectionReport:
    """Segmentation through saturation estimate on one channel.

    The record mean is removed before segmentation so that the operating
    point of a dq channel does not leak through the window into the lowest
    bins.  Coherences ignore scale, so rounding residue on an otherwise empty
    axis would look fully coupled; a channel whose AC rms is below
    ``det.quiet_rel * ref_scale`` is reported quiet instead.  ``ref_scale``
    defaults to the rms of ``x`` itself, mean included.
    """
    x = np.asarray(x, dtype=float)
    if ref_scale is None:
        ref_scale = float(np.sqrt(np.mean(x * x)))
    x = x - x.mean()
    if seg is None:
        seg = hos.default_segment_config(x, dt)
    report = DetectionReport(axis=axis, classification=Classification.NONE, segment_config=seg)
    if seg.M < 8:
        report.notes.append(f"only {seg.M} segments; coherence estimates are coarse")

    if not np.sqrt(np.mean(x * x)) > det.quiet_rel * ref_scale:
        report.notes.append("quiet channel")
        return report
    S = hos.segment_window_fft(x, seg, dt)
    P = hos.power_spectrum(S)
    try:
        f0 = fundamental_frequency(P, S.df)
    except NoDominantTone as exc:
        report.notes.append(str(exc))
        if keep_spectra:
            report.spectra = hos.SpectrumSet(P, None, None, S.df, seg)
        return report
    report.fundamental_hz = f0

    B = hos.bispectrum(S)
    T = hos.trispectrum(S, seg)
    bic = hos.bicoherence(P, B, S.df)
    tric = hos.tricoherence(P, T, seg.half, S.df)
    report.bic_peaks = tag_harmonics(find_peaks(bic, det), f0, S.df, det, P)
    report.tric_peaks = tag_harmonics(find_peaks(tric, det), f0, S.df, det, P)
    if keep_spectra:
        report.spectra = hos.SpectrumSet(P, B, T, S.df, seg, bic=bic, tric=tric)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report.classification = classify(report.bic_peaks, report.tric_peaks, cfg=det)
    report.notes.extend(str(w.message) for w in caught)

    amps = {}
    for n in (1, 2, 3):
        try:
            amps[f"h{n}"] = harmonic_amplitude(P, n * f0, S.df, seg.window)
        except OutOfRange:
            pass
    report.harmonic_amplitudes = amps
    if report.classification is not Classification.NONE:
        try:
            report.eta_sat = estimate_saturation(P, f0, report.classification, S.df)
        except OutOfRange as exc:
            report.notes.append(f"saturation level not recoverable: {exc}")
    log.info("axis %s: %s (f0=%.4g Hz)", axis, report.classification.value, f0)
    return report


Signal = Union[WaveformRecord, DqSignal]


def to_dq(record: Signal) -> DqSignal:
    if isinstance(record, DqSignal):
        return record
    try:
        theta0 = estimate_theta0(record)
    except HosDetectError:
        theta0 = 0.0
    return dq0_transform(record, theta0)


def analyze(record: Signal, seg: Optional[hos.SegmentConfig] = None,
            det: DetectionConfig = DetectionConfig(), axes=("d", "q"),
            keep_spectra: bool = False) -> tuple:
    """Full pipeline on the d axis and then the q axis."""
    dq = to_dq(record)
    scale = max(float(np.sqrt(np.mean(dq.axis(a) ** 2))) for a in ("d", "q"))
    reports = []
    for axis in axes:
        try:
            reports.append(analyze_channel(dq.axis(axis), dq.dt, seg, det, axis, keep_spectra,
                                           ref_scale=scale))
        except HosDetectError as exc:
            if exc.step is None:
                exc.step = f"axis {axis}"
            raise
    return tuple(reports)
