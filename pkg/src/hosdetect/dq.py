"""Three-phase to dq0 conversion and initial-phase estimation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, RecordFormatError


@dataclass
class WaveformRecord:
    """Uniformly sampled three-phase record; ``samples`` has shape (3, L)."""

    dt: float
    samples: np.ndarray
    nominal_freq: float = 50.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[0] != 3:
            raise RecordFormatError(f"expected 3 channels, got shape {self.samples.shape}")
        if self.samples.shape[1] < 2:
            raise RecordFormatError("record needs at least 2 samples")
        if not self.dt > 0:
            raise RecordFormatError(f"sampling interval must be positive, got {self.dt}")

    def __len__(self):
        return self.samples.shape[1]

    @property
    def fs(self) -> float:
        return 1.0 / self.dt


@dataclass
class DqSignal:
    xd: np.ndarray
    xq: np.ndarray
    x0: np.ndarray
    theta0: float = 0.0
    omega: float = 2 * math.pi * 50.0
    dt: float = 1.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.xd)

    def axis(self, name: str) -> np.ndarray:
        return {"d": self.xd, "q": self.xq, "0": self.x0}[name]


def _angle(n: int, dt: float, f0: float) -> np.ndarray:
    return 2 * math.pi * f0 * dt * np.arange(n)


def positive_sequence(record: WaveformRecord) -> np.ndarray:
    """Complex space vector ``(2/3)(ia + alpha ib + alpha^2 ic)``."""
    alpha = np.exp(2j * math.pi / 3)
    ia, ib, ic = record.samples
    return (2.0 / 3.0) * (ia + alpha * ib + alpha * alpha * ic)


def estimate_theta0(record: WaveformRecord) -> float:
    """Phase of the fundamental positive-sequence component over whole cycles.

    With this angle the dq0 transform puts a balanced fundamental entirely on
    the d axis.  Sample index starts at 0.
    """
    per_cycle = 1.0 / (record.nominal_freq * record.dt)
    cycles = math.floor(len(record) / per_cycle + 1e-9)
    if cycles < 1:
        raise InsufficientData(
            f"need at least one fundamental cycle ({per_cycle:.1f} samples), got {len(record)}",
            step="theta0",
        )
    n = int(round(cycles * per_cycle))
    n = min(n, len(record))
    v = positive_sequence(record)[:n]
    c = np.mean(v * np.exp(-1j * _angle(n, record.dt, record.nominal_freq)))
    scale = np.max(np.abs(record.samples[:, :n]))
    if scale == 0 or abs(c) <= 1e-12 * scale:
        raise InsufficientData("no fundamental component present", step="theta0")
    theta = math.atan2(c.imag, c.real)
    return math.pi if theta == -math.pi else theta


def dq0_transform(record: WaveformRecord, theta0: float) -> DqSignal:
    """Amplitude-invariant Park transform at the nominal frequency."""
    omega = 2 * math.pi * record.nominal_freq
    th = _angle(len(record), record.dt, record.nominal_freq) + theta0
    shift = 2 * math.pi / 3
    ia, ib, ic = record.samples
    xd = (2.0 / 3.0) * (np.cos(th) * ia + np.cos(th - shift) * ib + np.cos(th + shift) * ic)
    xq = -(2.0 / 3.0) * (np.sin(th) * ia + np.sin(th - shift) * ib + np.sin(th + shift) * ic)
    x0 = (ia + ib + ic) / 3.0
    return DqSignal(xd, xq, x0, theta0=theta0, omega=omega, dt=record.dt, meta=dict(record.meta))


def inverse_dq0(xd, xq, x0, dt: float, nominal_freq: float, theta0: float = 0.0) -> WaveformRecord:
    """Rebuild phase currents from dq0 channels (inverse of ``dq0_transform``)."""
    xd = np.asarray(xd, dtype=float)
    xq = np.asarray(xq, dtype=float)
    x0 = np.zeros_like(xd) if x0 is None else np.asarray(x0, dtype=float)
    th = _angle(len(xd), dt, nominal_freq) + theta0
    shift = 2 * math.pi / 3
    phases = [
        np.cos(th - k) * xd - np.sin(th - k) * xq + x0 for k in (0.0, shift, -shift)
    ]
    return WaveformRecord(dt=dt, samples=np.vstack(phases), nominal_freq=nominal_freq)


def srf_pll(record: WaveformRecord, kp: float = 500.0, ki: float = 900.0) -> np.ndarray:
    """Synchronous-reference-frame PLL; returns the tracked angle per sample.

    Streaming-style alternative to :func:`estimate_theta0`.  The q-axis
    component of the normalised space vector drives a PI that corrects the
    frequency around nominal.
    """
    v = positive_sequence(record)
    mag = np.abs(v)
    ref = np.max(mag) if np.max(mag) > 0 else 1.0
    w0 = 2 * math.pi * record.nominal_freq
    dt = record.dt
    theta = np.empty(len(record))
    th = 0.0
    integ = 0.0
    for k in range(len(record)):
        theta[k] = th
        vq = (v[k] * np.exp(-1j * th)).imag / ref
        integ += ki * vq * dt
        th += (w0 + kp * vq + integ) * dt
    return theta
