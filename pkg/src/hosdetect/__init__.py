"""Detection and classification of hard-limit nonlinearities in converter
control loops from waveform records, using bicoherence and tricoherence."""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0+local"

from ._accel import BACKEND
from .detect import Classification, DetectionConfig, DetectionReport, analyze, analyze_channel
from .dq import DqSignal, WaveformRecord, dq0_transform, estimate_theta0
from .errors import HosDetectError
from .hardlimit import (
    HardLimitSpec,
    LimitKind,
    SineInput,
    describing_function,
    fourier_closed_form,
    fourier_quadrature,
    invert_saturation,
)
from .hos import SegmentConfig, compute_spectra

__all__ = [
    "BACKEND",
    "Classification",
    "DetectionConfig",
    "DetectionReport",
    "DqSignal",
    "HardLimitSpec",
    "HosDetectError",
    "LimitKind",
    "SegmentConfig",
    "SineInput",
    "WaveformRecord",
    "analyze",
    "analyze_channel",
    "compute_spectra",
    "describing_function",
    "dq0_transform",
    "estimate_theta0",
    "fourier_closed_form",
    "fourier_quadrature",
    "invert_saturation",
]
