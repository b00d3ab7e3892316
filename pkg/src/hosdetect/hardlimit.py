"""Harmonic characterisation of bilateral and unilateral saturation.

Fourier coefficients follow the ``(1/pi) * integral over one period``
convention for every order, including n = 0.  The zeroth cosine coefficient
``An`` is therefore twice the DC level of the limiter output.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OutOfRange, UnsupportedOrder

MAX_CLOSED_FORM_ORDER = 7

HD3B_SUPREMUM = 1.0 / 3.0
HD2U_SUPREMUM = 4.0 / (3.0 * math.pi)


class LimitKind(str, enum.Enum):
    BILATERAL = "bilateral"
    UNILATERAL = "unilateral"


@dataclass(frozen=True)
class HardLimitSpec:
    """Saturation element.

    Bilateral clamps to ``[-a, a]``.  Unilateral clamps from above at
    ``A0 + a`` and passes everything below through.
    """

    kind: LimitKind
    a: float
    A0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LimitKind(self.kind))
        if not self.a > 0:
            raise DomainError(f"limit magnitude must be positive, got a={self.a}")
        if self.kind is LimitKind.BILATERAL and self.A0 != 0:
            raise DomainError("bilateral limits carry no offset (A0 must be 0)")

    @property
    def upper(self) -> float:
        return self.A0 + self.a

    @property
    def lower(self) -> float:
        return -self.a if self.kind is LimitKind.BILATERAL else -math.inf


@dataclass(frozen=True)
class SineInput:
    """``x(t) = A0 + A sin(2 pi f t)``."""

    A: float
    f: float = 1.0
    A0: float = 0.0

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"amplitude must be positive, got A={self.A}")
        if not self.f > 0:
            raise DomainError(f"frequency must be positive, got f={self.f}")


@dataclass(frozen=True)
class HarmonicCoefficients:
    n: int
    An: float
    Bn: float


def apply_limit(spec: HardLimitSpec, x):
    """Pass ``x`` (scalar or array) through the limiter."""
    if spec.kind is LimitKind.BILATERAL:
        out = np.clip(x, -spec.a, spec.a)
    else:
        out = np.minimum(x, spec.upper)
    return out if np.ndim(out) else float(out)


# --- closed forms -----------------------------------------------------------


def _bilateral_row(n: int, a: float, A: float) -> tuple[float, float]:
    r = a / A
    root = math.sqrt(max(0.0, 1.0 - r * r))
    phi = math.asin(r)
    if n % 2 == 0:
        return 0.0, 0.0
    if n == 1:
        b = (2 * a * root + 2 * A * phi) / math.pi
    elif n == 3:
        b = 4 * a * (1 - r * r) ** 1.5 / (3 * math.pi)
    elif n == 5:
        b = 4 * a * root * (8 * a**4 - 11 * a**2 * A**2 + 3 * A**4) / (15 * A**4 * math.pi)
    else:  # n == 7
        b = (
            48 * a * math.cos(7 * phi)
            + 28 * A * math.sin(6 * phi)
            - 21 * A * math.sin(8 * phi)
        ) / (84 * math.pi)
    return 0.0, b


def _unilateral_row(n: int, a: float, A: float, A0: float) -> tuple[float, float]:
    # `a` is the clip height above the sine's centre and may be negative here
    r = a / A
    root = math.sqrt(max(0.0, 1.0 - r * r))
    phi = math.asin(r)
    pi = math.pi
    if n == 0:
        return a + 2 * A0 - 2 / pi * root * A - 2 * a / pi * phi, 0.0
    if n == 1:
        return 0.0, (2 * a * root + A * pi + 2 * A * phi) / (2 * pi)
    if n == 2:
        return 2 * root * (A * A - a * a) / (3 * A * pi), 0.0
    if n == 3:
        return 0.0, 2 * a * (1 - r * r) ** 1.5 / (3 * pi)
    if n == 4:
        return 2 * root * (6 * a**4 - 7 * a**2 * A**2 + A**4) / (15 * A**3 * pi), 0.0
    if n == 5:
        return 0.0, 2 * a * (3 + 8 * r**4 - 11 * r**2) * root / (15 * pi)
    if n == 6:
        poly = -80 * a**6 + 128 * a**4 * A**2 - 51 * a**2 * A**4 + 3 * A**6
        return 2 * root * poly / (105 * A**5 * pi), 0.0
    # n == 7
    b = (
        48 * a * math.cos(7 * phi)
        + 28 * A * math.sin(6 * phi)
        - 21 * A * math.sin(8 * phi)
    ) / (168 * pi)
    return 0.0, b


def fourier_closed_form(spec: HardLimitSpec, inp: SineInput, n: int) -> HarmonicCoefficients:
    """Tabulated n-th harmonic of the limiter output for n <= 7.

    For the unilateral limiter the sine may sit on its own offset
    ``inp.A0``; the clip height is then measured from that centre.
    The bilateral closed forms only hold for a centred sine.
    """
    if n < 0:
        raise DomainError(f"harmonic order must be nonnegative, got {n}")
    if n > MAX_CLOSED_FORM_ORDER:
        raise UnsupportedOrder(
            f"closed forms stop at n={MAX_CLOSED_FORM_ORDER}; use fourier_quadrature for n={n}"
        )
    A = inp.A
    if spec.kind is LimitKind.BILATERAL:
        if inp.A0 != 0:
            raise DomainError("bilateral closed forms need a zero-offset sine; use quadrature")
        if A <= spec.a:
            return HarmonicCoefficients(n, 0.0, A if n == 1 else 0.0)
        An, Bn = _bilateral_row(n, spec.a, A)
        return HarmonicCoefficients(n, An, Bn)

    x0 = inp.A0
    h = spec.upper - x0
    if h >= A:
        # never reaches the limit
        if n == 0:
            return HarmonicCoefficients(0, 2 * x0, 0.0)
        return HarmonicCoefficients(n, 0.0, A if n == 1 else 0.0)
    if h <= -A:
        # pinned at the limit for the whole period
        return HarmonicCoefficients(n, 2 * spec.upper if n == 0 else 0.0, 0.0)
    An, Bn = _unilateral_row(n, h, A, x0)
    return HarmonicCoefficients(n, An, Bn)


# --- quadrature oracle ------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_SUBDIVISIONS = 64


def _breakpoints(spec: HardLimitSpec, inp: SineInput) -> np.ndarray:
    pts = [0.0, 2 * math.pi]
    for level in (spec.upper, spec.lower):
        if not math.isfinite(level):
            continue
        c = (level - inp.A0) / inp.A
        if -1.0 < c < 1.0:
            t = math.asin(c)
            pts.extend([t % (2 * math.pi), math.pi - t])
    return np.unique(np.array(pts))


def _integrate_periodic(spec: HardLimitSpec, inp: SineInput, weight) -> float:
    """Gauss-Legendre over each smooth piece of one period (theta = omega t)."""
    edges = _breakpoints(spec, inp)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        sub = np.linspace(lo, hi, _SUBDIVISIONS + 1)
        half = 0.5 * np.diff(sub)[:, None]
        mid = 0.5 * (sub[:-1] + sub[1:])[:, None]
        theta = mid + half * _GL_NODES[None, :]
        y = apply_limit(spec, inp.A0 + inp.A * np.sin(theta))
        total += float(np.sum(half * _GL_WEIGHTS[None, :] * y * weight(theta)))
    return total


def fourier_quadrature(spec: HardLimitSpec, inp: SineInput, n: int) -> HarmonicCoefficients:
    """Numerically integrated n-th harmonic of the limiter output (any order)."""
    if n < 0:
        raise DomainError(f"harmonic order must be nonnegative, got {n}")
    An = _integrate_periodic(spec, inp, lambda th: np.cos(n * th)) / math.pi
    Bn = _integrate_periodic(spec, inp, lambda th: np.sin(n * th)) / math.pi if n else 0.0
    return HarmonicCoefficients(n, An, Bn)


# --- distortion ratios and inversion ---------------------------------------


def hd3_bilateral(eta: float) -> float:
    """Third-to-first harmonic ratio B3/B1 of a bilaterally clipped sine."""
    if eta < 1:
        raise DomainError(f"saturation level must be >= 1, got {eta}")
    q = 1.0 - 1.0 / (eta * eta)
    root = math.sqrt(q)
    return 2.0 * q * root / (3.0 * (root + eta * math.asin(1.0 / eta)))


def hd2_unilateral(eta: float) -> float:
    """Second-to-first harmonic ratio A2/B1 of a unilaterally clipped sine."""
    if eta < 1:
        raise DomainError(f"saturation level must be >= 1, got {eta}")
    root = math.sqrt(1.0 - 1.0 / (eta * eta))
    num = 4.0 * root * (eta * eta - 1.0)
    den = 3.0 * eta * (2.0 * root + eta * math.pi + 2.0 * eta * math.asin(1.0 / eta))
    return num / den


_HD = {
    LimitKind.BILATERAL: (hd3_bilateral, HD3B_SUPREMUM),
    LimitKind.UNILATERAL: (hd2_unilateral, HD2U_SUPREMUM),
}


def distortion_ratio(kind: LimitKind, eta: float) -> float:
    return _HD[LimitKind(kind)][0](eta)


def invert_saturation(hd: float, kind: LimitKind, eta_max: float = 1e6) -> float:
    """Saturation level whose distortion ratio equals ``hd``.

    Bisection on [1, eta_max]; the ratio is monotone so the bracket always
    holds.  Iterates until the bracket collapses to floating-point
    resolution, which keeps the round trip tight even where the curve is
    nearly flat (large eta).
    """
    func, sup = _HD[LimitKind(kind)]
    if not 0 <= hd < sup:
        raise OutOfRange(f"distortion ratio {hd!r} outside [0, {sup:.6f}) for {LimitKind(kind).value}")
    if hd == 0:
        return 1.0
    lo, hi = 1.0, float(eta_max)
    if func(hi) < hd:
        raise OutOfRange(f"distortion ratio {hd!r} needs eta above {eta_max:g}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if func(mid) < hd:
            lo = mid
        else:
            hi = mid
    return lo if abs(func(lo) - hd) <= abs(func(hi) - hd) else hi


def describing_function(spec: HardLimitSpec, A: float, offset: float = 0.0) -> complex:
    """First-harmonic gain ``(Y1/A) exp(j phi1)`` for a sine of amplitude ``A``.

    ``phi1 = atan2(A1, B1)``, so a purely sine-phase fundamental gives a
    real gain.
    """
    if not A > 0:
        raise DomainError(f"amplitude must be positive, got {A}")
    inp = SineInput(A=A, A0=offset)
    try:
        c = fourier_closed_form(spec, inp, 1)
    except DomainError:
        c = fourier_quadrature(spec, inp, 1)
    Y1 = math.hypot(c.An, c.Bn)
    phi1 = math.atan2(c.An, c.Bn)
    return complex(Y1 / A * math.cos(phi1), Y1 / A * math.sin(phi1))
