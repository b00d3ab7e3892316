"""Reduced averaged-dq simulator of a grid-side VSC control loop.

The model keeps what is needed to make a hard limit bind and sustain an
oscillation: the RL filter per axis with ideal decoupling, inner current
PIs, an outer DC-voltage PI driving the d-axis reference, an outer
reactive-power PI driving the q-axis reference, and a linearised DC link.
The PLL is ideal and PWM dynamics are ignored.

Limiter sites, in evaluation order: ``d_outer``, ``q_outer``, ``d_inner``,
``q_inner``.  State vector: ``[id, iq, vdc, xi_dc, xi_q, xi_id, xi_iq]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import optimize

from ._accel import njit
from .dq import WaveformRecord, inverse_dq0
from .errors import ConfigError, NoLimitCycle, NumericalDivergence
from .hardlimit import HardLimitSpec, LimitKind, describing_function

SITES = ("d_outer", "q_outer", "d_inner", "q_inner")
STATE_NAMES = ("id", "iq", "vdc", "xi_dc", "xi_q", "xi_id", "xi_iq")
N_STATE = len(STATE_NAMES)

# gain-vector layout shared with the stepping kernel
_G_KP_DC, _G_KI_DC, _G_KP_Q, _G_KI_Q, _G_KP_I, _G_KI_I = range(6)
_G_VREF, _G_QREF, _G_SBASE, _G_IBASE, _G_VD0 = range(6, 11)
_N_GAINS = 11


@dataclass(frozen=True)
class VscLoopSpec:
    """Parameters of the reduced loop.  Units are SI.

    The reactive-power PI works in per unit of ``S_base``; its output is
    scaled back to amperes by the base current ``S_base / (1.5 v_d0)``.
    """

    R: float = 0.001
    L: float = 0.35e-3
    Rg: float = 0.005
    Lg: float = 0.4e-3
    C: float = 0.2
    omega0: float = 2 * math.pi * 50.0
    V_grid_ll: float = 690.0
    Gi: tuple[float, float] = (0.012, 12.5)
    Gdc: tuple[float, float] = (9.0, 500.0)
    Gq: tuple[float, float] = (0.3, 50.28)
    limits: Mapping[str, HardLimitSpec] = field(default_factory=dict)
    dt_sim: float = 50e-6
    P: float = 0.34e6
    vdc_ref: float = 1100.0
    Q_ref: float = 0.0
    S_base: float = 1.5e6
    delay_steps: int = 0
    # divergence bound, as a multiple of the base current / DC reference
    bound_factor: float = 50.0

    def __post_init__(self):
        for name in ("R", "L", "Rg", "Lg", "C", "omega0", "V_grid_ll", "dt_sim", "vdc_ref", "S_base"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for site in self.limits:
            if site not in SITES:
                raise ConfigError(f"unknown limiter site {site!r}; expected one of {SITES}")
        if self.delay_steps not in (0, 1):
            raise ConfigError("delay_steps must be 0 or 1")
        for name in ("Gi", "Gdc", "Gq"):
            kp, ki = getattr(self, name)
            if kp < 0 or ki < 0:
                raise ConfigError(f"{name} gains must be non-negative")

    # -- operating point ------------------------------------------------------

    @property
    def v_grid(self) -> float:
        """Peak phase voltage of the grid source."""
        return self.V_grid_ll * math.sqrt(2.0 / 3.0)

    def operating_point(self) -> dict:
        """PCC voltage and currents in the PCC-aligned frame for (P, Q_ref)."""
        zg = complex(self.Rg, self.omega0 * self.Lg)

        def mismatch(vd):
            i = complex(self.P, self.Q_ref).conjugate() / (1.5 * vd)
            return abs(vd - zg * i) - self.v_grid

        vd = optimize.brentq(mismatch, 0.3 * self.v_grid, 3.0 * self.v_grid, xtol=1e-12)
        i = complex(self.P, self.Q_ref).conjugate() / (1.5 * vd)
        return {"vd0": vd, "id0": i.real, "iq0": i.imag}

    @property
    def base_current(self) -> float:
        return self.S_base / (1.5 * self.operating_point()["vd0"])

    # -- linear model ---------------------------------------------------------

    def gains_vector(self, vd0: Optional[float] = None) -> np.ndarray:
        vd0 = self.operating_point()["vd0"] if vd0 is None else vd0
        g = np.zeros(_N_GAINS)
        g[_G_KP_DC], g[_G_KI_DC] = self.Gdc
        g[_G_KP_Q], g[_G_KI_Q] = self.Gq
        g[_G_KP_I], g[_G_KI_I] = self.Gi
        g[_G_VREF] = self.vdc_ref
        g[_G_QREF] = self.Q_ref
        g[_G_SBASE] = self.S_base
        g[_G_IBASE] = self.S_base / (1.5 * vd0)
        g[_G_VD0] = vd0
        return g

    def open_matrices(self, vd0: Optional[float] = None,
                      vdc0: Optional[float] = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``x' = A x + B u + c`` with ``u`` the four limiter outputs.

        ``vd0`` and ``vdc0`` fix the linearisation point; they default to
        this spec's own operating point.
        """
        vd0 = self.operating_point()["vd0"] if vd0 is None else vd0
        vdc0 = self.vdc_ref if vdc0 is None else vdc0
        A = np.zeros((N_STATE, N_STATE))
        B = np.zeros((N_STATE, 4))
        c = np.zeros(N_STATE)
        A[0, 0] = A[1, 1] = -self.R / self.L
        B[0, 2] = B[1, 3] = 1.0 / self.L
        A[2, 0] = -1.5 * vd0 / (self.C * vdc0)
        c[2] = self.P / (self.C * vdc0)
        A[3, 2] = 1.0
        c[3] = -self.vdc_ref
        A[4, 1] = -1.5 * vd0 / self.S_base
        c[4] = -self.Q_ref / self.S_base
        A[5, 0] = -1.0
        B[5, 0] = 1.0
        A[6, 1] = -1.0
        B[6, 1] = 1.0
        return A, B, c

    def closed_loop_matrix(self) -> np.ndarray:
        """State matrix with every limiter transparent."""
        A, B, _ = self.open_matrices()
        g = self.gains_vector()
        # u = K x (affine constants dropped)
        K = np.zeros((4, N_STATE))
        K[0, 2] = g[_G_KP_DC]
        K[0, 3] = g[_G_KI_DC]
        K[1, 1] = -g[_G_IBASE] * g[_G_KP_Q] * 1.5 * g[_G_VD0] / g[_G_SBASE]
        K[1, 4] = g[_G_IBASE] * g[_G_KI_Q]
        K[2] = g[_G_KP_I] * K[0]
        K[2, 0] -= g[_G_KP_I]
        K[2, 5] += g[_G_KI_I]
        K[3] = g[_G_KP_I] * K[1]
        K[3, 1] -= g[_G_KP_I]
        K[3, 6] += g[_G_KI_I]
        return A + B @ K

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.closed_loop_matrix())

    def equilibrium(self) -> np.ndarray:
        """Initial state at which every derivative vanishes (limiters transparent)."""
        op = self.operating_point()
        id0, iq0 = op["id0"], op["iq0"]
        kp_dc, ki_dc = self.Gdc
        kp_q, ki_q = self.Gq
        kp_i, ki_i = self.Gi
        ib = self.base_current
        x = np.zeros(N_STATE)
        x[0], x[1], x[2] = id0, iq0, self.vdc_ref
        x[3] = id0 / ki_dc if ki_dc else 0.0
        x[4] = iq0 / (ib * ki_q) if ki_q else 0.0
        x[5] = self.R * id0 / ki_i if ki_i else 0.0
        x[6] = self.R * iq0 / ki_i if ki_i else 0.0
        return x

    def check_step(self) -> float:
        """``dt_sim`` times the fastest closed-loop eigenvalue; must stay below 0.1."""
        r = self.dt_sim * float(np.max(np.abs(self.eigenvalues())))
        if r >= 0.1:
            raise ConfigError(f"dt_sim={self.dt_sim} too coarse: dt*|lambda_max|={r:.3g}")
        return r

    def limiter_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(4, -np.inf)
        hi = np.full(4, np.inf)
        for k, site in enumerate(SITES):
            spec = self.limits.get(site)
            if spec is not None:
                lo[k], hi[k] = spec.lower, spec.upper
        return lo, hi

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "R", "L", "Rg", "Lg", "C", "omega0", "V_grid_ll", "dt_sim", "P",
            "vdc_ref", "Q_ref", "S_base", "delay_steps", "bound_factor")}
        d["Gi"], d["Gdc"], d["Gq"] = list(self.Gi), list(self.Gdc), list(self.Gq)
        d["limits"] = {s: {"kind": v.kind.value, "a": v.a, "A0": v.A0} for s, v in self.limits.items()}
        return d


@dataclass(frozen=True)
class Event:
    """Parameter change applied at time ``t``; ``changes`` maps VscLoopSpec fields to values."""

    t: float
    changes: Mapping[str, object]


@dataclass(frozen=True)
class Probe:
    """Additive sine injected after the limiter at ``site``."""

    site: str
    amplitude: float
    freq: float

    def __post_init__(self):
        if self.site not in SITES:
            raise ConfigError(f"unknown probe site {self.site!r}")


# --- stepping kernel ----------------------------------------------------------


@njit
def _run_block(x, Phi, Gam, c_dt, g, lo, hi, pamp, pfreq, t0, dt, nsteps, dec, k0,
               out, rec, bound, delay, uprev):
    """Advance ``nsteps``; store every ``dec``-th global step into ``out``.

    Returns ``(next record index, step index of divergence or -1)``.
    ``out`` rows: t, id, iq, vdc, z[0..3], u[0..3].
    """
    n = x.shape[0]
    z = np.zeros(4)
    u = np.zeros(4)
    xn = np.zeros(n)
    nrec = out.shape[1]
    for s in range(nsteps):
        t = t0 + s * dt
        z[0] = g[0] * (x[2] - g[6]) + g[1] * x[3]
        u[0] = min(max(z[0], lo[0]), hi[0]) + pamp[0] * math.sin(2 * math.pi * pfreq[0] * t)
        eq = (-1.5 * g[10] * x[1] - g[7]) / g[8]
        z[1] = g[9] * (g[2] * eq + g[3] * x[4])
        u[1] = min(max(z[1], lo[1]), hi[1]) + pamp[1] * math.sin(2 * math.pi * pfreq[1] * t)
        z[2] = g[4] * (u[0] - x[0]) + g[5] * x[5]
        z[3] = g[4] * (u[1] - x[1]) + g[5] * x[6]
        for j in range(2, 4):
            u[j] = min(max(z[j], lo[j]), hi[j]) + pamp[j] * math.sin(2 * math.pi * pfreq[j] * t)
        if (k0 + s) % dec == 0 and rec < nrec:
            out[0, rec] = t
            out[1, rec] = x[0]
            out[2, rec] = x[1]
            out[3, rec] = x[2]
            for j in range(4):
                out[4 + j, rec] = z[j]
                out[8 + j, rec] = u[j]
            rec += 1
        ue2 = u[2]
        ue3 = u[3]
        if delay > 0:
            ue2 = uprev[2]
            ue3 = uprev[3]
            uprev[2] = u[2]
            uprev[3] = u[3]
        for i in range(n):
            acc = c_dt[i] + Gam[i, 0] * u[0] + Gam[i, 1] * u[1] + Gam[i, 2] * ue2 + Gam[i, 3] * ue3
            for j in range(n):
                acc += Phi[i, j] * x[j]
            xn[i] = acc
        for i in range(n):
            x[i] = xn[i]
            if not abs(x[i]) < bound:
                return rec, s
    return rec, -1


def _discretise(A: np.ndarray, B: np.ndarray, c: np.ndarray, h: float):
    """Trapezoidal rule for the linear part with inputs held over the step."""
    I = np.eye(A.shape[0])
    lhs = I - 0.5 * h * A
    Phi = np.linalg.solve(lhs, I + 0.5 * h * A)
    Gam = np.linalg.solve(lhs, h * B)
    c_dt = np.linalg.solve(lhs, h * c)
    return Phi, Gam, c_dt


# --- results ------------------------------------------------------------------


@dataclass
class SimResult:
    """Uniformly sampled output channels of one run.

    ``channels`` holds ``t, id, iq, vdc`` plus, per limiter site, its input
    ``z_<site>`` and output ``u_<site>``.
    """

    dt: float
    channels: dict
    spec: VscLoopSpec
    events: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.channels["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def window(self, t_start: float, t_stop: Optional[float] = None) -> "SimResult":
        t = self.channels["t"]
        sel = (t >= t_start - 1e-12) & (t < (np.inf if t_stop is None else t_stop) - 1e-12)
        return replace(self, channels={k: v[sel] for k, v in self.channels.items()})

    def three_phase(self, theta0: float = 0.3, noise_rel_db: Optional[float] = -60.0,
                    seed: int = 0) -> WaveformRecord:
        """Phase currents rebuilt on the ideal-PLL angle, with optional white noise.

        Noise power is set relative to the squared operating d-axis current.
        """
        f0 = self.spec.omega0 / (2 * math.pi)
        rec = inverse_dq0(self.channels["id"], self.channels["iq"], None, self.dt, f0, theta0)
        if noise_rel_db is not None:
            rng = np.random.default_rng(seed)
            ref = abs(self.spec.operating_point()["id0"]) or 1.0
            sd = ref * math.sqrt(10 ** (noise_rel_db / 10))
            rec.samples = rec.samples + rng.normal(0.0, sd, rec.samples.shape)
        rec.meta.update(self.meta)
        rec.meta["theta0"] = theta0
        return rec


def simulate(spec: VscLoopSpec, duration: float, events: Sequence[Event] = (),
             fs_out: float = 1000.0, x0: Optional[np.ndarray] = None,
             probes: Sequence[Probe] = ()) -> SimResult:
    """Fixed-step run from the equilibrium of ``spec`` (or ``x0``).

    Events are applied in time order at the first step at or after their
    timestamp; controller integrator states carry over unchanged.  Output is
    decimated to the nearest integer divisor of ``fs_out``.
    """
    if not duration > 0:
        raise ConfigError("duration must be positive")
    spec.check_step()
    h = spec.dt_sim
    dec = max(1, int(round(1.0 / (fs_out * h))))
    nsteps = int(round(duration / h))
    nrec = -(-nsteps // dec)
    out = np.zeros((12, nrec))
    x = (spec.equilibrium() if x0 is None else np.asarray(x0, dtype=float)).copy()
    pamp = np.zeros(4)
    pfreq = np.zeros(4)
    for p in probes:
        k = SITES.index(p.site)
        pamp[k] += p.amplitude
        pfreq[k] = p.freq
    uprev = np.zeros(4)
    first = spec.equilibrium()
    uprev[2] = spec.R * first[0]
    uprev[3] = spec.R * first[1]
    ev = sorted(events, key=lambda e: e.t)
    cuts = [0] + [min(nsteps, max(0, int(math.ceil(e.t / h - 1e-9)))) for e in ev] + [nsteps]
    # linearisation point and divergence bound are fixed by the initial spec
    vd0 = spec.operating_point()["vd0"]
    bound = spec.bound_factor * max(spec.base_current, spec.vdc_ref)
    cur = spec
    rec = 0
    log = []
    for seg in range(len(cuts) - 1):
        if seg > 0:
            e = ev[seg - 1]
            cur = replace(cur, **dict(e.changes))
            log.append({"t": cuts[seg] * h, "changes": {k: _jsonable(v) for k, v in e.changes.items()}})
        n = cuts[seg + 1] - cuts[seg]
        if n <= 0:
            continue
        A, B, c = cur.open_matrices(vd0=vd0, vdc0=spec.vdc_ref)
        Phi, Gam, c_dt = _discretise(A, B, c, h)
        g = cur.gains_vector(vd0=vd0)
        lo, hi = cur.limiter_arrays()
        rec, bad = _run_block(x, Phi, Gam, c_dt, g, lo, hi, pamp, pfreq, cuts[seg] * h, h, n,
                              dec, cuts[seg], out, rec, bound, cur.delay_steps, uprev)
        if bad >= 0:
            t_bad = (cuts[seg] + bad) * h
            worst = STATE_NAMES[int(np.argmax(np.abs(x) / bound))]
            raise NumericalDivergence(
                f"state {worst} left the bound {bound:.3g} at t={t_bad:.4f} s", step="simulate")
    names = ["t", "id", "iq", "vdc"] + [f"z_{s}" for s in SITES] + [f"u_{s}" for s in SITES]
    channels = {name: out[i, :rec].copy() for i, name in enumerate(names)}
    meta = {"spec": spec.to_dict(), "events": log, "duration": duration, "dt_sim": h}
    return SimResult(dt=h * dec, channels=channels, spec=spec, events=log, meta=meta)


def _jsonable(v):
    if isinstance(v, HardLimitSpec):
        return {"kind": v.kind.value, "a": v.a, "A0": v.A0}
    if isinstance(v, Mapping):
        return {k: _jsonable(w) for k, w in v.items()}
    if isinstance(v, (tuple, list)):
        return [_jsonable(w) for w in v]
    return v


# --- presets ------------------------------------------------------------------

STABLE_GI = (0.2, 20.0)
UNSTABLE_GI = (0.012, 12.5)


def case2_reduced(margin: float = 200.0, limited: bool = True) -> tuple[VscLoopSpec, list[Event], float]:
    """Destabilised d-axis loop with a unilateral limit on the DC-voltage PI.

    Starts at equilibrium with stable inner gains and switches to the
    unstable pair at 0.5 s.  Returns ``(spec, events, duration)``.
    The DC-voltage proportional gain is raised to 14 so the unstable mode
    grows quickly enough for a desk-scale run.
    """
    base = VscLoopSpec(Gi=STABLE_GI, Gdc=(14.0, 500.0))
    limits = {}
    if limited:
        id0 = base.operating_point()["id0"]
        limits["d_outer"] = HardLimitSpec(LimitKind.UNILATERAL, a=margin, A0=id0)
    spec = replace(base, limits=limits)
    return spec, [Event(0.5, {"Gi": UNSTABLE_GI})], 12.0


PRESETS = {"case2-reduced": case2_reduced}


# --- describing-function prediction -------------------------------------------


@dataclass(frozen=True)
class LureLoopSpec:
    """Linear part ``G = num/den`` closed through ``limiter``: ``z = -G u`` about
    the operating point ``u = z = limiter.A0``.

    Coefficients are in descending powers of ``s``.
    """

    num: Sequence[float]
    den: Sequence[float]
    limiter: HardLimitSpec

    def __post_init__(self):
        num = np.trim_zeros(np.asarray(self.num, dtype=float), "f")
        den = np.trim_zeros(np.asarray(self.den, dtype=float), "f")
        if den.size == 0 or num.size == 0:
            raise ConfigError("numerator and denominator must be non-zero")
        if num.size > den.size:
            raise ConfigError("transfer function must be proper")
        object.__setattr__(self, "num", tuple(num))
        object.__setattr__(self, "den", tuple(den))

    def G(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    @property
    def integrating(self) -> bool:
        return self.den[-1] == 0.0

    @classmethod
    def from_vsc(cls, spec: VscLoopSpec, site: str = "d_outer") -> "LureLoopSpec":
        """Loop seen by the DC-voltage limiter: outer PI, DC link and closed inner loop."""
        if site != "d_outer":
            raise ConfigError("only the d_outer reduction is available")
        lim = spec.limits.get(site)
        if lim is None:
            raise ConfigError("spec has no d_outer limiter")
        vd0 = spec.operating_point()["vd0"]
        k = 1.5 * vd0 / (spec.C * spec.vdc_ref)
        kp, ki = spec.Gdc
        kpi, kii = spec.Gi
        num = k * np.polymul([kp, ki], [kpi, kii])
        den = np.polymul([1.0, 0.0, 0.0], [spec.L, spec.R + kpi, kii])
        return cls(tuple(num), tuple(den), lim)


@dataclass(frozen=True)
class LimitCycle:
    freq_hz: float
    amplitude: float
    bias: float
    gain: complex

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.freq_hz


def _output_mean(lim: HardLimitSpec, x0: float, A: float) -> float:
    """Mean of ``lim(x0 + A sin)`` in closed form."""
    lo, hi = lim.lower, lim.upper

    def part(c):  # mean of min(x0 + A sin, c)
        h = (c - x0) / A
        if h >= 1:
            return x0
        if h <= -1:
            return c
        p = math.asin(h)
        return c + (x0 - c) * (0.5 + p / math.pi) - A * math.cos(p) / math.pi

    m = part(hi)
    if math.isfinite(lo):
        # min(max(x, lo), hi) = min(x, hi) + max(lo - x, 0)
        h = (lo - x0) / A
        if h >= 1:
            m += lo - x0
        elif h > -1:
            p = math.asin(h)
            m += (lo - x0) * (0.5 + p / math.pi) + A * math.cos(p) / math.pi
    return m


def _bias(loop: LureLoopSpec, A: float) -> float:
    """Input offset that balances the DC component of the loop."""
    lim = loop.limiter
    ref = lim.A0
    if lim.kind is LimitKind.BILATERAL:
        return 0.0
    if loop.integrating:
        # z stays bounded only if the output averages to the operating point
        f = lambda x0: _output_mean(lim, x0, A) - ref
    else:
        g0 = float(np.real(loop.G(0.0)))
        f = lambda x0: x0 - ref + g0 * (_output_mean(lim, x0, A) - ref)
    lo, hi = ref - 2 * A - lim.a, lim.upper + A
    if f(lo) * f(hi) > 0:
        raise NoLimitCycle(f"no DC balance for amplitude {A:.4g}", step="bias")
    return optimize.brentq(f, lo, hi, xtol=1e-12 * max(1.0, abs(ref) + A))


def _df(loop: LureLoopSpec, A: float) -> tuple[complex, float]:
    x0 = _bias(loop, A)
    lim = loop.limiter
    if lim.kind is LimitKind.UNILATERAL:
        return _unilateral_df(lim, x0, A), x0
    return describing_function(lim, A), x0


def _unilateral_df(lim: HardLimitSpec, x0: float, A: float) -> complex:
    """First-harmonic gain of ``min(x0 + A sin, U)``, clip height may be negative."""
    h = (lim.upper - x0) / A
    if h >= 1:
        return 1.0 + 0j
    if h <= -1:
        return 0j
    p = math.asin(h)
    # B1 / A for the clipped sine, quarter-wave symmetric about pi/2
    return complex(0.5 + (p + h * math.cos(p)) / math.pi, 0.0)


def predict_limit_cycle(loop: LureLoopSpec, omega_range: tuple[float, float] = (1e-2, 1e4),
                        amp_range: Optional[tuple[float, float]] = None) -> LimitCycle:
    """Solve ``1 + N(A) G(j w) = 0`` in the search box.

    Phase crossovers of ``G`` seed a one-dimensional amplitude solve, which
    is then polished jointly in ``(log A, w)``.  The first crossover that
    yields a solution is returned.
    """
    lim = loop.limiter
    if amp_range is None:
        amp_range = (lim.a * 1e-3, lim.a * 1e4)
    w = np.geomspace(*omega_range, 20000)
    Gw = loop.G(1j * w)
    im = Gw.imag
    idx = np.nonzero((np.sign(im[:-1]) != np.sign(im[1:])) & (Gw.real[:-1] < 0))[0]
    if idx.size == 0:
        raise NoLimitCycle("linear part has no phase crossover in the search box", step="df")
    Agrid = np.geomspace(*amp_range, 400)
    for i in idx:
        wc = optimize.brentq(lambda v: loop.G(1j * v).imag, w[i], w[i + 1], xtol=1e-14)
        target = -1.0 / loop.G(1j * wc).real
        try:
            vals = np.array([_df(loop, A)[0].real - target for A in Agrid])
        except NoLimitCycle:
            continue
        sign = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
        if sign.size == 0:
            continue
        j = sign[-1]
        A = optimize.brentq(lambda a: _df(loop, a)[0].real - target, Agrid[j], Agrid[j + 1], xtol=1e-14)

        def resid(v):
            N, _ = _df(loop, math.exp(v[0]))
            r = 1.0 + N * loop.G(1j * v[1])
            return [r.real, r.imag]

        sol = optimize.root(resid, [math.log(A), wc], method="hybr", tol=1e-13)
        if sol.success and np.max(np.abs(resid(sol.x))) < 1e-8:
            A, wc = math.exp(sol.x[0]), float(sol.x[1])
        N, x0 = _df(loop, A)
        return LimitCycle(freq_hz=wc / (2 * math.pi), amplitude=A, bias=x0, gain=N)
    raise NoLimitCycle("no amplitude balances the loop gain in the search box", step="df")


def measure_oscillation(x: np.ndarray, dt: float) -> tuple[float, float, float]:
    """Frequency, fundamental amplitude and mean of a periodic record.

    Frequency comes from a Hann-windowed periodogram peak refined by
    parabolic interpolation; amplitude from a least-squares sine fit.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    xm = x - x.mean()
    spec = np.abs(np.fft.rfft(xm * np.hanning(n)))
    k = int(np.argmax(spec[1:])) + 1
    if 1 <= k < spec.size - 1:
        a, b, c = np.log(spec[k - 1: k + 2] + 1e-300)
        k = k + 0.5 * (a - c) / (a - 2 * b + c)
    f = k / (n * dt)
    t = np.arange(n) * dt
    M = np.column_stack([np.sin(2 * math.pi * f * t), np.cos(2 * math.pi * f * t), np.ones(n)])
    coef, *_ = np.linalg.lstsq(M, x, rcond=None)
    return f, float(math.hypot(coef[0], coef[1])), float(coef[2])
