import math
from dataclasses import replace

import numpy as np
import pytest

from hosdetect import vscsim
from hosdetect.errors import ConfigError, NoLimitCycle, NumericalDivergence
from hosdetect.hardlimit import HardLimitSpec, LimitKind


@pytest.fixture(scope="module")
def limit_cycle():
    spec, events, duration = vscsim.case2_reduced()
    return spec, vscsim.simulate(spec, duration, events)


def test_equilibrium_is_stationary():
    spec = vscsim.VscLoopSpec(Gi=vscsim.STABLE_GI)
    r = vscsim.simulate(spec, 0.5)
    op = spec.operating_point()
    assert np.max(np.abs(r["id"] - op["id0"])) < 1e-9 * op["id0"]
    assert np.max(np.abs(r["vdc"] - spec.vdc_ref)) < 1e-9 * spec.vdc_ref


def test_operating_point_power_balance():
    spec = vscsim.VscLoopSpec()
    op = spec.operating_point()
    assert 1.5 * op["vd0"] * op["id0"] == pytest.approx(spec.P, rel=1e-12)
    v_src = op["vd0"] - complex(spec.Rg, spec.omega0 * spec.Lg) * complex(op["id0"], op["iq0"])
    assert abs(v_src) == pytest.approx(spec.v_grid, rel=1e-10)


def test_stable_gains_track_reference():
    spec = vscsim.VscLoopSpec(Gi=vscsim.STABLE_GI, Gdc=(14.0, 500.0))
    r = vscsim.simulate(spec, 4.0, [vscsim.Event(0.5, {"P": 0.3e6})])
    # the DC link stays linearised about the initial PCC voltage
    id_ref = 0.3e6 / (1.5 * spec.operating_point()["vd0"])
    assert abs(r["id"][-1] - id_ref) < 1e-6 * id_ref
    assert abs(r["vdc"][-1] - spec.vdc_ref) < 1e-6 * spec.vdc_ref


def test_unlimited_unstable_loop_diverges():
    spec, events, duration = vscsim.case2_reduced(limited=False)
    with pytest.raises(NumericalDivergence):
        vscsim.simulate(spec, duration, events)


def test_limit_cycle_is_bounded_and_equal_amplitude(limit_cycle):
    spec, r = limit_cycle
    assert np.all(np.isfinite(r["id"])) and len(r) == 12000
    f, _, _ = vscsim.measure_oscillation(r.window(9.0)["z_d_outer"], r.dt)
    tail = r.window(r["t"][-1] - 50 / f)["id"]
    peaks = [tail[i] for i in range(1, tail.size - 1) if tail[i - 1] <= tail[i] > tail[i + 1]]
    assert len(peaks) >= 45
    assert (max(peaks) - min(peaks)) / (tail.max() - tail.min()) < 0.02
    # the limiter binds: its output never exceeds the upper level
    assert np.max(r["u_d_outer"]) <= spec.limits["d_outer"].upper + 1e-9


def test_describing_function_matches_simulation(limit_cycle):
    spec, r = limit_cycle
    w = r.window(9.0)
    f_sim, a_sim, bias_sim = vscsim.measure_oscillation(w["z_d_outer"], w.dt)
    loop = vscsim.LureLoopSpec.from_vsc(replace(spec, Gi=vscsim.UNSTABLE_GI))
    pred = vscsim.predict_limit_cycle(loop)
    assert pred.freq_hz == pytest.approx(f_sim, rel=0.10)
    assert pred.amplitude == pytest.approx(a_sim, rel=0.10)
    assert pred.bias == pytest.approx(bias_sim, rel=0.10)
    assert abs(1 + pred.gain * loop.G(1j * pred.omega)) < 1e-8


def test_relay_harmonic_balance():
    # K/(s(s+1)^2): phase crossover at 1 rad/s where |G| = K/2;
    # ideal-relay DF 4a/(pi A) then gives A = 2 a K / pi
    K, a = 10.0, 0.1
    loop = vscsim.LureLoopSpec([K], np.polymul([1, 0], np.polymul([1, 1], [1, 1])),
                               HardLimitSpec(LimitKind.BILATERAL, a=a))
    pred = vscsim.predict_limit_cycle(loop)
    assert pred.omega == pytest.approx(1.0, rel=0.02)
    assert pred.amplitude == pytest.approx(2 * a * K / math.pi, rel=0.02)


def test_no_limit_cycle_cases():
    lim = HardLimitSpec(LimitKind.BILATERAL, a=1.0)
    # no phase crossover
    with pytest.raises(NoLimitCycle):
        vscsim.predict_limit_cycle(vscsim.LureLoopSpec([1.0], [1.0, 2.0, 1.0], lim))
    # crossover gain below 1: the limiter cannot be the balancing element
    with pytest.raises(NoLimitCycle):
        vscsim.predict_limit_cycle(vscsim.LureLoopSpec([1.0], [1.0, 2.0, 1.0, 0.0], lim))
    with pytest.raises(ConfigError):
        vscsim.LureLoopSpec([1.0, 0.0, 0.0], [1.0, 1.0], lim)


@pytest.mark.parametrize("f", [5.0, 20.0, 60.0])
def test_small_signal_transfer_functions(f):
    spec = vscsim.VscLoopSpec(Gi=vscsim.STABLE_GI, Gdc=(14.0, 500.0))
    r = vscsim.simulate(spec, 4.0, probes=[vscsim.Probe("d_outer", 5.0, f)], fs_out=4000.0).window(2.0)
    e = np.exp(-2j * math.pi * f * r["t"])
    s = 2j * math.pi * f
    kp, ki = spec.Gi
    gi = kp + ki / s
    closed = np.sum(r["id"] * e) / np.sum(r["u_d_outer"] * e)
    plant = np.sum(r["id"] * e) / np.sum(r["u_d_inner"] * e)
    assert abs(closed) == pytest.approx(abs(gi / (s * spec.L + spec.R + gi)), rel=0.02)
    assert abs(plant) == pytest.approx(abs(1 / (s * spec.L + spec.R)), rel=0.02)


def test_kernel_backends_agree():
    spec, events, _ = vscsim.case2_reduced()
    spec = replace(spec, Gi=vscsim.UNSTABLE_GI)
    A, B, c = spec.open_matrices()
    Phi, Gam, c_dt = vscsim._discretise(A, B, c, spec.dt_sim)
    g = spec.gains_vector()
    lo, hi = spec.limiter_arrays()
    x0 = spec.equilibrium()
    x0[2] += 5.0
    outs = []
    for fn in (vscsim._run_block, vscsim._run_block.py_func):
        x = x0.copy()
        out = np.zeros((12, 400))
        rec, bad = fn(x, Phi, Gam, c_dt, g, lo, hi, np.zeros(4), np.zeros(4), 0.0, spec.dt_sim,
                      4000, 10, 0, out, 0, 1e9, 0, np.zeros(4))
        assert rec == 400 and bad == -1
        outs.append(out)
    assert np.allclose(outs[0], outs[1], rtol=1e-9, atol=1e-9)


def test_transport_delay_option_runs():
    spec = replace(vscsim.VscLoopSpec(Gi=vscsim.STABLE_GI), delay_steps=1)
    r = vscsim.simulate(spec, 0.2)
    assert np.all(np.isfinite(r["id"]))


def test_three_phase_record(limit_cycle):
    spec, r = limit_cycle
    rec = r.window(4.0).three_phase(theta0=0.2, noise_rel_db=None)
    assert rec.samples.shape == (3, 8000)
    peak = np.max(np.abs(rec.samples))
    assert peak >= np.max(np.abs(r.window(4.0)["id"])) * 0.99


def test_spec_validation():
    with pytest.raises(ConfigError):
        vscsim.VscLoopSpec(L=0.0)
    with pytest.raises(ConfigError):
        vscsim.VscLoopSpec(limits={"dc_link": HardLimitSpec(LimitKind.BILATERAL, 1.0)})
    with pytest.raises(ConfigError):
        vscsim.VscLoopSpec(dt_sim=1e-3).check_step()
    with pytest.raises(ConfigError):
        vscsim.simulate(vscsim.VscLoopSpec(), 0.0)
    with pytest.raises(ConfigError):
        vscsim.Probe("nowhere", 1.0, 1.0)
