"""Compare the numba-compiled loops with the numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Times the bispectrum and trispectrum kernels on a realistic segment matrix
(M=128 segments, N=256) and the simulator stepping kernel over one second
of simulated time.  Compilation is excluded by a warm-up call.
"""
from __future__ import annotations

import argparse
import time
from dataclasses import replace

import numpy as np

from hosdetect import _kernels, vscsim


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def sim_args(steps: int):
    spec, _, _ = vscsim.case2_reduced()
    spec = replace(spec, Gi=vscsim.UNSTABLE_GI)
    A, B, c = spec.open_matrices()
    Phi, Gam, c_dt = vscsim._discretise(A, B, c, spec.dt_sim)
    lo, hi = spec.limiter_arrays()
    x = spec.equilibrium()
    x[2] += 1.0

    def call(fn):
        out = np.zeros((12, steps // 20 + 1))
        fn(x.copy(), Phi, Gam, c_dt, spec.gains_vector(), lo, hi, np.zeros(4), np.zeros(4), 0.0,
           spec.dt_sim, steps, 20, 0, out, 0, 1e12, 0, np.zeros(4))

    return call


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--segments", type=int, default=128)
    ap.add_argument("--seglen", type=int, default=256)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    K = args.seglen // 2
    X = rng.normal(size=(args.segments, K + 1)) + 1j * rng.normal(size=(args.segments, K + 1))
    Kt = min(K, 128)
    steps = 20000
    call = sim_args(steps)

    cases = [
        ("bispectrum", lambda: _kernels._bispectrum_loops(X, K), lambda: _kernels._bispectrum_numpy(X, K)),
        ("trispectrum", lambda: _kernels._trispectrum_loops(X, K, Kt),
         lambda: _kernels._trispectrum_numpy(X, K, Kt)),
        ("simulate 1 s", lambda: call(vscsim._run_block), None),
    ]
    print(f"{'kernel':<14}{'numba [s]':>12}{'fallback [s]':>14}{'speed-up':>10}")
    for name, fast, slow in cases:
        fast()  # compile
        tf = best_of(fast, args.repeat)
        if slow is None:
            # the simulator has no vectorised form; its fallback is the plain loop
            slow = lambda: call(vscsim._run_block.py_func)  # noqa: E731
        ts = best_of(slow, max(1, args.repeat if name != "simulate 1 s" else 1))
        print(f"{name:<14}{tf:>12.4f}{ts:>14.4f}{ts / tf:>9.1f}x")


if __name__ == "__main__":
    main()
