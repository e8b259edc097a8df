"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run as ``python -m pnppbcd.bench``.  Measures the penalty prox maps (the
solver's per-fiber hot loop), penalty evaluation, and the separable periodic
smoothing pass, at a solver-realistic size and at a larger stress size.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels


def _time(fn, *args, repeats=5, min_time=0.2):
    fn(*args)  # warm up (numba compilation, caches)
    best = np.inf
    for _ in range(repeats):
        n = 0
        t0 = time.perf_counter()
        while True:
            fn(*args)
            n += 1
            dt = time.perf_counter() - t0
            if dt >= min_time:
                break
        best = min(best, dt / n)
    return best


def main():
    if not kernels.using_numba():
        print("note: PNPPBCD_BACKEND forces the numpy path; timing numpy against itself")

    rng = np.random.default_rng(0)
    cases = [
        ("l1", kernels.PENALTY_L1, 0.0, 0.0),
        ("relaxed_lp", kernels.PENALTY_RELAXED_LP, 0.1, 1e-5),
        ("mcp", kernels.PENALTY_MCP, 1.0, 2.0),
        ("scad", kernels.PENALTY_SCAD, 1.0, 3.0),
    ]
    sizes = [2500, 250_000]

    print(f"backend: {kernels.BACKEND}")
    print(f"{'kernel':<22}{'size':>9}{'numba':>12}{'numpy':>12}{'speedup':>9}")
    for size in sizes:
        v = np.abs(rng.standard_normal(size)) * 4.0
        for name, code, pa, pb in cases:
            fast = _time(kernels.penalty_prox, code, pa, pb, 3.846, v)
            slow = _time(kernels.penalty_prox_numpy, code, pa, pb, 3.846, v)
            print(f"{'prox ' + name:<22}{size:>9}{fast * 1e3:>10.3f}ms{slow * 1e3:>10.3f}ms"
                  f"{slow / fast:>8.1f}x")
        for name, code, pa, pb in cases:
            fast = _time(kernels.penalty_values, code, pa, pb, v)
            slow = _time(kernels.penalty_values_numpy, code, pa, pb, v)
            print(f"{'value ' + name:<22}{size:>9}{fast * 1e3:>10.3f}ms{slow * 1e3:>10.3f}ms"
                  f"{slow / fast:>8.1f}x")

    kern = np.array([1, 4, 6, 4, 1]) / 16.0
    for shape in ((50, 50), (512, 512)):
        x = rng.standard_normal(shape)
        fast = _time(kernels.smooth2d, x, kern)
        slow = _time(kernels.smooth2d_numpy, x, kern)
        label = f"smooth2d {shape[0]}x{shape[1]}"
        print(f"{label:<22}{x.size:>9}{fast * 1e3:>10.3f}ms{slow * 1e3:>10.3f}ms"
              f"{slow / fast:>8.1f}x")


if __name__ == "__main__":
    main()
