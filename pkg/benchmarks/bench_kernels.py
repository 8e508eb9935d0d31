#!/usr/bin/env python3
"""Benchmark the assembly kernels: numba hot path vs numpy fallback.

Times residual and Jacobian assembly on a hyperbolic disc problem at a few
grid sizes, after warming the JIT cache.  Run as

    python benchmarks/bench_kernels.py [--sizes 33x96 65x192 129x384]
"""

import argparse
import math
import time

import numpy as np

from pmc import kernels
from pmc.geometry import make_chart
from pmc.mesh import GridFunction, make_grid
from pmc.operator import make_problem


def bench(fn, repeat=7):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", nargs="*", default=["33x96", "65x192", "129x384"])
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()

    backends = ["numpy"]
    try:
        kernels.resolve_backend("numba")
        backends.append("numba")
    except RuntimeError:
        print("numba unavailable; benchmarking the numpy path only")

    rho = math.atanh(0.75)
    chart = make_chart("hyperbolic_polar", 2, rho_max=rho, axis_patch=True)
    rng = np.random.default_rng(7)

    print(f"{'grid':>10} {'kernel':>9} " + " ".join(f"{b:>12}" for b in backends)
          + ("      speedup" if len(backends) == 2 else ""))
    for size in args.sizes:
        n0, n1 = (int(s) for s in size.split("x"))
        grid = make_grid(chart, (n0, n1))
        problem = make_problem(chart, grid, 0.5,
                               lambda pts: np.sin(pts[..., 1]))
        T = problem.tables()
        u = GridFunction.from_callable(
            grid, lambda pts: 0.3 * np.tanh(pts[..., 0]) * np.sin(pts[..., 1]))
        u.values += 0.01 * rng.standard_normal(grid.shape) * (grid.mask == 0)
        u.set_pole(u.values[0, 0])

        for name, call in (
            ("residual", lambda b: kernels.assemble_residual(u.values, T, b)),
            ("jacobian", lambda b: kernels.assemble_jacobian(u.values, T, b)),
        ):
            for b in backends:
                call(b)  # warm (JIT compile / cache load)
            times = [bench(lambda b=b: call(b), args.repeat) for b in backends]
            line = f"{size:>10} {name:>9} " + " ".join(f"{t*1e3:>10.2f}ms" for t in times)
            if len(times) == 2:
                line += f"   {times[0] / times[1]:>8.1f}x"
            print(line)

        # consistency while we are here
        r_np = kernels.assemble_residual(u.values, T, "numpy")
        for b in backends[1:]:
            r_b = kernels.assemble_residual(u.values, T, b)
            assert np.max(np.abs(r_np - r_b)) < 1e-12, "backend mismatch"


if __name__ == "__main__":
    main()
