"""Compare the compiled and numpy Toda kernels, alone and inside a full Newton solve.

Usage: python3 benchmarks/bench_kernels.py [--grid 129 257] [--rank 2 4] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from higgslab import kernels
from higgslab.algebra import build_hitchin_section
from higgslab.chart import build_chart, hyperbolic_factor
from higgslab.solver import SolverConfig, solve


def kernel_times(backend, n: int, grid: int, repeat: int) -> tuple[float, float]:
    rng = np.random.default_rng(0)
    shape = (n, grid, grid)
    u, ga, wk, v = (np.ascontiguousarray(rng.normal(size=shape)) for _ in range(4))
    ga = np.abs(ga)
    ih = float((grid - 1) ** 2)
    _, e = backend.toda_residual(u, ga, wk, ih, ih, False)
    t_res = min(timeit.repeat(lambda: backend.toda_residual(u, ga, wk, ih, ih, False), number=10, repeat=repeat)) / 10
    t_jvp = min(timeit.repeat(lambda: backend.toda_jvp(e, v, ih, ih, False), number=10, repeat=repeat)) / 10
    return t_res, t_jvp


def solve_time(backend, n: int, grid: int, repeat: int) -> float:
    chart = build_chart("disk", grid, r_max=0.8)
    metric = hyperbolic_factor(chart)
    qs = [0] * (n - 2) + [[0, 0.3]]
    phi = build_hitchin_section(qs, n)
    saved = kernels.toda_residual, kernels.toda_jvp
    kernels.toda_residual, kernels.toda_jvp = backend.toda_residual, backend.toda_jvp
    try:
        cfg = SolverConfig(init="zeros")
        return min(timeit.repeat(lambda: solve(phi, chart, metric, config=cfg), number=1, repeat=repeat))
    finally:
        kernels.toda_residual, kernels.toda_jvp = saved


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, nargs="+", default=[129, 257])
    ap.add_argument("--rank", type=int, nargs="+", default=[2, 4])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"numpy": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled extension not built; timing numpy only")
    print(f"{'rank':>4} {'grid':>5} {'backend':>7} {'residual ms':>12} {'jvp ms':>9} {'solve s':>8}")
    for n in args.rank:
        for g in args.grid:
            for name, be in backends.items():
                tr, tj = kernel_times(be, n, g, args.repeat)
                ts = solve_time(be, n, g, max(1, args.repeat // 2))
                print(f"{n:>4} {g:>5} {name:>7} {1e3 * tr:>12.3f} {1e3 * tj:>9.3f} {ts:>8.3f}")


if __name__ == "__main__":
    main()
