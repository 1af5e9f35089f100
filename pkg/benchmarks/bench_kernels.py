"""Time the numba and numpy versions of the hot kernels.

    python benchmarks/bench_kernels.py [--n 161] [--repeat 20]
"""
import argparse
import time

import numpy as np

from topoproj import _jit
from topoproj.calculus import jet
from topoproj.grid import GridSpec, _correlate_nb, _correlate_np, make_conic_kernel
from topoproj.projection import Method, ProjectionConfig, _project_pixels_nb, _project_pixels_np


def best_of(fn, repeat):
    fn()  # warm-up (includes JIT compilation for the numba path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=161)
    ap.add_argument("--radius", type=float, default=5.0)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    if not _jit.HAS_NUMBA:
        print("numba not installed; nothing to compare")
        return
    grid = GridSpec(args.n, args.n, 1.0 / args.n)
    rng = np.random.default_rng(0)
    rho = rng.random(grid.shape)
    w = make_conic_kernel(args.radius).weights

    print(f"grid {args.n}x{args.n}, best of {args.repeat}")
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for periodic in (True, False):
        t_np = best_of(lambda: _correlate_np(rho, w, periodic), args.repeat)
        t_nb = best_of(lambda: _correlate_nb(rho, w, periodic), args.repeat)
        name = "filter " + ("periodic" if periodic else "clamped")
        print(f"{name:<28}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.1f}")

    from topoproj.grid import filter_field

    j = jet(filter_field(rho, make_conic_kernel(args.radius), grid), grid)
    chans = [np.ascontiguousarray(c).ravel() for c in j.channels()]
    for method in (Method.SSP1, Method.SSP2, Method.TANH):
        for beta in (np.inf, 64.0):
            if method is Method.TANH and np.isinf(beta):
                continue
            cfg = ProjectionConfig(beta=beta, r_hat=0.5 * grid.dx, method=method)
            a = (*chans, cfg.beta, cfg.eta, cfg.r_hat, method.code)
            t_np = best_of(lambda: _project_pixels_np(*a), args.repeat)
            t_nb = best_of(lambda: _project_pixels_nb(*a), args.repeat)
            name = f"project {method.value} beta={beta:g}"
            print(f"{name:<28}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
