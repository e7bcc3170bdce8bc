"""Compare the numba and pure-numpy kernels on representative sizes.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The numba column is skipped when numba is unavailable.  Setting
PARAPAT_DISABLE_NUMBA=1 only changes which implementation the package uses
by default; this script always times both explicitly.
"""
import argparse
import time

import numpy as np

from parapat import kernels
from parapat._accel import NUMBA_AVAILABLE


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def gauss_seidel_case(n, sweeps):
    rng = np.random.default_rng(0)
    f = rng.standard_normal((n + 2, n + 2))
    h = 1.0 / (n + 1)

    def make(gs):
        def run():
            u = np.zeros_like(f)
            gs(u, f, 1 / h**2, 1 / h**2, 0.0, sweeps)
        return run
    return make


def branching_case(nwalkers):
    rng = np.random.default_rng(0)
    v_old = rng.exponential(3.0, nwalkers)
    v_new = v_old + rng.normal(0, 0.1, nwalkers)
    u = rng.random(nwalkers)

    def make(fn):
        return lambda: fn(v_old, v_new, 3.0, 0.01, u, 10.0)
    return make


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cases = [
        (f"gauss-seidel {n}x{n}, 50 sweeps", gauss_seidel_case(n, 50),
         kernels.rb_gauss_seidel_numpy, getattr(kernels, "rb_gauss_seidel_numba", None))
        for n in (31, 63, 127)
    ] + [
        (f"branching {n} walkers", branching_case(n),
         kernels.branch_markers_numpy, getattr(kernels, "branch_markers_numba", None))
        for n in (1_000, 100_000)
    ]
    print(f"{'case':<34}{'numpy [ms]':>12}{'numba [ms]':>12}{'ratio':>8}")
    for name, make, np_fn, nb_fn in cases:
        t_np = best_of(make(np_fn), args.repeat)
        if NUMBA_AVAILABLE and nb_fn is not None:
            make(nb_fn)()  # compile outside the timing
            t_nb = best_of(make(nb_fn), args.repeat)
            print(f"{name:<34}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>8.1f}")
        else:
            print(f"{name:<34}{1e3 * t_np:>12.3f}{'n/a':>12}{'':>8}")


if __name__ == "__main__":
    main()
