"""Time the numba kernels against their pure-python fallbacks.

    python3 benchmarks/bench_kernels.py --steps 200000 --repeat 3
"""

import argparse
import time

import numpy as np

from hylcycles import _accel, _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bose_case(kernel, points):
    def run():
        for n, u in points:
            kernel(n, u, 1e-12, 10_000_000)
    return run


def chain_case(kernel, steps, seed):
    rates = 1.0 / np.arange(1, 9) ** 1.5
    cdf = np.cumsum(rates)
    log_rates = np.log(rates)
    uni = np.random.default_rng(seed).random((steps, 4))

    def run():
        counts = np.zeros(8, dtype=np.int64)
        state = np.zeros(2)
        out = np.zeros((steps // 10 + 1, 8), dtype=np.int32)
        kernel(counts, cdf, log_rates, 8.0, 1.0, 3.6, 1.0, 0.5, 3, -1, 0.1,
               uni, 0, 0, 10, out, 0, state)
    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    points = [(n, u) for n in (0.5, 1.5, 2.5) for u in (-1e-3, -0.1, -1.0, -5.0)]
    cases = [
        ("bose_series", _kernels.bose_series_py, lambda k: bose_case(k, points)),
        ("mh_chain", _kernels.mh_chain_py, lambda k: chain_case(k, args.steps, args.seed)),
    ]
    print(f"{'kernel':<12} {'python_s':>10} {'numba_s':>10} {'speedup':>8}")
    for name, py, make in cases:
        fast = _accel.compile_kernel(py)
        make(fast)()  # compile outside the timing
        t_py = best_of(make(py), args.repeat)
        t_nb = best_of(make(fast), args.repeat)
        print(f"{name:<12} {t_py:>10.4f} {t_nb:>10.4f} {t_py / t_nb:>8.1f}")


if __name__ == "__main__":
    main()
