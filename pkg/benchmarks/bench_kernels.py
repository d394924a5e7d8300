"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best-of-N wall time of each backend
and the speed-up.  The fringe-scan rows time a full 12-point scan with the
backend swapped underneath ``mcsim``.
"""

import argparse
import time

import numpy as np

from nonlocal_fringe import _fallback, kernels, mcsim
from nonlocal_fringe.sources import EntangledAncilla

try:
    from nonlocal_fringe import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    noise = (rng.standard_normal(2_000_000) + 1j * rng.standard_normal(2_000_000)) / np.sqrt(2)
    t1 = np.sort(rng.uniform(0, 4e6, 400_000))
    t2 = np.sort(rng.uniform(0, 4e6, 400_000))
    n = 1 << 20
    u_h, u_p, dth = rng.random(n), rng.random(n), rng.standard_normal(n) * 0.1
    a = np.array([0.010, 0.004, 0.004, 0.010])
    b_re = np.array([0.004, -0.003, -0.003, 0.004])
    b_im = np.zeros(4)
    return {
        "ar1_field (2e6 samples)": lambda m: m.ar1_field(noise, 0.97),
        "pair_histogram (4e5 x 4e5 tags)": lambda m: m.pair_histogram(t1, t2, 101.25, 2.5),
        "classify_trials (2^20 trials)": lambda m: m.classify_trials(u_h, u_p, dth, 0.3, 0.8, a, b_re, b_im, 0.002),
    }


def scan_with(module):
    saved = mcsim.kernels.classify_trials
    mcsim.kernels.classify_trials = module.classify_trials
    try:
        cfg = mcsim.ExperimentConfig.for_ratio(
            EntangledAncilla.from_retrieval(0.26, 0.13), 0.22, trials_per_point=1_000_000
        )
        mcsim.run_fringe_scan(cfg)
    finally:
        mcsim.kernels.classify_trials = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    print(f"default backend: {kernels.BACKEND}")
    if compiled is None:
        print("compiled extension not built; only the numpy backend is timed")
    print(f"{'kernel':<36}{'python s':>10}{'cython s':>10}{'speed-up':>10}")
    rows = list(cases().items()) + [("fringe scan (12 x 1e6 trials)", None)]
    for name, fn in rows:
        run = (lambda m: scan_with(m)) if fn is None else fn
        py = best_of(lambda: run(_fallback), args.repeat)
        if compiled is None:
            print(f"{name:<36}{py:>10.3f}{'-':>10}{'-':>10}")
            continue
        cy = best_of(lambda: run(compiled), args.repeat)
        print(f"{name:<36}{py:>10.3f}{cy:>10.3f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
