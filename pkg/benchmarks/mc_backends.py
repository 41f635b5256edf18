#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure-numpy trial kernels.

Usage: python benchmarks/mc_backends.py [--trials N]

Both kernels consume identical standard-normal draw blocks and must
return bit-identical statistics; the benchmark asserts that while timing
them on the reference system shape (N_t = N_r = M = 3, rho = 0.5).
"""

import argparse
import time

import numpy as np

from nomalink import corrchan
from nomalink.mcsim import backends
from nomalink.mcsim.core import BLOCK_TRIALS, hermitian_sqrt


def run(trials: int):
    cfg = corrchan.SystemConfig(n_t=3, n_r=3, n_streams=3, rho_t=0.5, rho_r=0.5)
    corr = corrchan.correlation_pair(cfg)
    a = hermitian_sqrt(corr.r_r)
    b = hermitian_sqrt(corr.r_t_eff)
    rng = np.random.default_rng(0)

    names = backends.available_backends()
    totals = {name: 0.0 for name in names}
    checks = {}
    done = 0
    while done < trials:
        count = min(BLOCK_TRIALS, trials - done)
        draws = rng.standard_normal((count, 3, 3, 2))
        for name in names:
            t0 = time.perf_counter()
            stats, valid = backends.stats_from_draws(draws, a, b, backend=name)
            totals[name] += time.perf_counter() - t0
            checks[name] = (stats, valid)
        if len(names) == 2:
            s0, v0 = checks[names[0]]
            s1, v1 = checks[names[1]]
            assert np.array_equal(v0, v1) and np.array_equal(s0[v0], s1[v1]), (
                "backends diverged"
            )
        done += count

    print(f"trials: {trials}  (block size {BLOCK_TRIALS})")
    for name in names:
        rate = trials / totals[name]
        print(f"  {name:>6}: {totals[name]:7.3f} s   {rate / 1e6:6.2f} Mtrials/s")
    if len(names) == 2:
        print(f"  speedup: {totals['numpy'] / totals['cython']:.1f}x")
        print("  statistics bit-identical across backends: yes")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=500_000)
    args = parser.parse_args()
    run(args.trials)
