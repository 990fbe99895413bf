"""Timing of the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both paths are called directly, so the NAESAT_RSB_NO_NUMBA flag does not
matter here. The first numba call (compilation or cache load) is excluded.
"""
import argparse
import time

import numpy as np

from naesat_rsb import _accel
from naesat_rsb.gardner import _brute_loop, _brute_numpy
from naesat_rsb.instance import (ModelParams, _gray_min_numba, _gray_min_numpy, generate)
from naesat_rsb.sp_core import kernel_sums


def best_of(fn, repeat):
    fn()
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t)
    return min(ts)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        print("numba not available; only the numpy column is meaningful")

    cases = []
    ws = np.linspace(0.01, 0.5, 50)

    def ks(backend):
        return lambda: [kernel_sums(5000, w, 1.0, backend) for w in ws]
    cases.append(("kernel_sums x50 (n=5000)", ks("numba"), ks("numpy")))

    inst = generate(ModelParams(3, 6, 20), 1)
    args_g = (np.ascontiguousarray(inst.var_adj), np.ascontiguousarray(inst.edge_clause),
              np.ascontiguousarray(inst.edge_lit, dtype=np.int64), inst.params.M, 3)
    cases.append(("gray-code ground state (N=20)", lambda: _gray_min_numba(*args_g),
                  lambda: _gray_min_numpy(*args_g)))

    q = np.array([0.45, 0.45, 0.1])
    cases.append(("stability enumeration (k=3, d=7)", lambda: _brute_loop(3, 7, 1.0, q),
                  lambda: _brute_numpy(3, 7, 1.0, q)))

    print(f"{'kernel':36s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, fa, fb in cases:
        ta, tb = best_of(fa, args.repeat), best_of(fb, args.repeat)
        print(f"{name:36s} {ta:10.4f} {tb:10.4f} {tb / ta:8.1f}")


if __name__ == "__main__":
    main()
