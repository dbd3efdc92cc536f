"""Compare the compiled kernels against the pure-numpy fallback.

Run as: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from spcsim import kernels
from spcsim._kernels_np import (fwht_inplace as np_fwht,
                                packed_matvec as np_matvec,
                                packed_rmatvec as np_rmatvec)


def _time(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_fwht():
    print("fast Walsh-Hadamard transform, batched rows")
    print(f"{'shape':>14} {'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for batch, n in ((64, 64), (256, 256), (256, 1024), (1024, 4096)):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(batch, n))
        tc = _time(lambda: kernels.fwht_inplace(a.copy()))
        tf = _time(lambda: np_fwht(a.copy()))
        print(f"{batch}x{n:>9} {tc*1e3:>8.2f}ms {tf*1e3:>8.2f}ms "
              f"{tf/tc:>7.1f}x")


def bench_packed():
    print("\nbit-packed mask matvec / rmatvec")
    print(f"{'rows x cells':>14} {'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for rows, cells in ((409, 4096), (1638, 16384), (5300, 65536)):
        rng = np.random.default_rng(1)
        packed = rng.integers(0, 256, size=(rows, (cells + 7) // 8),
                              dtype=np.uint8)
        x = rng.normal(size=cells)
        y = rng.normal(size=rows)
        out_r = np.zeros(rows)
        out_c = np.zeros(cells)
        tc = _time(kernels.packed_matvec, packed, x, cells, out_r)
        tf = _time(np_matvec, packed, x, cells, out_r.copy())
        print(f"{rows}x{cells:>8}  matvec {tc*1e3:>7.2f}ms {tf*1e3:>8.2f}ms "
              f"{tf/tc:>7.1f}x")
        tc = _time(kernels.packed_rmatvec, packed, y, cells, out_c)
        tf = _time(np_rmatvec, packed, y, cells, out_c.copy())
        print(f"{'':>14} rmatvec {tc*1e3:>6.2f}ms {tf*1e3:>8.2f}ms "
              f"{tf/tc:>7.1f}x")


if __name__ == "__main__":
    print(f"compiled extension available: {kernels.HAVE_COMPILED}\n")
    bench_fwht()
    bench_packed()
