"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import math
import timeit

import numpy as np

from srsweep import kernels
from srsweep.evolution import run_kraus, trajectory_uniforms
from srsweep.sectors import sector_dim, to_dense
from srsweep.state import ModelParams, new_all_ground


def bench_rotate(m, k, rows):
    rng = np.random.default_rng(0)
    lo0 = rng.normal(size=(rows, sector_dim(m, k))) + 0j
    hi0 = np.zeros((rows, sector_dim(m, k + 1)), dtype=complex)

    def run():
        lo, hi = lo0.copy(), hi0.copy()
        kernels.rotate_sweep(lo, hi, m, k, math.cos(0.3), math.sin(0.3))

    return run


def bench_mc(m, n, trials):
    tables = kernels.TrajectoryTables(m)
    init = to_dense(new_all_ground(m))
    codes = np.zeros(n, dtype=np.int8)
    u = trajectory_uniforms(1, 0, trials, n)

    def run():
        kernels.mc_chunk(init, 0, codes, u, math.cos(0.3), math.sin(0.3), tables)

    return run


def bench_kraus(m, n):
    p = ModelParams(m, 0.3)

    def run():
        run_kraus(p, new_all_ground(m), "L" * n)

    return run


CASES = [
    ("rotate_sweep M=14 k=7 x1", lambda: bench_rotate(14, 7, 1)),
    ("rotate_sweep M=12 k=6 x924", lambda: bench_rotate(12, 6, 924)),
    ("mc_chunk M=10 N=100 T=256", lambda: bench_mc(10, 100, 256)),
    ("mc_chunk M=16 N=50 T=64", lambda: bench_mc(16, 50, 64)),
    ("run_kraus M=10 N=50", lambda: bench_kraus(10, 50)),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if "compiled" not in kernels.AVAILABLE:
        print("compiled extension not built; only the fallback can be timed")
    names = [b for b in ("compiled", "python") if b in kernels.AVAILABLE]
    print(f"{'case':<30}" + "".join(f"{b:>14}" for b in names) + ("   speedup" if len(names) == 2 else ""))
    for label, make in CASES:
        times = []
        for b in names:
            with kernels.backend(b):
                fn = make()
                fn()  # warm caches
                number = 1
                times.append(min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number)
        row = f"{label:<30}" + "".join(f"{t * 1e3:>12.2f}ms" for t in times)
        if len(times) == 2:
            row += f"   {times[1] / times[0]:7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
