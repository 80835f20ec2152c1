"""Compare the compiled and numpy kernel backends on quadrature-sized workloads.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from symtest import _kernels_py
from symtest.ensembles import exact_quadrature, haar_unitary

try:
    from symtest import _kernels as compiled
except ImportError:
    compiled = None


def workloads():
    rng = np.random.default_rng(0)
    for m in (2, 4, 6):
        us = exact_quadrature(haar_unitary(), 2 * m).unitaries
        psi = rng.standard_normal(2 ** m) + 1j * rng.standard_normal(2 ** m)
        psi /= np.linalg.norm(psi)
        yield "expectations m=%d (%d nodes)" % (m, len(us)), "expectations", (us, m, psi)
        yield "apply_power_batch m=%d" % m, "apply_power_batch", (us, m, psi)
        if m <= 4:
            yield "tensor_power_batch m=%d" % m, "tensor_power_batch", (us, m)
    u = exact_quadrature(haar_unitary(), 2).unitaries[3]
    cols = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    yield "apply_power m=6, 64 columns", "apply_power", (u, 6, cols)


def best(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    n, _ = timer.autorange()
    return min(timer.repeat(repeat, n)) / n


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if compiled is None:
        print("compiled extension not built; only the numpy backend is available")
    print("%-34s %12s %12s %8s" % ("workload", "numpy [ms]", "cython [ms]", "speedup"))
    for label, name, fargs in workloads():
        t_py = best(getattr(_kernels_py, name), fargs, args.repeat)
        if compiled is None:
            print("%-34s %12.3f %12s %8s" % (label, 1e3 * t_py, "-", "-"))
            continue
        t_c = best(getattr(compiled, name), fargs, args.repeat)
        ref, out = getattr(_kernels_py, name)(*fargs), getattr(compiled, name)(*fargs)
        assert np.abs(ref - out).max() < 1e-12
        print("%-34s %12.3f %12.3f %7.1fx" % (label, 1e3 * t_py, 1e3 * t_c, t_py / t_c))


if __name__ == "__main__":
    main()
