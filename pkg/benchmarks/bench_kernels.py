"""Side-by-side timing of the numba kernels against the pure-numpy fallback.

The package picks its backend at import time from ``NLHB_BACKEND`` (see
``nlhb._kernels``); this script ignores that switch and imports both
implementations directly, so one run produces the comparison table.  Numba
functions are called once before timing so JIT compilation is not billed.

    python3 benchmarks/bench_kernels.py            # full sizes
    python3 benchmarks/bench_kernels.py --quick    # CI-sized workloads
"""

import argparse
import time

import numpy as np

from nlhb import _kernels
from nlhb.gf2core import RandomSource
from nlhb.nlfunc import DEFAULT_SPEC, _encoded


def best_of(func, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        func()
        times.append(time.perf_counter() - start)
    return min(times)


def workloads(quick: bool):
    rng = RandomSource(2024)
    offs, degs = _encoded(DEFAULT_SPEC)

    sizes = [(1024, 259), (4096, 1167)] if quick else [
        (4096, 259), (65536, 259), (4096, 1167), (16384, 1167)
    ]
    for batch, n in sizes:
        x = np.ascontiguousarray(rng.uniform_matrix(batch, n))
        d = n - DEFAULT_SPEC.p
        yield ("window map %dx%d" % (batch, n),
               lambda impl, x=x, d=d: impl(x, offs, degs, d),
               "apply_window_batch")

    rows = 1 << (14 if quick else 16)
    cols = 1164
    z = rng.uniform_matrix(rows, cols)
    target = rng.uniform_bits(cols)
    yield ("hamming rows %dx%d" % (rows, cols),
           lambda impl: impl(z, target),
           "hamming_rows")

    length = 1 << (18 if quick else 22)
    base = rng.u64(length).astype(np.int64)
    yield ("fwht 2^%d" % length.bit_length().__sub__(1),
           lambda impl: impl(base.copy()),
           "fwht")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    print("active package backend: %s" % _kernels.BACKEND)
    if not _kernels._HAVE_NUMBA:
        print("numba not importable; timing the numpy implementations only")

    header = "%-24s %12s %12s %9s" % ("workload", "numpy (ms)", "numba (ms)", "speedup")
    print(header)
    print("-" * len(header))
    for name, call, kernel in workloads(args.quick):
        np_impl = getattr(_kernels, kernel + "_numpy")
        t_np = best_of(lambda: call(np_impl), args.repeats)
        if _kernels._HAVE_NUMBA:
            nb_impl = getattr(_kernels, kernel + "_numba")
            call(nb_impl)  # compile outside the timed region
            t_nb = best_of(lambda: call(nb_impl), args.repeats)
            print("%-24s %12.3f %12.3f %8.1fx" % (name, t_np * 1e3, t_nb * 1e3, t_np / t_nb))
        else:
            print("%-24s %12.3f %12s %9s" % (name, t_np * 1e3, "-", "-"))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
