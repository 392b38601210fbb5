"""Time the compiled contraction kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--rank 16] [--extent 8] [--repeat 200]

Also times one fit_tt2cp sweep with each backend.
"""
import argparse
import timeit

import numpy as np

from tt2cp import _kernels_py, kernels
from tt2cp.bench import gen_random_kt
from tt2cp.convert import kt_to_tt
from tt2cp.fit import FitOptions, fit_tt2cp


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rank", type=int, default=16)
    ap.add_argument("--extent", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--complex", action="store_true")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    r, i = args.rank, args.extent
    dtype = complex if args.complex else float

    def rand(*shape):
        a = rng.standard_normal(shape)
        if args.complex:
            a = a + 1j * rng.standard_normal(shape)
        return a.astype(dtype)

    core, factor, psi = rand(r, i, r), rand(i, r), rand(r, r)
    print(f"backend available: {kernels.BACKEND}; R={r} I={i} dtype={np.dtype(dtype).name}")
    print(f"{'kernel':>16s} {'numpy [us]':>12s} {'compiled [us]':>14s} {'speedup':>8s}")
    for name in ("psi_right_step", "psi_left_step", "core_mttkrp"):
        py = getattr(_kernels_py, name)
        args3 = (core, factor, psi) if name != "core_mttkrp" else (core, psi, psi)
        t_py = _time(lambda: py(*args3), args.repeat)
        if kernels.BACKEND == "cython":
            comp = getattr(kernels, name)
            t_c = _time(lambda: comp(*args3), args.repeat)
            print(f"{name:>16s} {t_py * 1e6:12.1f} {t_c * 1e6:14.1f} {t_py / t_c:8.2f}")
        else:
            print(f"{name:>16s} {t_py * 1e6:12.1f} {'n/a':>14s}")

    k = gen_random_kt(8, 8, r, seed=1)
    x = kt_to_tt(k)
    opts = FitOptions(max_sweeps=5, tol=1e-300, init="random")
    saved = kernels._compiled
    results = {}
    for label, compiled in (("numpy", None), ("cython", saved)):
        if label == "cython" and saved is None:
            continue
        kernels._compiled = compiled
        results[label] = _time(lambda: fit_tt2cp(x, r, opts), 3) / 5
    kernels._compiled = saved
    for label, t in results.items():
        print(f"fit_tt2cp sweep (N=8, I=8, R={r}) with {label}: {t * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
