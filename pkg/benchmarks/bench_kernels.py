"""Time the numpy and numba kernel backends on representative sizes.

Usage::

    python benchmarks/bench_kernels.py [--repeat 200]

The first numba call (compilation) is reported separately and excluded from
the per-call timings. Both backends are checked for agreement before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from idbpd import kernels


def _mlp_case(rng, n, d, h, k):
    X = rng.standard_normal((n, d))
    W1, b1 = 0.3 * rng.standard_normal((h, d)), 0.1 * rng.standard_normal(h)
    V, c = 0.3 * rng.standard_normal((k, h)), 0.1 * rng.standard_normal(k)
    T = np.eye(k)[rng.integers(0, k, n)]
    s = rng.dirichlet(np.ones(n))
    return (lambda kern: kern.mlp_forward(X, W1, b1, V, c, T),
            lambda kern: kern.mlp_backward(X, *kern.mlp_forward(X, W1, b1, V, c, T)[1:], T, V, s))


def _cases(rng):
    cases = {}
    for n in (3, 300, 2000):
        v = rng.standard_normal(n)
        cases[f"project_simplex({n})"] = lambda kern, v=v: kern.project_simplex(v)
    for n in (3, 500):
        g1, g2 = rng.standard_normal(n), rng.standard_normal(n)
        cases[f"direction({n})"] = lambda kern, g1=g1, g2=g2: kern.direction(g1, g2, 0.3, 0.1)
    for n, d, h, k in ((50, 4, 4, 2), (600, 8, 16, 3)):
        fwd, bwd = _mlp_case(rng, n, d, h, k)
        cases[f"mlp_forward({n}x{d}, h={h})"] = fwd
        cases[f"mlp_backward({n}x{d}, h={h})"] = bwd
    return cases


def _time(fn, repeat):
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def _close(a, b):
    if isinstance(a, tuple):
        return all(_close(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = _cases(rng)
    if kernels.NUMBA_KERNELS is None:
        print("numba unavailable: timing the numpy backend only")
    print(f"{'kernel':28s} {'numpy us':>10s} {'numba us':>10s} {'speedup':>8s} {'compile s':>10s}")
    for name, call in cases.items():
        t_np = _time(lambda: call(kernels.NUMPY_KERNELS), args.repeat)
        if kernels.NUMBA_KERNELS is None:
            print(f"{name:28s} {t_np * 1e6:10.1f}")
            continue
        t0 = time.perf_counter()
        out_nb = call(kernels.NUMBA_KERNELS)
        compile_s = time.perf_counter() - t0
        if not _close(call(kernels.NUMPY_KERNELS), out_nb):
            raise SystemExit(f"{name}: backends disagree")
        t_nb = _time(lambda: call(kernels.NUMBA_KERNELS), args.repeat)
        print(f"{name:28s} {t_np * 1e6:10.1f} {t_nb * 1e6:10.1f} {t_np / t_nb:8.2f} {compile_s:10.3f}")


if __name__ == "__main__":
    main()
