"""Time the mixture log-density/score kernel under both backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--points 200000]

Reports the best-of-``repeat`` time per backend for a few (dim, components)
shapes, then one end-to-end estimator call (2-D mixture entropy by
quadrature and a scalar Fisher information) under each backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from extremal import kernels
from extremal.entropy import mixture_entropy
from extremal.fisher import fisher_matrix
from extremal.mixture import GaussianMixture

SHAPES = [(1, 2), (1, 8), (2, 4), (2, 16), (4, 8)]


def random_mixture(rng, n, k):
    covs = []
    for _ in range(k):
        a = rng.standard_normal((n, n))
        covs.append(a @ a.T + 0.5 * np.eye(n))
    return GaussianMixture(rng.dirichlet(np.ones(k)), rng.normal(0, 2, (k, n)), np.array(covs))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernel(points, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n, k in SHAPES:
        m = random_mixture(rng, n, k)
        prep = kernels.prepare(m.weights, m.means, m.covs)
        x = rng.normal(0, 3, (points, n))
        row = {"shape": f"n={n} k={k}"}
        for name in ("numpy", "numba"):
            kernels.set_backend(name)
            kernels.logpdf_score(x[:10], prep)  # compile / warm up
            row[name] = best_of(lambda: kernels.logpdf_score(x, prep), repeat)
        rows.append(row)
    return rows


def bench_estimators(repeat):
    a = GaussianMixture([0.2, 0.5, 0.3], [[-1.5], [0.2], [1.8]], [[[0.4]], [[0.9]], [[0.3]]])
    m2 = a.product(GaussianMixture.symmetric_pair(1.0, 0.6))
    rows = []
    for label, fn in (("2-D entropy (quadrature)", lambda: mixture_entropy(m2)),
                      ("1-D Fisher (quadrature)", lambda: fisher_matrix(a))):
        row = {"shape": label}
        for name in ("numpy", "numba"):
            kernels.set_backend(name)
            fn()
            row[name] = best_of(fn, repeat)
        rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=200_000)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    prev = kernels.backend()
    try:
        rows = bench_kernel(args.points, args.repeat) + bench_estimators(max(1, args.repeat // 2))
    finally:
        kernels.set_backend(prev)
    print(f"{'case':28s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speedup':>8s}")
    for r in rows:
        print(f"{r['shape']:28s} {r['numpy']:11.4f} {r['numba']:11.4f} {r['numpy'] / r['numba']:7.1f}x")


if __name__ == "__main__":
    main()
