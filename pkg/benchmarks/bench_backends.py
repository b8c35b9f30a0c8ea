"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_backends.py [--quick]

Covers the two hot loops: per-sample SGD epochs (the dominant cost of the
2-d experiment) and the sparse multiply-clamp diffusion sweep.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from diffal import _backend  # noqa: E402
from diffal.data import PoolState  # noqa: E402
from diffal.diffusion import init_signal  # noqa: E402
from diffal.knn_graph import build_knn_graph, compute_kernel  # noqa: E402


def time_best(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sgd(kernels, n=512, epochs=100, widths=(2, 30, 30, 2)):
    rng = np.random.default_rng(0)
    x = rng.random((n, widths[0]))
    y = rng.integers(0, widths[-1], n)
    order = np.concatenate([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
    widths_arr = np.asarray(widths, dtype=np.int64)
    nw = sum(a * b for a, b in zip(widths[:-1], widths[1:]))
    nb = sum(widths[1:])
    w0 = rng.uniform(-0.3, 0.3, nw)
    b0 = rng.uniform(-0.3, 0.3, nb)

    def run():
        w, b = w0.copy(), b0.copy()
        kernels.sgd_epochs(widths_arr, w, b, np.zeros_like(w), np.zeros_like(b),
                           x, y, order, epochs, 0.001, 0.9)

    return time_best(run, repeats=3), n * epochs


def bench_diffuse(kernels, n=20000, k=10, t=5, c=2):
    rng = np.random.default_rng(1)
    kernel = compute_kernel(build_knn_graph(rng.random((n, 4)), k))
    labeled = rng.choice(n, size=100, replace=False)
    pool = PoolState(n, labeled, rng.integers(0, c, 100))
    sig = init_signal(pool, c)
    m = kernel.m
    indptr = m.indptr.astype(np.int64)
    indices = m.indices.astype(np.int64)
    mask = sig.clamp_mask.astype(np.uint8)

    def run():
        kernels.csr_multiply_clamp(indptr, indices, m.data, sig.chi.copy(),
                                   mask, sig.clamp_values, t)

    return time_best(run), n * k * t * c


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args()

    names = ["python"]
    if _backend.BACKEND == "native":
        names.insert(0, "native")
    else:
        print("note: compiled backend unavailable, benchmarking the fallback only")

    sgd_kwargs = dict(n=128, epochs=20) if args.quick else {}
    diff_kwargs = dict(n=4000) if args.quick else {}

    rows = []
    for name in names:
        kernels = _backend.get_kernels(name)
        t_sgd, updates = bench_sgd(kernels, **sgd_kwargs)
        t_diff, ops = bench_diffuse(kernels, **diff_kwargs)
        rows.append((name, t_sgd, updates / t_sgd, t_diff))

    print(f"{'backend':<8} {'sgd epochs':>12} {'updates/s':>12} {'diffuse T=5':>12}")
    for name, t_sgd, rate, t_diff in rows:
        print(f"{name:<8} {t_sgd * 1e3:>10.1f}ms {rate:>12.0f} {t_diff * 1e3:>10.2f}ms")
    if len(rows) == 2:
        print(f"speedup: sgd {rows[1][1] / rows[0][1]:.1f}x, "
              f"diffuse {rows[1][3] / rows[0][3]:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
