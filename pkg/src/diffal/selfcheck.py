"""Built-in verification suite: solver-vs-oracle agreement on random graphs.

The checks here mirror the heart of the test suite so a deployed build can
be validated from the command line (``diffal selfcheck``).  The instance
generator and the dense linear-solve oracle live here so the tests and the
CLI share one implementation.
"""

from __future__ import annotations

import time

import numpy as np

from .data import PoolState
from .diffusion import (
    DiffusionSignal,
    convergence_diagnostic,
    diffuse,
    exact_fixed_point,
    init_signal,
)
from .knn_graph import Kernel, build_knn_graph, compute_kernel, connectivity_report
from .model import MlpModel, gradient_check


def _all_reach_labeled(kernel: Kernel, labeled_mask: np.ndarray) -> bool:
    """True when every unlabeled node has a directed path to a labeled node.

    Weak connectivity alone does not guarantee this: an unlabeled cluster
    whose K out-edges all stay internal is row-stochastic on its own and the
    clamped iteration never drains it.
    """
    adj = kernel.weights
    reach = labeled_mask.copy()
    for _ in range(kernel.n):
        grown = reach | (adj @ reach.astype(np.float64) > 0.0)
        if (grown == reach).all():
            break
        reach = grown
    return bool(reach.all())


def random_connected_instance(seed: int):
    """A random connected K-NN kernel plus a labeled/unlabeled split.

    Roughly 40% of points carry labels (redrawn until every unlabeled node
    can reach one along directed edges) so the unlabeled block is strongly
    substochastic and plain diffusion converges well inside T=500.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(12, 51))
    k = int(rng.choice([2, 3, 5]))
    c = int(rng.choice([2, 3]))
    for _ in range(64):
        points = rng.random((n, 2))
        graph = build_knn_graph(points, k)
        _, count = connectivity_report(graph)
        if count != 1:
            continue
        kernel = compute_kernel(graph)
        n_labeled = max(2, int(round(0.4 * n)))
        for _ in range(16):
            labeled = np.sort(rng.choice(n, size=n_labeled, replace=False))
            mask = np.zeros(n, dtype=bool)
            mask[labeled] = True
            if _all_reach_labeled(kernel, mask):
                labels = rng.integers(0, c, size=n_labeled)
                return kernel, PoolState(n, labeled, labels), c
    raise RuntimeError(f"could not draw a usable instance for seed {seed}")


def dense_fixed_point(kernel: Kernel, signal: DiffusionSignal) -> np.ndarray:
    """Independent oracle: direct dense solve of the Laplacian block system."""
    w = kernel.weights.toarray()
    deg = kernel.degrees
    lap = np.diag(deg) - w
    mask = signal.clamp_mask
    u = np.flatnonzero(~mask)
    l = np.flatnonzero(mask)
    chi = signal.clamp_values.copy()
    if u.size:
        rhs = w[np.ix_(u, l)] @ signal.clamp_values[l]
        chi[u] = np.linalg.solve(lap[np.ix_(u, u)], rhs)
    return chi


def residual_inf_norm(kernel: Kernel, signal: DiffusionSignal, chi: np.ndarray) -> float:
    """||L_uu chi_u - W_ul chi_l||_inf computed densely, independent of the solver."""
    w = kernel.weights.toarray()
    lap = np.diag(kernel.degrees) - w
    mask = signal.clamp_mask
    u = np.flatnonzero(~mask)
    l = np.flatnonzero(mask)
    if not u.size:
        return 0.0
    lhs = lap[np.ix_(u, u)] @ chi[u]
    rhs = w[np.ix_(u, l)] @ signal.clamp_values[l]
    return float(np.abs(lhs - rhs).max())


def check_oracle_equivalence(n_instances: int = 50, seed_base: int = 500):
    """diffuse(T=500) and the Jacobi solver vs the dense oracle."""
    worst_diff = 0.0
    worst_res = 0.0
    for i in range(n_instances):
        kernel, pool, c = random_connected_instance(seed_base + i)
        signal = init_signal(pool, c, mode="hard")
        oracle_chi = dense_fixed_point(kernel, signal)
        iterated = diffuse(kernel, signal, 500)
        worst_diff = max(worst_diff, float(np.abs(iterated.chi - oracle_chi).max()))
        solved = exact_fixed_point(kernel, signal)
        worst_res = max(worst_res, residual_inf_norm(kernel, signal, solved.chi))
    return worst_diff, worst_res


def check_diagnostics(n_instances: int = 50, seed_base: int = 500):
    """Convergence certificates on the same instances."""
    worst_rho = 0.0
    worst_norm = 0.0
    for i in range(n_instances):
        kernel, pool, _ = random_connected_instance(seed_base + i)
        diag = convergence_diagnostic(kernel, pool, eps=1e-6)
        worst_rho = max(worst_rho, diag.spectral_radius_estimate)
        worst_norm = max(worst_norm, diag.inf_norm)
    return worst_rho, worst_norm


def run_selfcheck(quick: bool = False) -> bool:
    n_instances = 10 if quick else 50
    ok = True

    def report(name: str, passed: bool, detail: str) -> None:
        nonlocal ok
        ok = ok and passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    t0 = time.perf_counter()
    worst_diff, worst_res = check_oracle_equivalence(n_instances)
    report(
        "oracle-equivalence",
        worst_diff < 1e-6 and worst_res <= 1e-8,
        f"max |diffuse(500) - dense solve| = {worst_diff:.2e}, "
        f"max solver residual = {worst_res:.2e} over {n_instances} graphs "
        f"({time.perf_counter() - t0:.1f}s)",
    )

    worst_rho, worst_norm = check_diagnostics(n_instances)
    report(
        "convergence-diagnostic",
        worst_rho < 1.0 and worst_norm < 1.0,
        f"max spectral-radius estimate = {worst_rho:.4f}, "
        f"max ||B_J||inf = 1 - {1.0 - worst_norm:.2e}",
    )

    rng = np.random.default_rng(0)
    pts = rng.integers(0, 1024, size=(300, 4)).astype(np.float64)
    graph = build_knn_graph(pts, 6)
    kernel = compute_kernel(graph)
    row_err = float(np.abs(kernel.m.sum(axis=1) - 1.0).max())
    scale_ok = True
    for alpha in (0.5, 3.0, 100.0):
        k2 = compute_kernel(build_knn_graph(pts * alpha, 6))
        scale_ok = scale_ok and (k2.m != kernel.m).nnz == 0
    report(
        "kernel-properties",
        row_err < 1e-12 and scale_ok,
        f"max row-sum error = {row_err:.2e}, scale-invariant = {scale_ok}",
    )

    pts2 = rng.random((400, 3))
    brute = build_knn_graph(pts2, 5, method="brute")
    tree = build_knn_graph(pts2, 5, method="tree")
    same = bool(np.array_equal(brute.neighbors, tree.neighbors)
                and np.array_equal(brute.distances, tree.distances))
    report("knn-methods", same, "brute and tree constructions identical")

    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    err = gradient_check(MlpModel.create([2, 30, 30, 2], seed=0), x, y)
    report("gradient-check", err < 1e-4, f"max relative error = {err:.2e}")

    return ok
