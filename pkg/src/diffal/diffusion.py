"""Clamped label diffusion over a row-stochastic kernel.

The signal chi holds one channel per class with entries in [-1, 1]; labeled
rows are pinned to +/-1 and re-imposed after every averaging step.  The
fixed point of that iteration solves the Laplacian system
``L_uu chi_u = W_ul chi_l`` per channel, and the iteration itself is exactly
a Jacobi sweep for it, which is what the solver and the convergence
diagnostic below exploit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _backend
from .data import PoolState
from .errors import (
    ConfigurationError,
    NonConvergenceError,
    ShapeError,
    SingularSystemError,
)
from .knn_graph import Kernel, weak_components


@dataclass
class DiffusionSignal:
    """Per-class soft labels with a clamp over the labeled rows."""

    chi: np.ndarray           # (n, c) float64 in [-1, 1]
    clamp_mask: np.ndarray    # (n,) bool
    clamp_values: np.ndarray  # (n, c) float64, zero off-mask

    def __post_init__(self):
        self.chi = np.array(self.chi, dtype=np.float64, order="C")
        self.clamp_mask = np.asarray(self.clamp_mask, dtype=bool)
        self.clamp_values = np.ascontiguousarray(self.clamp_values, dtype=np.float64)
        if self.chi.ndim != 2:
            raise ShapeError(f"chi must be 2-d, got shape {self.chi.shape}")
        n = self.chi.shape[0]
        if self.clamp_mask.shape != (n,) or self.clamp_values.shape != self.chi.shape:
            raise ShapeError("clamp mask/values do not match chi")
        if np.abs(self.chi).max(initial=0.0) > 1.0 + 1e-9:
            raise ConfigurationError("chi entries must lie in [-1, 1]")
        self.chi[self.clamp_mask] = self.clamp_values[self.clamp_mask]

    @property
    def n(self) -> int:
        return self.chi.shape[0]

    @property
    def num_classes(self) -> int:
        return self.chi.shape[1]

    def copy(self) -> "DiffusionSignal":
        return DiffusionSignal(self.chi.copy(), self.clamp_mask.copy(), self.clamp_values.copy())


def init_signal(pool: PoolState, num_classes: int, mode: str = "hard",
                probs: np.ndarray | None = None) -> DiffusionSignal:
    """Initial signal: labeled rows +1 on their class and -1 elsewhere.

    Unlabeled rows start at zero (``hard``) or at ``2*probs - 1`` (``soft``,
    from model posteriors).
    """
    if num_classes < 2:
        raise ConfigurationError(f"num_classes must be >= 2, got {num_classes}")
    if np.any(pool.labeled_labels >= num_classes):
        raise ConfigurationError("labeled class id outside [0, num_classes)")
    n = pool.n_total
    if mode == "hard":
        chi = np.zeros((n, num_classes))
    elif mode == "soft":
        if probs is None:
            raise ConfigurationError("soft initialization requires model posteriors")
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (n, num_classes):
            raise ShapeError(f"probs must have shape ({n}, {num_classes}), got {probs.shape}")
        if np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
            raise ConfigurationError("probs rows must sum to 1 within 1e-6")
        chi = 2.0 * probs - 1.0
    else:
        raise ConfigurationError(f"unknown init mode {mode!r} (hard|soft)")
    clamp_values = np.zeros((n, num_classes))
    mask = np.zeros(n, dtype=bool)
    li, ly = pool.labeled_indices, pool.labeled_labels
    mask[li] = True
    clamp_values[li] = -1.0
    clamp_values[li, ly] = 1.0
    chi[mask] = clamp_values[mask]
    return DiffusionSignal(chi, mask, clamp_values)


def signal_from_labels(n: int, indices, labels, num_classes: int, mode: str = "hard",
                       probs: np.ndarray | None = None) -> DiffusionSignal:
    """Same as :func:`init_signal` but from raw index/label arrays."""
    pool = PoolState(n, np.asarray(indices, dtype=np.int64),
                     np.asarray(labels, dtype=np.int64))
    return init_signal(pool, num_classes, mode=mode, probs=probs)


def _check_dims(kernel: Kernel, signal: DiffusionSignal) -> None:
    if kernel.n != signal.n:
        raise ShapeError(f"kernel is {kernel.n}x{kernel.n} but signal has {signal.n} rows")


def diffuse(kernel: Kernel, signal: DiffusionSignal, t: int) -> DiffusionSignal:
    """Run exactly ``t`` multiply-then-clamp steps; ``t=0`` returns a copy."""
    if t < 0:
        raise ConfigurationError(f"t must be >= 0, got {t}")
    _check_dims(kernel, signal)
    out = signal.copy()
    if t == 0:
        return out
    m = kernel.m
    chi = _backend.csr_multiply_clamp(
        m.indptr.astype(np.int64),
        m.indices.astype(np.int64),
        m.data,
        out.chi,
        out.clamp_mask.astype(np.uint8),
        out.clamp_values,
        int(t),
    )
    out.chi = np.ascontiguousarray(chi)
    return out


def _split_blocks(kernel: Kernel, mask: np.ndarray):
    u = np.flatnonzero(~mask)
    l = np.flatnonzero(mask)
    w = kernel.weights.tocsr()
    w_uu = w[u][:, u]
    w_ul = w[u][:, l]
    d_uu = kernel.degrees[u]
    return u, l, w_uu, w_ul, d_uu


def _require_labeled_components(kernel: Kernel, mask: np.ndarray) -> None:
    labels, count = weak_components(kernel.weights)
    if count == 1:
        if mask.any():
            return
        raise SingularSystemError("component 0 contains no labeled point")
    for comp in range(count):
        members = labels == comp
        if not mask[members].any() and (~mask[members]).any():
            size = int(members.sum())
            first = int(np.argmax(members))
            raise SingularSystemError(
                f"component {comp} ({size} points, e.g. index {first}) "
                "contains no labeled point"
            )


def exact_fixed_point(kernel: Kernel, signal: DiffusionSignal, tol: float = 1e-8,
                      max_iter: int | None = None, method: str = "jacobi",
                      reg: float = 0.0) -> DiffusionSignal:
    """Solve the clamped fixed point ``L_uu chi_u = W_ul chi_l`` per channel.

    ``jacobi`` (the default) runs multiply-and-rescale sweeps with early exit
    and raises NonConvergenceError past ``max_iter`` (default ``10 * n``,
    floored at 1000 so tiny graphs get enough sweeps).  ``direct`` factorizes
    the sparse block instead, which pays off when the iteration mixes slowly
    (spectral radius near one).  Either way the returned chi satisfies
    ``||A chi_u - W_ul chi_l||_inf <= tol`` where ``A = L_uu + reg*I``;
    ``reg > 0`` trades exactness of the unregularized system for guaranteed
    diagonal dominance (its solution vanishes on unlabeled blocks the labeled
    set cannot reach, matching the zero-initialized iteration's limit).
    """
    _check_dims(kernel, signal)
    if method not in ("jacobi", "direct"):
        raise ConfigurationError(f"unknown method {method!r} (jacobi|direct)")
    if reg < 0.0:
        raise ConfigurationError(f"reg must be >= 0, got {reg}")
    mask = signal.clamp_mask
    out = signal.copy()
    if not (~mask).any():
        return out  # fully labeled: the clamp is the answer, zero iterations
    if reg == 0.0:
        # the unregularized system is singular on components the labeled set
        # never touches; with reg > 0 those components just settle at zero
        _require_labeled_components(kernel, mask)
    u, _, w_uu, w_ul, d_uu = _split_blocks(kernel, mask)
    b = w_ul @ out.clamp_values[mask]
    diag = d_uu + reg

    if method == "direct":
        a = sp.diags(diag) - w_uu
        x = sp.linalg.spsolve(a.tocsc(), b)
        if x.ndim == 1:
            x = x[:, None]
        if not np.all(np.isfinite(x)):
            raise SingularSystemError(
                "direct solve produced non-finite values; the unlabeled block "
                "is singular (try reg > 0)"
            )
        residual = float(np.abs(diag[:, None] * x - (w_uu @ x + b)).max())
        if residual > tol:
            raise NonConvergenceError(
                f"direct solve residual {residual:.3e} exceeds tol={tol}",
                residual=residual,
            )
        out.chi[u] = x
        return out

    if max_iter is None:
        max_iter = max(10 * kernel.n, 1000)
    x = out.chi[u]
    scale = diag[:, None]
    s = w_uu @ x + b
    residual = float(np.abs(scale * x - s).max())
    if residual <= tol:
        out.chi[u] = x
        return out
    for _ in range(max_iter):
        x = s / scale
        s = w_uu @ x + b
        residual = float(np.abs(scale * x - s).max())
        if residual <= tol:
            out.chi[u] = x
            return out
    raise NonConvergenceError(
        f"Jacobi sweeps did not reach tol={tol} within {max_iter} iterations "
        f"(residual {residual:.3e})",
        residual=residual,
    )


def energy(kernel: Kernel, signal: DiffusionSignal) -> np.ndarray:
    """Per-channel quadratic form 0.5 * sum_ij W_ij (chi_i - chi_j)^2 over stored edges."""
    _check_dims(kernel, signal)
    coo = kernel.weights.tocoo()
    diff = signal.chi[coo.row] - signal.chi[coo.col]
    return 0.5 * (coo.data[:, None] * diff * diff).sum(axis=0)


def predict_labels(signal: DiffusionSignal) -> np.ndarray:
    """Argmax over channels; ties resolve to the lowest class index."""
    return np.argmax(signal.chi, axis=1)


def dump_signal_csv(signal: DiffusionSignal, path) -> None:
    """Debug dump: one row (i, c, value) per signal entry."""
    with open(path, "w", newline="") as fh:
        fh.write("i,c,value\n")
        for i in range(signal.n):
            for c in range(signal.num_classes):
                fh.write(f"{i},{c},{float(signal.chi[i, c])!r}\n")


@dataclass
class ConvergenceDiagnostic:
    """Certificate data for the clamped iteration on the current labeled set."""

    inf_norm: float                  # ||B_J||_inf for A = L_uu + eps*I
    spectral_radius_estimate: float  # power-iteration estimate of rho(D_uu^-1 W_uu)

    @property
    def certifies_convergence(self) -> bool:
        return self.spectral_radius_estimate < 1.0 - 1e-6


def convergence_diagnostic(kernel: Kernel, pool: PoolState, eps: float = 1e-6,
                           iters: int = 256) -> ConvergenceDiagnostic:
    """Estimate how contractive diffusion is under the current labeled set.

    A spectral-radius estimate below one certifies that the clamped iteration
    converges; the companion infinity norm covers the regularized system
    ``L_uu + eps*I`` whose diagonal dominance is strict for any eps > 0.
    """
    if pool.n_labeled < 1 or pool.n_unlabeled < 1:
        raise ConfigurationError("diagnostic needs at least one labeled and one unlabeled point")
    mask = pool.labeled_mask()
    _, _, w_uu, _, d_uu = _split_blocks(kernel, mask)
    row_sums = np.asarray(w_uu.sum(axis=1)).ravel()
    inf_norm = float((row_sums / (d_uu + eps)).max())

    n_u = d_uu.size
    x = np.full(n_u, 1.0 / np.sqrt(n_u))
    log_ratios: list[float] = []
    for _ in range(iters):
        y = (w_uu @ x) / d_uu
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return ConvergenceDiagnostic(inf_norm, 0.0)
        log_ratios.append(np.log(norm))
        x = y / norm
    window = min(len(log_ratios), 128)
    window -= window % 2  # even window averages out alternating-sign modes
    window = max(window, 1)
    estimate = float(np.exp(np.mean(log_ratios[-window:])))
    return ConvergenceDiagnostic(inf_norm, estimate)
