"""Pure-numpy implementations of the hot kernels.

These are the fallback backend when the compiled extension is unavailable.
Semantics (update order, tie handling, clamp placement) match `_native`
exactly; only speed differs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def csr_multiply_clamp(indptr, indices, data, chi, clamp_mask, clamp_values, steps):
    """Apply ``steps`` rounds of (sparse multiply, re-clamp) to ``chi``."""
    n = chi.shape[0]
    mat = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    mask = clamp_mask.astype(bool)
    for _ in range(steps):
        chi = mat @ chi
        chi[mask] = clamp_values[mask]
    return np.ascontiguousarray(chi)


def sgd_epochs(widths, wflat, bflat, vwflat, vbflat, x, y, order, epochs, lr, momentum):
    """Per-sample SGD with momentum over ``epochs`` pre-shuffled passes.

    Parameters live in flat buffers (row-major weight blocks then bias blocks,
    in layer order) and are updated in place.  Returns the per-epoch mean
    cross-entropy of each sample as visited, measured before its update.
    """
    widths = np.asarray(widths, dtype=np.int64)
    n_layers = widths.size - 1
    w_views, b_views, vw_views, vb_views = [], [], [], []
    wo = bo = 0
    for l in range(n_layers):
        din, dout = int(widths[l]), int(widths[l + 1])
        w_views.append(wflat[wo:wo + din * dout].reshape(din, dout))
        vw_views.append(vwflat[wo:wo + din * dout].reshape(din, dout))
        b_views.append(bflat[bo:bo + dout])
        vb_views.append(vbflat[bo:bo + dout])
        wo += din * dout
        bo += dout
    n = x.shape[0]
    losses = np.zeros(epochs, dtype=np.float64)
    acts = [None] * (n_layers + 1)
    for e in range(epochs):
        total = 0.0
        for s in range(n):
            i = int(order[e * n + s])
            a = x[i]
            acts[0] = a
            for l in range(n_layers - 1):
                a = np.maximum(a @ w_views[l] + b_views[l], 0.0)
                acts[l + 1] = a
            z = a @ w_views[-1] + b_views[-1]
            z = z - z.max()
            p = np.exp(z)
            p /= p.sum()
            total += -np.log(max(p[y[i]], 1e-300))
            delta = p
            delta[y[i]] -= 1.0
            for l in range(n_layers - 1, -1, -1):
                a_prev = acts[l]
                if l > 0:
                    delta_prev = (w_views[l] @ delta) * (a_prev > 0.0)
                vw_views[l] *= momentum
                vw_views[l] += np.outer(a_prev, delta)
                w_views[l] -= lr * vw_views[l]
                vb_views[l] *= momentum
                vb_views[l] += delta
                b_views[l] -= lr * vb_views[l]
                if l > 0:
                    delta = delta_prev
        losses[e] = total / n
    return losses
