# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: sparse multiply-clamp sweeps and per-sample SGD epochs.

Semantics mirror `_pykernels`; the python fallback is the reference for both.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log
from libc.string cimport memcpy

cnp.import_array()


def csr_multiply_clamp(long long[::1] indptr, long long[::1] indices, double[::1] data,
                       double[:, ::1] chi, unsigned char[::1] clamp_mask,
                       double[:, ::1] clamp_values, int steps):
    """Apply ``steps`` rounds of (row-stochastic multiply, re-clamp) in place."""
    cdef Py_ssize_t n = chi.shape[0]
    cdef Py_ssize_t c = chi.shape[1]
    buf_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] buf = buf_arr
    cdef double[:, ::1] cur = chi
    cdef double[:, ::1] nxt = buf
    cdef double[:, ::1] tmp
    cdef Py_ssize_t i, cc, t
    cdef long long p, start, stop
    cdef double acc
    for t in range(steps):
        for i in range(n):
            if clamp_mask[i]:
                for cc in range(c):
                    nxt[i, cc] = clamp_values[i, cc]
            else:
                start = indptr[i]
                stop = indptr[i + 1]
                for cc in range(c):
                    acc = 0.0
                    for p in range(start, stop):
                        acc += data[p] * cur[indices[p], cc]
                    nxt[i, cc] = acc
        tmp = cur
        cur = nxt
        nxt = tmp
    if steps % 2 == 1:
        memcpy(&chi[0, 0], &cur[0, 0], n * c * sizeof(double))
    return np.asarray(chi)


def sgd_epochs(long long[::1] widths,
               double[::1] wflat, double[::1] bflat,
               double[::1] vwflat, double[::1] vbflat,
               double[:, ::1] x, long long[::1] y,
               long long[::1] order, int epochs,
               double lr, double momentum):
    """Per-sample SGD with momentum; parameters updated in place.

    Returns per-epoch mean cross-entropy, each sample measured pre-update.
    """
    cdef Py_ssize_t n_layers = widths.shape[0] - 1
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t l, maxw = 0
    for l in range(widths.shape[0]):
        if widths[l] > maxw:
            maxw = widths[l]

    w_off_arr = np.zeros(n_layers + 1, dtype=np.int64)
    b_off_arr = np.zeros(n_layers + 1, dtype=np.int64)
    for l in range(n_layers):
        w_off_arr[l + 1] = w_off_arr[l] + int(widths[l]) * int(widths[l + 1])
        b_off_arr[l + 1] = b_off_arr[l] + int(widths[l + 1])
    cdef long long[::1] w_off = w_off_arr
    cdef long long[::1] b_off = b_off_arr

    acts_arr = np.zeros((n_layers + 1, maxw), dtype=np.float64)
    delta_arr = np.zeros(maxw, dtype=np.float64)
    delta_prev_arr = np.zeros(maxw, dtype=np.float64)
    losses_arr = np.zeros(epochs, dtype=np.float64)
    cdef double[:, ::1] acts = acts_arr
    cdef double[::1] delta = delta_arr
    cdef double[::1] delta_prev = delta_prev_arr
    cdef double[::1] losses = losses_arr
    cdef double[::1] dtmp

    cdef Py_ssize_t e, s, i, j, kk, din, dout
    cdef long long base, wo, bo
    cdef Py_ssize_t c_out = widths[n_layers]
    cdef double av, apv, zmax, zsum, total, dp, pv

    for e in range(epochs):
        total = 0.0
        for s in range(n):
            i = order[e * n + s]
            # forward
            for j in range(widths[0]):
                acts[0, j] = x[i, j]
            for l in range(n_layers):
                din = widths[l]
                dout = widths[l + 1]
                wo = w_off[l]
                bo = b_off[l]
                for j in range(dout):
                    acts[l + 1, j] = bflat[bo + j]
                for kk in range(din):
                    av = acts[l, kk]
                    if av != 0.0:
                        base = wo + kk * dout
                        for j in range(dout):
                            acts[l + 1, j] += av * wflat[base + j]
                if l < n_layers - 1:
                    for j in range(dout):
                        if acts[l + 1, j] < 0.0:
                            acts[l + 1, j] = 0.0
            # softmax on the output row
            zmax = acts[n_layers, 0]
            for j in range(1, c_out):
                if acts[n_layers, j] > zmax:
                    zmax = acts[n_layers, j]
            zsum = 0.0
            for j in range(c_out):
                acts[n_layers, j] = exp(acts[n_layers, j] - zmax)
                zsum += acts[n_layers, j]
            for j in range(c_out):
                acts[n_layers, j] /= zsum
            pv = acts[n_layers, y[i]]
            if pv < 1e-300:
                pv = 1e-300
            total += -log(pv)
            # backward
            for j in range(c_out):
                delta[j] = acts[n_layers, j]
            delta[y[i]] -= 1.0
            for l in range(n_layers - 1, -1, -1):
                din = widths[l]
                dout = widths[l + 1]
                wo = w_off[l]
                bo = b_off[l]
                if l > 0:
                    for kk in range(din):
                        apv = acts[l, kk]
                        if apv > 0.0:
                            base = wo + kk * dout
                            dp = 0.0
                            for j in range(dout):
                                dp += wflat[base + j] * delta[j]
                            delta_prev[kk] = dp
                        else:
                            delta_prev[kk] = 0.0
                for kk in range(din):
                    apv = acts[l, kk]
                    base = wo + kk * dout
                    for j in range(dout):
                        vwflat[base + j] = momentum * vwflat[base + j] + apv * delta[j]
                        wflat[base + j] -= lr * vwflat[base + j]
                for j in range(dout):
                    vbflat[bo + j] = momentum * vbflat[bo + j] + delta[j]
                    bflat[bo + j] -= lr * vbflat[bo + j]
                if l > 0:
                    dtmp = delta
                    delta = delta_prev
                    delta_prev = dtmp
        losses[e] = total / n
    return losses_arr
