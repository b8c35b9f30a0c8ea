import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from diffal import _backend

native_only = pytest.mark.skipif(
    _backend.BACKEND != "native", reason="compiled backend not built"
)


def random_csr(rng, n, k):
    cols = np.stack([rng.choice(n, size=k, replace=False) for _ in range(n)])
    data = rng.random((n, k)) + 0.1
    data /= data.sum(axis=1, keepdims=True)
    indptr = np.arange(n + 1, dtype=np.int64) * k
    return sp.csr_matrix((data.ravel(), cols.ravel(), indptr), shape=(n, n))


@native_only
def test_multiply_clamp_backends_agree():
    rng = np.random.default_rng(0)
    for steps in (1, 2, 7):
        n, c = 60, 3
        m = random_csr(rng, n, 5)
        chi = rng.uniform(-1, 1, size=(n, c))
        mask = rng.random(n) < 0.3
        clamp = np.where(rng.random((n, c)) < 0.5, -1.0, 1.0) * mask[:, None]
        chi[mask] = clamp[mask]
        args = (m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data)
        out_nat = _backend.get_kernels("native").csr_multiply_clamp(
            *args, chi.copy(), mask.astype(np.uint8), clamp, steps)
        out_py = _backend.get_kernels("python").csr_multiply_clamp(
            *args, chi.copy(), mask.astype(np.uint8), clamp, steps)
        assert np.abs(out_nat - out_py).max() < 1e-14


@native_only
def test_sgd_backends_agree():
    rng = np.random.default_rng(1)
    x = rng.random((12, 3))
    y = rng.integers(0, 2, 12)
    widths = np.array([3, 8, 5, 2], dtype=np.int64)
    n_params_w = 3 * 8 + 8 * 5 + 5 * 2
    n_params_b = 8 + 5 + 2
    w0 = rng.uniform(-0.5, 0.5, n_params_w)
    b0 = rng.uniform(-0.5, 0.5, n_params_b)
    order = np.concatenate([rng.permutation(12) for _ in range(30)]).astype(np.int64)
    results = {}
    for name in ("native", "python"):
        w, b = w0.copy(), b0.copy()
        losses = _backend.get_kernels(name).sgd_epochs(
            widths, w, b, np.zeros_like(w), np.zeros_like(b),
            x, y, order, 30, 0.01, 0.9)
        results[name] = (w, b, np.asarray(losses))
    for a, b in zip(results["native"], results["python"]):
        assert np.abs(a - b).max() < 1e-12


def test_force_python_env_var():
    code = "import diffal; print(diffal.backend_name())"
    env = dict(os.environ, DIFFAL_NO_NATIVE="1", PYTHONPATH="src")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, cwd=os.path.dirname(os.path.dirname(__file__)))
    assert out.returncode == 0
    assert out.stdout.strip() == "python"


def test_backend_reports_a_known_name():
    assert _backend.backend_name() in ("native", "python")
