import numpy as np
import pytest

from diffal.knn_graph import Kernel


@pytest.fixture
def xor_fixture():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    return x, y


@pytest.fixture
def path3_kernel():
    """Unit-weight path 0-1-2."""
    w = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    return Kernel.from_weights(w)


@pytest.fixture
def path4_kernel():
    """Unit-weight path 0-1-2-3."""
    w = np.zeros((4, 4))
    for i in range(3):
        w[i, i + 1] = w[i + 1, i] = 1.0
    return Kernel.from_weights(w)
