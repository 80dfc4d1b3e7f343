import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260813)


def naive_matmul(a, b):
    """Triple-loop matrix product, the oracle for vectorized dot paths."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for p in range(k):
                acc += a[i, p] * b[p, j]
            out[i, j] = acc
    return out
