import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def norm(a):
    return float(np.linalg.norm(a))


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)
