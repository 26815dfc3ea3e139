import numpy as np
import pytest

from scmalab import default_codebook
from scmalab.codebook import assemble_codebooks
from scmalab.graph import from_matrix
from scmalab.link import complex_normal


@pytest.fixture(scope="session")
def cbs():
    return default_codebook()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def single_fn_codebook(rng, J=3, M=4):
    """K=1 system with J users all sharing the one resource."""
    g = from_matrix(np.ones((1, J), dtype=int), distinct_columns=False)
    mother = complex_normal(rng, (1, M))
    mother /= np.sqrt(np.sum(np.abs(mother) ** 2))
    ops = [np.exp(1j * rng.uniform(0, 2 * np.pi)) * np.ones((1, 1)) for _ in range(J)]
    return assemble_codebooks(g, mother, ops)


def random_batch(cbs, rng, n, N0_range=(0.05, 2.0), model="rayleigh-uplink"):
    """Random symbols, channels and noisy observations for ``n`` frames."""
    sym = rng.integers(0, cbs.M, (n, cbs.J))
    X = cbs.codewords[np.arange(cbs.J), :, sym].swapaxes(-1, -2)
    if model == "awgn":
        H = np.ones((n, cbs.K, cbs.J), dtype=complex)
    else:
        H = complex_normal(rng, (n, cbs.K, cbs.J))
    N0 = rng.uniform(*N0_range, n)
    y = np.sum(H * X, axis=-1) + np.sqrt(N0)[:, None] * complex_normal(rng, (n, cbs.K))
    return sym, y, H, N0
