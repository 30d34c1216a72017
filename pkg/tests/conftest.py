import numpy as np
import pytest

from fastp2o.block_operator import CompactP2O


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_compact(rng, n_d, n_m, n_t):
    return CompactP2O(rng.uniform(-1, 1, (n_t, n_d, n_m)))


def dense_tosi(blocks):
    """Dense block lower-triangular Toeplitz matrix built block by block."""
    n_t, n_d, n_m = blocks.shape
    zero = np.zeros((n_d, n_m))
    return np.block([[blocks[i - j] if i >= j else zero for j in range(n_t)] for i in range(n_t)])


def soti_perm(spatial_dim, n_t):
    """Index map so that ``tosi_vec[perm]`` is the SOTI vector."""
    return np.arange(spatial_dim * n_t).reshape(n_t, spatial_dim).T.reshape(-1)


def max_rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b).max(initial=0.0) / max(np.abs(b).max(initial=0.0), 1e-300)
