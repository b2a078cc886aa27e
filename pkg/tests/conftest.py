import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from specrad.graph import SparseAdjacency

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_graph(rng, n, density=0.3, strongly_connected=True):
    """Random weighted digraph; a directed cycle makes it strongly connected."""
    M = (rng.random((n, n)) < density) * rng.uniform(0.1, 2.0, (n, n))
    np.fill_diagonal(M, 0.0)
    if strongly_connected and n > 1:
        i = np.arange(n)
        M[i, (i + 1) % n] = rng.uniform(0.1, 2.0, n)
    return SparseAdjacency.from_dense(M)


def dense_perron(M):
    """Perron root and unit nonnegative right/left vectors from a dense eigensolver."""
    M = np.asarray(M, dtype=float)
    w, V = np.linalg.eig(M)
    i = int(np.argmax(w.real))
    u = np.abs(V[:, i].real)
    wl, W = np.linalg.eig(M.T)
    j = int(np.argmax(wl.real))
    v = np.abs(W[:, j].real)
    return float(w[i].real), u / np.linalg.norm(u), v / np.linalg.norm(v)


@st.composite
def graphs(draw, min_n=2, max_n=12, connected=True):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    density = draw(st.floats(0.05, 0.9))
    return random_graph(np.random.default_rng(seed), n, density, connected)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
