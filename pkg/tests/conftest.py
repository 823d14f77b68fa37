import numpy as np
import pytest
from hypothesis import strategies as st

from subnet_sar.netcore import AdjacencyMatrix, row_normalize


def random_graph(rng, n, p=0.1):
    """Directed Erdos-Renyi graph on ``n`` nodes."""
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    return AdjacencyMatrix.from_edges(src, dst, n)


def sar_instance(rng, n, rho, p=0.1, dist="norm"):
    """Random ``(y, W dense)`` pair drawn from the SAR model on a full graph."""
    A = random_graph(rng, n, p)
    W = row_normalize(A).toarray()
    if dist == "norm":
        e = rng.standard_normal(n)
    else:
        e = rng.standard_exponential(n) - 1.0
    y = np.linalg.solve(np.eye(n) - rho * W, e)
    return y, W


@st.composite
def graphs(draw, min_nodes=2, max_nodes=40):
    n = draw(st.integers(min_nodes, max_nodes))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.sampled_from([0.02, 0.08, 0.2, 0.5]))
    return random_graph(np.random.default_rng(seed), n, p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
