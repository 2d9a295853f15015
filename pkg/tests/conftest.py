import functools

import numpy as np
import pytest

from mtp2bbd.graph import UndirectedGraph
from mtp2bbd.synthetic import GeneratorConfig, make_instance

# 0-based edges of the 16-node example: blocks {0..4}, {5..8}, {9..15}
FIGURE1_EDGES = (
    [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 3)]
    + [(5, 6), (6, 7), (7, 8), (8, 5)]
    + [(9, 10), (10, 11), (11, 12), (12, 13), (13, 14), (14, 15), (15, 9), (10, 13), (11, 15)]
    + [(4, 5), (8, 9)]
)
FIGURE1_BRIDGES = [(4, 5), (8, 9)]
FIGURE1_CLUSTERS = [list(range(0, 5)), list(range(5, 9)), list(range(9, 16))]

# (model, p, chi, seed); chi keeps supp(T) non-trivial with several clusters
CORPUS = [
    ("ba", 30, 0.02, 1),
    ("ba", 60, 0.015, 2),
    ("ba", 120, 0.01, 3),
    ("ba", 200, 0.01, 4),
    ("sbm", 40, 0.02, 5),
    ("sbm", 100, 0.02, 6),
    ("sbm", 200, 0.02, 7),
    ("ba", 50, 0.05, 8),
]


@functools.lru_cache(maxsize=None)
def corpus_instance(model, p, chi, seed):
    return make_instance(GeneratorConfig(p=p, model=model, chi=chi, seed=seed))


@functools.lru_cache(maxsize=None)
def corpus_solution(model, p, chi, seed, tol=1e-8):
    from mtp2bbd.assembler import estimate
    from mtp2bbd.subsolver import SolverConfig

    inst = corpus_instance(model, p, chi, seed)
    return estimate(inst.S, inst.Lam, SolverConfig(tolerance=tol), threads=1)


@pytest.fixture(params=CORPUS, ids=lambda c: f"{c[0]}-p{c[1]}-s{c[3]}")
def corpus(request):
    inst = corpus_instance(*request.param)
    sol, report = corpus_solution(*request.param)
    return inst, sol, report


@pytest.fixture
def figure1_graph():
    return UndirectedGraph(16, FIGURE1_EDGES)


def figure1_covariance(rng=None, strength=0.3):
    """Covariance whose threshold at ``Lam = 0`` has exactly the example's support.

    Unit diagonal, jittered ``strength`` on edges, small negative values elsewhere.
    """
    rng = rng or np.random.default_rng(0)
    S = np.full((16, 16), -0.01)
    for i, j in FIGURE1_EDGES:
        S[i, j] = S[j, i] = strength * (1 + 0.2 * rng.random())
    np.fill_diagonal(S, 1.0)
    return S


def random_m_matrix(m, rng, density=0.6):
    """Random SPD matrix with non-positive off-diagonals (strictly diagonally dominant)."""
    W = rng.random((m, m)) * (rng.random((m, m)) < density)
    W = np.triu(W, 1)
    W = W + W.T
    return np.diag(W.sum(axis=1) + 0.1 + rng.random(m)) - W
