"""Synthetic MTP2 instances and timing methodology.

Instances follow the usual recipe: random graph -> diagonally shifted
negative adjacency (an M-matrix) rescaled to unit marginal variances ->
Gaussian samples -> sample covariance -> adaptive regularization.
"""

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular
from scipy.sparse.linalg import eigsh

from .exceptions import AssumptionViolated, OracleTimeout
from .graph import check_assumption, connected_components, support_graph, threshold
from .matrix_core import factorize, invert, objective


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of a synthetic instance.

    ``model`` is ``"ba"`` (Barabasi-Albert of order ``m``), ``"sbm"``
    (``blocks`` equal communities with edge probabilities ``p_in`` and
    ``p_out``) or ``"chain"`` (``blocks`` cycles of equal size joined in a
    line by single edges, i.e. a block-tridiagonal community graph).
    """

    p: int
    model: str = "ba"
    m: int = 1
    blocks: int = 4
    p_in: float = 0.3
    p_out: float = 0.005
    seed: int = 0
    n_samples: int = None
    chi: float = 0.05
    eps: float = 1e-3

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.model not in ("ba", "sbm", "chain"):
            raise ValueError(f"unknown model {self.model!r}")
        if not (0 <= self.p_in <= 1 and 0 <= self.p_out <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.chi <= 0 or self.eps <= 0:
            raise ValueError("chi and eps must be positive")
        if self.model == "ba" and not 1 <= self.m < self.p:
            raise ValueError("BA order must satisfy 1 <= m < p")
        if self.model in ("sbm", "chain") and not 1 <= self.blocks <= self.p:
            raise ValueError("blocks must lie in [1, p]")

    @property
    def n(self):
        return self.n_samples if self.n_samples is not None else 10 * self.p


@dataclass
class SyntheticInstance:
    A: sp.csr_array
    theta_true: np.ndarray
    S: np.ndarray
    Lam: np.ndarray
    config: GeneratorConfig
    seed_used: int
    regenerations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.S.shape[0]

    def manifest(self):
        def digest(a):
            a = a.toarray() if sp.issparse(a) else a
            return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()

        return {
            "config": asdict(self.config),
            "seed_used": self.seed_used,
            "regenerations": self.regenerations,
            "sha256": {
                "A": digest(self.A),
                "theta_true": digest(self.theta_true),
                "S": digest(self.S),
                "Lam": digest(self.Lam),
            },
            **self.meta,
        }


def _edges_to_adjacency(p, edges):
    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    r = np.concatenate([edges[:, 0], edges[:, 1]])
    c = np.concatenate([edges[:, 1], edges[:, 0]])
    A = sp.csr_array((np.ones(len(r)), (r, c)), shape=(p, p))
    A.sum_duplicates()
    A.data[:] = 1.0
    return A


def chain_of_cycles(blocks, size):
    """Edges of ``blocks`` cycles of ``size`` nodes, consecutive cycles joined by one edge."""
    edges = []
    for k in range(blocks):
        base = k * size
        if size == 2:
            edges.append((base, base + 1))
        elif size > 2:
            edges.extend((base + i, base + (i + 1) % size) for i in range(size))
        if k + 1 < blocks:
            edges.append((base + size - 1, base + size))
    return edges


def gen_graph(cfg, seed=None):
    """Sparse symmetric 0/1 adjacency matrix of the configured random graph."""
    seed = cfg.seed if seed is None else seed
    p = cfg.p
    if cfg.model == "ba":
        g = nx.barabasi_albert_graph(p, cfg.m, seed=seed)
        return _edges_to_adjacency(p, g.edges())
    sizes = [p // cfg.blocks + (1 if k < p % cfg.blocks else 0) for k in range(cfg.blocks)]
    if cfg.model == "sbm":
        probs = np.full((cfg.blocks, cfg.blocks), cfg.p_out)
        np.fill_diagonal(probs, cfg.p_in)
        g = nx.stochastic_block_model(sizes, probs.tolist(), seed=seed)
        return _edges_to_adjacency(p, g.edges())
    if p % cfg.blocks:
        raise ValueError("chain model needs p divisible by blocks")
    return _edges_to_adjacency(p, chain_of_cycles(cfg.blocks, p // cfg.blocks))


def largest_eigenvalue(A):
    A = sp.csr_array(A, dtype=float)
    p = A.shape[0]
    if A.nnz == 0:
        return 0.0
    if p <= 500:
        return float(np.linalg.eigvalsh(A.toarray())[-1])
    return float(eigsh(A, k=1, which="LA", tol=1e-10, return_eigenvectors=False)[0])


def precision_from_adjacency(A):
    """M-matrix ``D (delta I - A) D`` with ``delta = 1.05 lambda_max(A)``.

    ``D`` is the diagonal scaling making ``diag(inv(result)) == 1``.
    """
    A = sp.csr_array(A, dtype=float)
    p = A.shape[0]
    lam = largest_eigenvalue(A)
    delta = 1.05 * lam if lam > 0 else 1.0
    theta = delta * np.eye(p) - A.toarray()
    R = invert(factorize(theta))
    d = np.sqrt(np.diag(R))
    return d[:, None] * theta * d[None, :]


def sample_covariance(theta, n, seed=None, chunk=4096):
    """``(1/n) sum y y'`` over ``n`` draws from ``N(0, inv(theta))``."""
    rng = np.random.default_rng(seed)
    L = factorize(theta).L
    p = L.shape[0]
    S = np.zeros((p, p))
    left = n
    while left > 0:
        b = min(chunk, left)
        Z = rng.standard_normal((p, b))
        # columns of inv(L') Z have covariance inv(L L')
        Y = solve_triangular(L, Z, lower=True, trans="T", check_finite=False)
        S += Y @ Y.T
        left -= b
    S /= n
    return (S + S.T) / 2


def initial_estimate(S):
    """Off-diagonal closed-form initial precision from the unregularized threshold."""
    S = np.asarray(S, dtype=float)
    d = np.diag(S)
    T = np.maximum(S, 0.0)
    np.fill_diagonal(T, 0.0)
    theta0 = -T / (np.outer(d, d) - T * T)
    np.fill_diagonal(theta0, 0.0)
    return theta0


def build_regularizer(S, chi, eps=1e-3, theta0=None):
    """Adaptive weights ``Lam_ij = chi / (|theta0_ij| + eps)`` with a zero diagonal."""
    if chi < 0 or eps <= 0:
        raise ValueError("chi must be non-negative and eps positive")
    if theta0 is None:
        theta0 = initial_estimate(S)
    Lam = chi / (np.abs(theta0) + eps)
    np.fill_diagonal(Lam, 0.0)
    return Lam


def community_regularizer(Lam, A, alpha=0.5):
    """Blend ``alpha (11' - A) + (1 - alpha) Lam`` (diagonal kept at zero)."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    out = alpha * (1.0 - A) + (1.0 - alpha) * np.asarray(Lam)
    np.fill_diagonal(out, 0.0)
    return out


def make_instance(cfg, max_regenerations=20, community_alpha=None):
    """Generate an instance, re-drawing with a new seed if Assumption 1 fails.

    With ``community_alpha`` set, the regularizer is blended towards the
    adjacency so that the thresholded support equals the true graph; the
    result records whether that holds in ``meta["support_matches"]``.
    """
    for attempt in range(max_regenerations + 1):
        seed = cfg.seed + attempt * 1_000_003
        A = gen_graph(cfg, seed)
        theta = precision_from_adjacency(A)
        S = sample_covariance(theta, cfg.n, seed)
        try:
            check_assumption(S)
        except AssumptionViolated:
            continue
        Lam = build_regularizer(S, cfg.chi, cfg.eps)
        meta = {}
        if community_alpha is not None:
            Lam = community_regularizer(Lam, A, community_alpha)
        T = threshold(S, Lam, check=False)
        if community_alpha is not None:
            meta["support_matches"] = bool(np.array_equal(T.to_dense() != 0, A.toarray() != 0))
        meta["components_of_T"] = int(connected_components(support_graph(T)).max() + 1)
        return SyntheticInstance(A, theta, S, Lam, cfg, seed, attempt, meta)
    raise AssumptionViolated(-1, -1, "could not draw an instance satisfying Assumption 1")


def relative_error(theta, theta_star, S, Lam):
    """``|f(theta) - f(theta_star)| / |f(theta_star)|``; either argument may be a precomputed objective."""
    f = theta if np.isscalar(theta) else objective(_dense(theta), S, Lam)
    f_star = theta_star if np.isscalar(theta_star) else objective(_dense(theta_star), S, Lam)
    return abs(f - f_star) / abs(f_star)


def _dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a)


@dataclass
class RatioResult:
    ratio: float
    monolithic_seconds: float
    decomposed_seconds: float
    monolithic_iterations: int
    decomposed_re: float


def ratio_of_improvement(S, Lam, cfg=None, target_re=1e-6, budget=None, threads=1):
    """Time for monolithic PGD to reach ``target_re`` over time of the decomposed pipeline.

    The decomposed time covers thresholding, bridge finding, partitioning,
    all cluster solves and assembly. The reference optimum is the
    decomposed solution itself. Raises :class:`OracleTimeout` if the
    monolithic run exceeds ``budget`` seconds.
    """
    from .assembler import estimate
    from .subsolver import SolverConfig, solve_subproblem

    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    sol, _ = estimate(S, Lam, cfg, decompose=True, threads=threads)
    t_dec = time.perf_counter() - t0
    f_star = objective(sol.dense(), S, Lam)

    state = {"t_hit": None, "iters": 0}
    mono_cfg = cfg.with_(on_max_iter="return")
    t1 = time.perf_counter()

    def stop(it, theta, f):
        state["iters"] = it
        if abs(f - f_star) / abs(f_star) < target_re:
            state["t_hit"] = time.perf_counter() - t1
            return True
        if budget is not None and time.perf_counter() - t1 > budget:
            return True
        return False

    res = solve_subproblem(S, Lam, mono_cfg, callback=stop)
    elapsed = time.perf_counter() - t1
    if state["t_hit"] is None:
        f_final = res.objective
        if abs(f_final - f_star) / abs(f_star) < target_re:
            state["t_hit"] = elapsed
        else:
            raise OracleTimeout(elapsed, elapsed / t_dec)
    return RatioResult(state["t_hit"] / t_dec, state["t_hit"], t_dec, state["iters"], 0.0)


def save_manifest(instance, path):
    with open(path, "w") as fh:
        json.dump(instance.manifest(), fh, indent=2, sort_keys=True)
