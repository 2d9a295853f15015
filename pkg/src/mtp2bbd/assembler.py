"""Global optimum from cluster solutions, bridge entries and diagonal corrections.

Given the bridge-block decomposition of the thresholded graph, the optimal
precision matrix is block diagonal over the clusters (each block the optimum
of its own sub-problem plus a diagonal correction), has an explicit value on
every bridge, and is zero elsewhere.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular

from .exceptions import (
    DegenerateDenominator,
    MaxIterationsExceeded,
    NotAcyclic,
    PartitionMismatch,
)
from .graph import (
    BridgeBlockPartition,
    BridgeTree,
    bridge_block_decomposition,
    find_bridges,
    support_graph,
    threshold,
)
from .matrix_core import factorize, logdet
from .subsolver import SolverConfig, SubSolution, solve_subproblem


def bridge_entry(t, s_ii, s_jj):
    """Optimal precision entry on a bridge: ``-t / (s_ii s_jj - t^2)``."""
    den = s_ii * s_jj - t * t
    if den <= 0:
        raise DegenerateDenominator(f"S_ii S_jj - T_ij^2 = {den} <= 0")
    if t == 0:
        return 0.0
    return -t / den


def zeta(i, bridges, T, S):
    """Diagonal correction of vertex ``i`` from the bridges incident to it."""
    s_ii = S[i, i]
    total = 0.0
    for a, b in bridges:
        if i not in (a, b):
            continue
        m = b if a == i else a
        t = T.get(a, b)
        total += t * t / (s_ii * S[m, m] - t * t)
    return total / s_ii


def _zeta_vector(p, edges, T, S):
    z = np.zeros(p)
    if not edges:
        return z
    e = np.asarray(edges, dtype=np.int64)
    i, j = e[:, 0], e[:, 1]
    t = np.array([T.get(a, b) for a, b in edges])
    sii, sjj = S[i, i], S[j, j]
    ratio = t * t / (sii * sjj - t * t)
    np.add.at(z, i, ratio / sii)
    np.add.at(z, j, ratio / sjj)
    return z


@dataclass
class AssembledSolution:
    """Assembled precision matrix and the pieces it was built from.

    ``theta`` is a symmetric ``scipy.sparse.csr_array``; ``subs[k]`` solves
    the sub-problem of ``partition.clusters[k]``.
    """

    theta: sp.csr_array
    partition: BridgeBlockPartition
    subs: list
    zeta: np.ndarray
    T: object = None

    def dense(self):
        return self.theta.toarray()


def _block_structure(subs, P, T, S, edges):
    """Sparse theta from cluster blocks, corrections on ``edges`` and their explicit entries."""
    p = P.p
    if len(subs) != P.K:
        raise PartitionMismatch(f"{len(subs)} sub-solutions for {P.K} clusters")
    z = _zeta_vector(p, edges, T, S)
    rows, cols, vals = [], [], []
    for k, (idx, sub) in enumerate(zip(P.clusters, subs)):
        block = _block(sub)
        if block.shape != (len(idx), len(idx)):
            raise PartitionMismatch(
                f"cluster {k} has {len(idx)} vertices but its block is {block.shape}"
            )
        block = block.copy()
        block[np.diag_indices_from(block)] += z[idx]
        r, c = np.nonzero(block)
        rows.append(idx[r])
        cols.append(idx[c])
        vals.append(block[r, c])
    if edges:
        e = np.asarray(edges, dtype=np.int64)
        i, j = e[:, 0], e[:, 1]
        b = np.array([bridge_entry(T.get(a, c), S[a, a], S[c, c]) for a, c in edges])
        rows += [i, j]
        cols += [j, i]
        vals += [b, b]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    theta = sp.csr_array((vals, (rows, cols)), shape=(p, p))
    theta.sort_indices()
    return theta, z


def assemble(subs, P, T, S):
    """Global optimum from one sub-solution per cluster.

    Parameters
    ----------
    subs : list
        ``SubSolution`` or plain block per cluster, in ``P.clusters`` order.
    P : BridgeBlockPartition
    T : ThresholdedMatrix
    S : ndarray
    """
    S = np.asarray(S)
    theta, z = _block_structure(subs, P, T, S, list(P.bridges))
    return AssembledSolution(theta, P, list(subs), z, T)


def closed_form_acyclic(S, T):
    """Optimum when every edge of the thresholded graph is a bridge.

    Returns a sparse symmetric matrix; raises :class:`NotAcyclic` otherwise.
    """
    S = np.asarray(S, dtype=float)
    G = support_graph(T)
    bridges = find_bridges(G)
    if len(bridges) != G.n_edges:
        raise NotAcyclic(f"{G.n_edges - len(bridges)} edges lie on cycles")
    d = np.diag(S)
    z = _zeta_vector(T.p, bridges, T, S)
    diag = 1.0 / d + z
    rows = [np.arange(T.p)]
    cols = [np.arange(T.p)]
    vals = [diag]
    if bridges:
        t = T.values
        b = -t / (d[T.rows] * d[T.cols] - t * t)
        rows += [T.rows, T.cols]
        cols += [T.cols, T.rows]
        vals += [b, b]
    theta = sp.csr_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(T.p, T.p),
    )
    theta.sort_indices()
    return theta


def _block(sub):
    return sub.theta_hat if isinstance(sub, SubSolution) else np.asarray(sub)


def structured_logdet(solution, S):
    """Exact ``logdet`` of an assembled matrix without forming it densely.

    Clusters are eliminated leaves-first along the bridge tree; each
    elimination adds the cluster block's log-determinant and a Schur update
    on the parent-side bridge endpoint.
    """
    P = solution.partition
    tree = BridgeTree(P)
    blocks = []
    for idx, sub in zip(P.clusters, solution.subs):
        block = np.array(_block(sub), dtype=float)
        block[np.diag_indices_from(block)] += solution.zeta[idx]
        blocks.append(block)
    total = 0.0
    for c in reversed(tree.order):
        block = blocks[c]
        F = factorize(block)
        total += logdet(F)
        if tree.parent[c] < 0:
            continue
        u, v = tree.up_bridge[c]
        e = np.zeros(len(block))
        e[P.pi[u]] = 1.0
        # [block^{-1}]_{uu} from one triangular solve
        y = solve_triangular(F.L, e, lower=True)
        w = bridge_entry(solution.T.get(u, v), S[u, u], S[v, v])
        blocks[tree.parent[c]][P.pi[v], P.pi[v]] -= w * w * float(y @ y)
    return total


def structured_objective(solution, S, Lam):
    """Objective of an assembled solution using :func:`structured_logdet`."""
    theta = solution.theta.tocoo()
    C = S[theta.row, theta.col] - Lam[theta.row, theta.col]
    return -structured_logdet(solution, S) + float(np.dot(theta.data, C))


@dataclass
class EstimationReport:
    """Summary of one :func:`estimate` run; times are in milliseconds."""

    p: int
    n_edges: int
    n_bridges: int
    K: int
    cluster_sizes: list
    cluster_solve_ms: list
    cluster_iterations: list
    decomposition_ms: float
    solve_ms: float
    assembly_ms: float
    total_ms: float
    kkt_residual: float
    objective: float
    converged: bool
    decompose: bool
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _solve_cluster(S, Lam, idx, cfg):
    t0 = time.perf_counter()
    if len(idx) == 1:
        i = idx[0]
        sub = SubSolution(
            np.array([[1.0 / S[i, i]]]), np.array([[S[i, i]]]), 0, 0.0, np.log(S[i, i]) + 1.0
        )
    else:
        ix = np.ix_(idx, idx)
        sub = solve_subproblem(S[ix], Lam[ix], cfg)
    return sub, (time.perf_counter() - t0) * 1e3


def solve_clusters(S, Lam, P, cfg, threads=None):
    """Solve every cluster's sub-problem; results are in cluster order.

    Clusters are dispatched largest first to a pool of ``threads`` workers.
    """
    threads = threads or os.cpu_count() or 1
    order = sorted(range(P.K), key=lambda k: -len(P.clusters[k]))
    out = [None] * P.K
    if threads == 1 or P.K == 1:
        for k in order:
            out[k] = _solve_cluster(S, Lam, P.clusters[k], cfg)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {k: pool.submit(_solve_cluster, S, Lam, P.clusters[k], cfg) for k in order}
            for k, fut in futures.items():
                out[k] = fut.result()
    subs = [o[0] for o in out]
    times = [o[1] for o in out]
    return subs, times


def estimate(S, Lam, cfg=None, decompose=True, threads=None):
    """Estimate the sparse M-matrix precision for covariance ``S`` and weights ``Lam``.

    With ``decompose`` the problem is split along the bridge-block
    decomposition of the thresholded graph and reassembled; otherwise one
    solver run covers the full matrix.

    Returns
    -------
    (AssembledSolution, EstimationReport)

    Raises
    ------
    MaxIterationsExceeded
        If any solve fails to converge and ``cfg.on_max_iter == "raise"``.
        The exception's ``result`` holds the assembled best iterate and
        its ``report``.
    """
    cfg = cfg or SolverConfig()
    inner_cfg = cfg.with_(on_max_iter="return")
    S = np.asarray(S, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    t_start = time.perf_counter()
    T = threshold(S, Lam)
    if decompose:
        G = support_graph(T)
        B = find_bridges(G)
        P = bridge_block_decomposition(G, B)
    else:
        B = []
        P = BridgeBlockPartition.from_labels(np.zeros(S.shape[0], dtype=np.int64))
    t_dec = time.perf_counter()
    subs, times = solve_clusters(S, Lam, P, inner_cfg, threads)
    t_solve = time.perf_counter()
    sol = assemble(subs, P, T, S)
    t_asm = time.perf_counter()
    # within a bridge-block decomposition the global KKT residual equals the
    # worst cluster residual: bridge rows are exact and cross pairs slack
    residual = max(s.residual for s in subs)
    converged = all(s.converged for s in subs)
    if decompose:
        obj = structured_objective(sol, S, Lam)
    else:
        obj = subs[0].objective
    report = EstimationReport(
        p=S.shape[0],
        n_edges=T.nnz,
        n_bridges=len(B),
        K=P.K,
        cluster_sizes=P.sizes,
        cluster_solve_ms=times,
        cluster_iterations=[s.iterations for s in subs],
        decomposition_ms=(t_dec - t_start) * 1e3,
        solve_ms=(t_solve - t_dec) * 1e3,
        assembly_ms=(t_asm - t_solve) * 1e3,
        total_ms=(t_asm - t_start) * 1e3,
        kkt_residual=residual,
        objective=obj,
        converged=converged,
        decompose=decompose,
        config=asdict(cfg) | {"threads": threads},
    )
    if not converged and cfg.on_max_iter == "raise":
        raise MaxIterationsExceeded((sol, report), max(report.cluster_iterations), residual)
    return sol, report
