"""Independent checks on assembled solutions.

``build_R`` writes down the inverse of an assembled precision matrix
explicitly from the cluster inverses and products along bridge paths, which
gives a certificate that does not go through a dense factorization.
``dense_oracle`` solves the full problem without any decomposition.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import PartitionMismatch
from .graph import BridgeTree
from .subsolver import SolverConfig, SubSolution, solve_subproblem

BUILD_R_MAX_P = 2000
ORACLE_MAX_P = 200


@dataclass
class InverseWitness:
    R: np.ndarray
    residual: float
    passed: bool


def _cluster_inverse(sub):
    return sub.r_hat if isinstance(sub, SubSolution) else np.asarray(sub)


def _signed_log(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.sign(x), np.log(np.abs(x))


def build_R(subs, P, T, S, G=None):
    """Explicit inverse of the assembled matrix.

    Parameters
    ----------
    subs : list
        Per-cluster inverses ``inv(theta_hat_k)`` (arrays or ``SubSolution``).
    P : BridgeBlockPartition
    T : ThresholdedMatrix
    S : ndarray
    G : UndirectedGraph, optional
        Unused; the partition's bridge tree carries all path information.

    Notes
    -----
    Cross-cluster entries are ``sqrt(S_ii S_jj)`` times the product of
    normalized entries ``R_ab / sqrt(S_aa S_bb)`` along the bridge path.
    Products are accumulated as (sign, log-magnitude) so long chains of
    weak links do not underflow.
    """
    S = np.asarray(S, dtype=float)
    p = P.p
    if p > BUILD_R_MAX_P:
        raise ValueError(f"build_R materializes a dense p x p matrix; p={p} > {BUILD_R_MAX_P}")
    if len(subs) != P.K:
        raise PartitionMismatch(f"{len(subs)} cluster inverses for {P.K} clusters")
    sq = np.sqrt(np.diag(S))
    log_sq = np.log(sq)
    R = np.zeros((p, p))
    # normalized cluster inverses, in (sign, log) form
    norm = []
    for k, (idx, sub) in enumerate(zip(P.clusters, subs)):
        Rk = _cluster_inverse(sub)
        if Rk.shape != (len(idx), len(idx)):
            raise PartitionMismatch(f"cluster {k}: inverse shape {Rk.shape} for {len(idx)} vertices")
        R[np.ix_(idx, idx)] = Rk
        norm.append(_signed_log(Rk / np.outer(sq[idx], sq[idx])))
    adj = [[] for _ in range(P.K)]
    for u, v in P.bridges:
        t = T.get(u, v)
        R[u, v] = R[v, u] = t
        link = _signed_log(t / (sq[u] * sq[v]))
        adj[P.psi[u]].append((P.psi[v], u, v, link))
        adj[P.psi[v]].append((P.psi[u], v, u, link))
    for a in range(P.K):
        idx_a = P.clusters[a]
        sa, la = norm[a]
        # walk the bridge tree from cluster a; h holds the path product
        # from every i in a up to the entry vertex of the current cluster
        stack = []
        for b, x, y, (ls, ll) in adj[a]:
            px = P.pi[x]
            stack.append((b, a, y, sa[:, px] * ls, la[:, px] + ll))
        while stack:
            c, came_from, entry, hs, hl = stack.pop()
            idx_c = P.clusters[c]
            sc, lc = norm[c]
            pe = P.pi[entry]
            sign = np.outer(hs, sc[pe])
            logm = hl[:, None] + lc[pe][None, :] + log_sq[idx_a][:, None] + log_sq[idx_c][None, :]
            with np.errstate(invalid="ignore"):
                block = np.where(sign == 0, 0.0, sign * np.exp(logm))
            R[np.ix_(idx_a, idx_c)] = block
            for d, x, y, (ls, ll) in adj[c]:
                if d == came_from:
                    continue
                px = P.pi[x]
                stack.append((d, c, y, hs * sc[pe, px] * ls, hl + lc[pe, px] + ll))
    # bridges were overwritten by the block writes with the same value
    for u, v in P.bridges:
        R[u, v] = R[v, u] = T.get(u, v)
    return R


def verify_inverse(theta, R, tol=1e-8):
    """Witness of ``||theta R - I||_max`` against ``tol``."""
    F = theta @ R if sp.issparse(theta) else np.asarray(theta) @ R
    F = np.asarray(F)
    F[np.diag_indices_from(F)] -= 1.0
    res = float(np.abs(F).max())
    return InverseWitness(R, res, res <= tol)


def path_product_errors(R, P, G, S, samples=1000, seed=0):
    """Relative errors of ``R_ij S_uu = R_iu R_uj`` over sampled (i, j, waypoint) triples.

    Waypoints are ``i``, ``j`` and the endpoints of every bridge on the
    path. Pairs in the same cluster are skipped; disconnected pairs are
    checked for ``R_ij == 0``.
    """
    S = np.asarray(S)
    rng = np.random.default_rng(seed)
    tree = BridgeTree(P)
    p = P.p
    errs = []
    if P.K < 2:
        return np.zeros(0)
    attempts = 0
    while len(errs) < samples and attempts < 50 * samples:
        attempts += 1
        i, j = rng.integers(p, size=2)
        if P.psi[i] == P.psi[j]:
            continue
        path = tree.cluster_path(int(P.psi[i]), int(P.psi[j]))
        if not path:
            errs.append(abs(R[i, j]))
            continue
        waypoints = [i] + [w for br in path for w in br] + [j]
        u = waypoints[rng.integers(len(waypoints))]
        lhs = R[i, j] * S[u, u]
        rhs = R[i, u] * R[u, j]
        scale = max(abs(lhs), abs(rhs), np.finfo(float).tiny)
        errs.append(abs(lhs - rhs) / scale)
    return np.asarray(errs)


def path_product_identity_check(R, P, G, S, samples=1000, rtol=1e-10, seed=0):
    """True iff every sampled waypoint factorization holds within ``rtol``."""
    errs = path_product_errors(R, P, G, S, samples, seed)
    return bool(errs.size == 0 or errs.max() <= rtol)


def dense_oracle(S, Lam, tol=1e-8, max_p=ORACLE_MAX_P, cfg=None):
    """Monolithic solve of the full problem at ``tol / 10``."""
    S = np.asarray(S, dtype=float)
    if S.shape[0] > max_p:
        raise ValueError(f"dense oracle capped at p={max_p}")
    cfg = (cfg or SolverConfig()).with_(tolerance=tol / 10)
    return solve_subproblem(S, Lam, cfg).theta_hat
