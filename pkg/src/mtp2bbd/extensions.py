"""Sign-aware thresholding, the graphical lasso decomposition check and warm starts.

The graphical lasso without sign constraints thresholds ``|S_ij|`` instead
of ``S_ij``; a solution assembled from clusters is optimal for it only when
the cross-cluster stationarity inequalities hold, which
:func:`check_glasso_condition` tests. :func:`warm_start` builds a feasible
initial point from per-cluster solves on any vertex partition.
"""

from dataclasses import dataclass

import numpy as np

from .assembler import _block_structure, solve_clusters
from .exceptions import NotPositiveDefinite, PartitionMismatch
from .graph import ThresholdedMatrix, check_regularizer, threshold
from .matrix_core import factorize
from .subsolver import SolverConfig


def glasso_threshold(S, Lam):
    """Soft threshold ``S_ij - Lam_ij sign(S_ij)`` where ``|S_ij| > Lam_ij``; zero diagonal."""
    S = np.asarray(S, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    check_regularizer(Lam)
    shrunk = np.sign(S) * (np.abs(S) - Lam)
    rows, cols = np.nonzero(np.triu(np.abs(S) > Lam, k=1))
    return ThresholdedMatrix.from_entries(S.shape[0], rows, cols, shrunk[rows, cols])


@dataclass(frozen=True)
class VertexPartition:
    """Arbitrary disjoint, exhaustive partition of ``range(p)``.

    Attributes
    ----------
    clusters : list of ndarray
        Sorted vertex arrays, ordered by smallest vertex.
    psi, pi : ndarray
        Cluster index of each vertex and its position inside the cluster.
    external_edges : list of tuple
        Support edges ``(i, j)``, ``i < j``, joining different clusters. Empty
        unless the partition was built with a thresholded matrix.
    """

    clusters: list
    psi: np.ndarray
    pi: np.ndarray
    external_edges: list

    @property
    def K(self):
        return len(self.clusters)

    @property
    def p(self):
        return len(self.psi)

    @property
    def sizes(self):
        return [len(c) for c in self.clusters]

    @classmethod
    def from_clusters(cls, clusters, p=None, T=None):
        """Validate ``clusters`` (0-based) and attach the cross edges of ``supp(T)``."""
        clusters = [np.unique(np.asarray(c, dtype=np.int64)) for c in clusters]
        if any(len(c) == 0 for c in clusters):
            raise PartitionMismatch("empty cluster")
        allv = np.concatenate(clusters) if clusters else np.zeros(0, dtype=np.int64)
        if p is None:
            p = T.p if T is not None else len(allv)
        if len(allv) != p or not np.array_equal(np.sort(allv), np.arange(p)):
            raise PartitionMismatch(f"clusters do not partition range({p}) exactly once")
        clusters.sort(key=lambda c: c[0])
        psi = np.empty(p, dtype=np.int64)
        pi = np.empty(p, dtype=np.int64)
        for k, c in enumerate(clusters):
            psi[c] = k
            pi[c] = np.arange(len(c))
        ext = []
        if T is not None:
            if T.p != p:
                raise PartitionMismatch(f"partition covers {p} vertices, T has {T.p}")
            ext = [(i, j) for i, j in T.edges() if psi[i] != psi[j]]
        return cls(clusters, psi, pi, ext)

    @classmethod
    def from_labels(cls, labels, T=None):
        labels = np.asarray(labels)
        return cls.from_clusters(
            [np.flatnonzero(labels == lab) for lab in np.unique(labels)], len(labels), T
        )

    @classmethod
    def singletons(cls, p, T=None):
        return cls.from_clusters([[i] for i in range(p)], p, T)

    def with_edges(self, T):
        return VertexPartition.from_clusters(self.clusters, self.p, T)


def read_partition(path, p=None, T=None):
    """Partition file: one cluster per line, whitespace-separated 1-based vertices."""
    clusters = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            idx = [int(tok) - 1 for tok in line.split()]
            if min(idx) < 0:
                raise PartitionMismatch("vertex indices in partition files are 1-based")
            clusters.append(idx)
    return VertexPartition.from_clusters(clusters, p, T)


def write_partition(P, path):
    with open(path, "w") as fh:
        for c in P.clusters:
            fh.write(" ".join(str(int(v) + 1) for v in c) + "\n")


def check_glasso_condition(R, S, Lam, P, mtp2=False, atol=1e-10):
    """Cross-cluster optimality test for a decomposed graphical lasso candidate.

    Parameters
    ----------
    R : ndarray
        Inverse of the candidate, e.g. from :func:`~mtp2bbd.verifier.build_R`.
    S, Lam : ndarray
    P : partition with ``psi``
    mtp2 : bool
        Test only ``S_ij - R_ij <= Lam_ij``, the side that remains once the
        off-diagonals are constrained to be non-positive.
    atol : float
        Slack allowed on each inequality (absorbs rounding on bridges).

    Returns
    -------
    ok : bool
    worst : float
        Largest violation ``max(0, |S_ij - R_ij| - Lam_ij)`` over cross pairs.
    pair : tuple or None
        Index pair attaining ``worst`` (``None`` without cross pairs).
    """
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    psi = np.asarray(P.psi)
    cross = psi[:, None] != psi[None, :]
    if not cross.any():
        return True, 0.0, None
    gap = S - R
    viol = (gap if mtp2 else np.abs(gap)) - Lam
    viol = np.where(cross, viol, -np.inf)
    flat = int(np.argmax(viol))
    i, j = np.unravel_index(flat, viol.shape)
    worst = max(0.0, float(viol[i, j]))
    i, j = sorted((int(i), int(j)))
    return worst <= atol, worst, (i, j)


def warm_start(S, Lam, P, cfg=None, threads=1):
    """Feasible initial precision from per-cluster optima on partition ``P``.

    Cluster blocks are the sub-problem optima; every external edge of
    ``supp(T)`` gets its two-node closed-form entry and contributes to the
    diagonal corrections of its endpoints. On the bridge-block partition
    this is the global optimum; on the all-singleton partition it is fully
    explicit.

    Returns
    -------
    ndarray
        Dense ``Theta_init`` with non-positive off-diagonals.

    Raises
    ------
    NotPositiveDefinite
        If the assembled matrix is not positive definite.
    """
    cfg = (cfg or SolverConfig()).with_(on_max_iter="return")
    S = np.asarray(S, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    T = threshold(S, Lam)
    if P.p != T.p:
        raise PartitionMismatch(f"partition covers {P.p} vertices, S has {T.p}")
    edges = [(i, j) for i, j in T.edges() if P.psi[i] != P.psi[j]]
    subs, _ = solve_clusters(S, Lam, P, cfg, threads)
    theta, _ = _block_structure(subs, P, T, S, edges)
    theta = theta.toarray()
    off = theta - np.diag(np.diag(theta))
    assert off.max(initial=0.0) <= 0.0
    factorize(theta)
    return theta


def warm_start_or_diagonal(S, Lam, P, cfg=None, threads=1):
    """:func:`warm_start`, falling back to ``diag(1 / S_ii)``.

    Returns ``(theta_init, fell_back)``.
    """
    try:
        return warm_start(S, Lam, P, cfg, threads), False
    except NotPositiveDefinite:
        return np.diag(1.0 / np.diag(np.asarray(S, dtype=float))), True


def singleton_closed_form(S, Lam):
    """Warm start on the all-singleton partition, without any solver call."""
    S = np.asarray(S, dtype=float)
    T = threshold(S, Lam)
    d = np.diag(S)
    theta = np.diag(1.0 / d)
    for (i, j), t in zip(T.edges(), T.values):
        den = d[i] * d[j] - t * t
        theta[i, j] = theta[j, i] = -t / den
        r = t * t / den
        theta[i, i] += r / d[i]
        theta[j, j] += r / d[j]
    return theta
