"""Thresholded graph, bridges and the bridge-block decomposition.

Vertices are 0-based internally. Edges are reported as ``(i, j)`` tuples with
``i < j`` unless a function says otherwise (bridge paths are oriented).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from .exceptions import AssumptionViolated, SameCluster


@dataclass(frozen=True)
class ThresholdedMatrix:
    """Sparse symmetric matrix with zero diagonal, stored by its upper triangle.

    ``rows[k] < cols[k]`` and ``values[k] != 0`` for every stored entry.
    """

    p: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    _lookup: dict = field(default=None, repr=False, compare=False)

    @classmethod
    def from_entries(cls, p, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        keep = (lo != hi) & (values != 0)
        lo, hi, values = lo[keep], hi[keep], values[keep]
        order = np.lexsort((hi, lo))
        lo, hi, values = lo[order], hi[order], values[order]
        lookup = {(int(a), int(b)): float(v) for a, b, v in zip(lo, hi, values)}
        return cls(int(p), lo, hi, values, lookup)

    @property
    def nnz(self):
        """Number of stored (upper-triangular) entries, i.e. edges."""
        return len(self.values)

    def get(self, i, j):
        if i > j:
            i, j = j, i
        return self._lookup.get((i, j), 0.0)

    def edges(self):
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def to_sparse(self):
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        v = np.concatenate([self.values, self.values])
        return sp.csr_array((v, (r, c)), shape=(self.p, self.p))

    def to_dense(self):
        T = np.zeros((self.p, self.p))
        T[self.rows, self.cols] = self.values
        T[self.cols, self.rows] = self.values
        return T


def check_assumption(S):
    """Raise :class:`AssumptionViolated` unless ``S_ij < sqrt(S_ii S_jj)`` off the diagonal."""
    S = np.asarray(S, dtype=float)
    d = np.diag(S)
    if np.any(d <= 0):
        i = int(np.flatnonzero(d <= 0)[0])
        raise AssumptionViolated(i, i, f"non-positive diagonal S[{i},{i}]")
    bound = np.sqrt(np.outer(d, d))
    bad = S >= bound
    np.fill_diagonal(bad, False)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise AssumptionViolated(int(i), int(j))


def check_regularizer(Lam):
    Lam = np.asarray(Lam, dtype=float)
    if np.any(np.diag(Lam) != 0):
        raise ValueError("regularization matrix must have a zero diagonal")
    if np.any(Lam < 0):
        raise ValueError("regularization matrix must be entrywise non-negative")


def threshold(S, Lam, check=True):
    """Off-diagonal soft threshold keeping only ``S_ij > Lam_ij``.

    ``T_ij = S_ij - Lam_ij`` where ``S_ij > Lam_ij`` (strict, ties dropped),
    zero elsewhere and on the diagonal.
    """
    S = np.asarray(S, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    if check:
        check_regularizer(Lam)
        check_assumption(S)
    diff = S - Lam
    rows, cols = np.nonzero(np.triu(diff > 0, k=1))
    return ThresholdedMatrix.from_entries(S.shape[0], rows, cols, diff[rows, cols])


class UndirectedGraph:
    """Simple undirected graph in CSR form.

    ``indptr``/``indices`` give neighbor lists; ``edge_id[k]`` is the id of
    the edge stored at adjacency slot ``k`` (ids index :attr:`edge_list`).
    """

    def __init__(self, p, edges):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
            edges = np.sort(edges, axis=1)
            edges = np.unique(edges, axis=0)
            if edges.max() >= p or edges.min() < 0:
                raise ValueError("edge endpoint out of range")
        self.p = int(p)
        self.edge_list = edges
        m = len(edges)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.argsort(src, kind="stable")
        self.indices = dst[order]
        self.edge_id = eid[order]
        self.indptr = np.zeros(self.p + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.p), out=self.indptr[1:])

    @property
    def n_edges(self):
        return len(self.edge_list)

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edges(self):
        return [tuple(e) for e in self.edge_list.tolist()]

    def adjacency(self):
        m = self.n_edges
        A = sp.csr_array(
            (np.ones(2 * m), self.indices, self.indptr), shape=(self.p, self.p)
        )
        return A

    def without(self, removed):
        """Copy of the graph with the edges in ``removed`` deleted."""
        removed = {tuple(sorted(e)) for e in removed}
        kept = [e for e in self.edges() if e not in removed]
        return UndirectedGraph(self.p, kept)


def support_graph(T):
    """Graph with one edge per stored off-diagonal entry of ``T``."""
    if isinstance(T, ThresholdedMatrix):
        return UndirectedGraph(T.p, np.column_stack([T.rows, T.cols]))
    A = np.asarray(T.toarray() if sp.issparse(T) else T)
    r, c = np.nonzero(np.triu(A != 0, k=1))
    return UndirectedGraph(A.shape[0], np.column_stack([r, c]))


def find_bridges(G):
    """All bridges of ``G`` via an iterative low-link DFS, O(|V| + |E|).

    Returns a sorted list of ``(i, j)`` with ``i < j``.
    """
    p = G.p
    indptr, indices, edge_id = G.indptr, G.indices, G.edge_id
    disc = np.full(p, -1, dtype=np.int64)
    low = np.zeros(p, dtype=np.int64)
    # plain lists are much faster than numpy scalars in this loop
    indptr_l = indptr.tolist()
    indices_l = indices.tolist()
    eid_l = edge_id.tolist()
    disc_l = disc.tolist()
    low_l = low.tolist()
    bridges = []
    timer = 0
    for root in range(p):
        if disc_l[root] != -1:
            continue
        disc_l[root] = low_l[root] = timer
        timer += 1
        # frame: (vertex, edge id used to enter it, next adjacency slot)
        stack = [[root, -1, indptr_l[root]]]
        while stack:
            frame = stack[-1]
            v, in_edge, k = frame
            if k < indptr_l[v + 1]:
                frame[2] = k + 1
                w = indices_l[k]
                e = eid_l[k]
                if e == in_edge:
                    continue
                if disc_l[w] == -1:
                    disc_l[w] = low_l[w] = timer
                    timer += 1
                    stack.append([w, e, indptr_l[w]])
                elif disc_l[w] < low_l[v]:
                    low_l[v] = disc_l[w]
            else:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    if low_l[v] < low_l[u]:
                        low_l[u] = low_l[v]
                    if low_l[v] > disc_l[u]:
                        bridges.append((u, v) if u < v else (v, u))
    bridges.sort()
    return bridges


def connected_components(G):
    """Component label per vertex (labels ordered by smallest member)."""
    if G.n_edges == 0:
        return np.arange(G.p)
    _, labels = _cc(G.adjacency(), directed=False)
    return labels


@dataclass(frozen=True)
class BridgeBlockPartition:
    """Clusters of the bridge-block decomposition.

    Attributes
    ----------
    clusters : list of ndarray
        Sorted vertex arrays ``V_1..V_K``; ordered by smallest vertex.
    psi : ndarray
        ``psi[i]`` is the cluster index of vertex ``i``.
    pi : ndarray
        ``pi[i]`` is the position of ``i`` inside ``clusters[psi[i]]``.
    bridges : list of tuple
        Bridge edges ``(i, j)``, ``i < j``.
    """

    clusters: list
    psi: np.ndarray
    pi: np.ndarray
    bridges: list

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
    def from_labels(cls, labels, bridges=()):
        labels = np.asarray(labels)
        _, labels = np.unique(labels, return_inverse=True)
        # relabel by first appearance so cluster order follows smallest vertex
        first = {}
        for v, lab in enumerate(labels.tolist()):
            first.setdefault(lab, len(first))
        psi = np.array([first[lab] for lab in labels.tolist()], dtype=np.int64)
        order = np.argsort(psi, kind="stable")
        bounds = np.cumsum(np.bincount(psi))[:-1]
        clusters = np.split(order, bounds)
        pi = np.empty_like(psi)
        for c in clusters:
            pi[c] = np.arange(len(c))
        return cls(clusters, psi, pi, sorted(tuple(sorted(b)) for b in bridges))

    def cross_edges(self, edges):
        return [(i, j) for i, j in edges if self.psi[i] != self.psi[j]]


def bridge_block_decomposition(G, bridges=None):
    """Clusters = connected components of ``G`` with its bridges removed."""
    if bridges is None:
        bridges = find_bridges(G)
    labels = connected_components(G.without(bridges))
    return BridgeBlockPartition.from_labels(labels, bridges)


class BridgeTree:
    """Forest obtained by contracting every cluster to a super-node.

    Each tree edge remembers the bridge endpoints on both sides, so paths
    can be reported as oriented bridge sequences.
    """

    def __init__(self, P):
        K = P.K
        self.partition = P
        adj = [[] for _ in range(K)]
        for u, v in P.bridges:
            cu, cv = int(P.psi[u]), int(P.psi[v])
            adj[cu].append((cv, u, v))
            adj[cv].append((cu, v, u))
        self.parent = np.full(K, -1, dtype=np.int64)
        self.depth = np.zeros(K, dtype=np.int64)
        self.root = np.full(K, -1, dtype=np.int64)
        # (vertex in child cluster, vertex in parent cluster)
        self.up_bridge = [None] * K
        self.order = []
        for r in range(K):
            if self.root[r] != -1:
                continue
            self.root[r] = r
            stack = [r]
            while stack:
                c = stack.pop()
                self.order.append(c)
                for nb, mine, theirs in adj[c]:
                    if self.root[nb] == -1:
                        self.root[nb] = r
                        self.parent[nb] = c
                        self.depth[nb] = self.depth[c] + 1
                        self.up_bridge[nb] = (theirs, mine)
                        stack.append(nb)

    def cluster_path(self, a, b):
        """Oriented bridges from cluster ``a`` to cluster ``b`` (empty if disconnected)."""
        if self.root[a] != self.root[b]:
            return []
        up, down = [], []
        while self.depth[a] > self.depth[b]:
            up.append(self.up_bridge[a])
            a = self.parent[a]
        while self.depth[b] > self.depth[a]:
            x, y = self.up_bridge[b]
            down.append((y, x))
            b = self.parent[b]
        while a != b:
            up.append(self.up_bridge[a])
            a = self.parent[a]
            x, y = self.up_bridge[b]
            down.append((y, x))
            b = self.parent[b]
        return up + down[::-1]


def bridge_path(P, G, i, j, tree=None):
    """Ordered, oriented bridges crossed by any path from ``i`` to ``j``.

    Every returned pair is ``(exit vertex, entry vertex)``. ``G`` is accepted
    for interface symmetry; the partition already determines the answer.
    """
    if P.psi[i] == P.psi[j]:
        raise SameCluster(f"vertices {i} and {j} share cluster {P.psi[i]}")
    if tree is None:
        tree = BridgeTree(P)
    return tree.cluster_path(int(P.psi[i]), int(P.psi[j]))
