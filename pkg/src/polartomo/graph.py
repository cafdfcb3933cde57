"""Estimation graphs over computational labels.

Vertices are the ``2**n`` labels weighted by ``w_j = |a_j|**2``; an edge
``(j, k)`` means the measured bases give access to ``a_j a_k^*``. Pruned
vertices stay in the arrays with ``alive = False`` so labels never shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .errors import DisconnectedGraphError, DomainError
from .state import check_qubits, rotate_index

TIE_TOL = 1e-12


@dataclass(frozen=True)
class EstimationGraph:
    n: int
    weights: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    alive: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (1 << self.n,):
            raise DomainError(f"weights must have length 2**n = {1 << self.n}")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        e = np.unique(e, axis=0)
        a = np.asarray(self.alive, dtype=bool)
        for name, arr in (("weights", w), ("edges", e), ("alive", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_vertices(self):
        return 1 << self.n

    @cached_property
    def live_edges(self):
        """Edges whose endpoints both survived pruning."""
        e = self.edges
        return e[self.alive[e[:, 0]] & self.alive[e[:, 1]]]

    @cached_property
    def csr(self):
        """``(indptr, indices, edge_id)`` over live edges, rows sorted."""
        e = self.live_edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.concatenate([np.arange(len(e)), np.arange(len(e))])
        order = np.lexsort((dst, src))
        src, dst, eid = src[order], dst[order], eid[order]
        indptr = np.zeros(self.num_vertices + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), dst.astype(np.int64), eid.astype(np.int64)

    @cached_property
    def edge_index(self):
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.live_edges)}

    def neighbors(self, v):
        indptr, indices, _ = self.csr
        return indices[indptr[v] : indptr[v + 1]]

    def degree(self, v):
        return len(self.neighbors(v))

    def edge_set(self):
        return {(int(a), int(b)) for a, b in self.live_edges}

    def with_weights(self, weights):
        return EstimationGraph(self.n, weights, self.edges, self.alive, self.kind)

    def components(self):
        """Connected components of the live vertices, as sorted label lists."""
        alive = np.flatnonzero(self.alive)
        if len(alive) == 0:
            return []
        e = self.live_edges
        m = csr_matrix(
            (np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(self.num_vertices, self.num_vertices)
        )
        _, lab = connected_components(m, directed=False)
        groups: dict[int, list] = {}
        for v in alive:
            groups.setdefault(int(lab[v]), []).append(int(v))
        return sorted(groups.values())

    def is_connected(self):
        return len(self.components()) == 1

    def to_json(self, tree=None):
        doc = {
            "n": self.n,
            "kind": self.kind,
            "vertices": [
                {"label": j, "weight": float(self.weights[j]), "alive": bool(self.alive[j])}
                for j in range(self.num_vertices)
            ],
            "edges": [[int(a), int(b)] for a, b in self.live_edges],
            "tree": None,
        }
        if tree is not None:
            doc["tree"] = tree.to_json()
        return doc


@dataclass(frozen=True)
class PathResult:
    vertices: tuple
    length: int
    weight: float


@dataclass(frozen=True)
class Tree:
    """Rooted spanning tree of one component; ``parent[root] == -1``."""

    root: int
    parent: np.ndarray = field(repr=False)
    depth: np.ndarray = field(repr=False)
    order: np.ndarray = field(repr=False)

    @property
    def edges(self):
        return [(int(self.parent[v]), int(v)) for v in self.order[1:]]

    def path_to_root(self, v):
        out = [int(v)]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out

    def to_json(self):
        return {"root": int(self.root), "edges": [list(e) for e in self.edges]}


def _check_weights(n, weights):
    if weights is None:
        return np.full(1 << n, 1.0 / (1 << n))
    w = np.asarray(weights, dtype=float)
    if w.shape != (1 << n,):
        raise DomainError(f"weights must have length 2**n = {1 << n}, got {w.shape}")
    if np.any(w < 0):
        raise DomainError("weights must be nonnegative")
    return w


def hypercube_edges(n):
    labels = np.arange(1 << n, dtype=np.int64)
    parts = []
    for k in range(n):
        lo = labels[((labels >> k) & 1) == 0]
        parts.append(np.stack([lo, lo | (1 << k)], axis=1))
    return np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)


def hypercube_graph(n, weights=None) -> EstimationGraph:
    n = check_qubits(n)
    w = _check_weights(n, weights)
    return EstimationGraph(n, w, hypercube_edges(n), np.ones(1 << n, dtype=bool), "hypercube")


def rotated_cycle_graph(n, weights=None) -> EstimationGraph:
    n = check_qubits(n)
    if n < 2:
        raise DomainError("rotated cycle needs n >= 2")
    w = _check_weights(n, weights)
    j = np.arange(1 << n, dtype=np.int64)
    e = np.stack([rotate_index(j, n), rotate_index((j + 1) % (1 << n), n)], axis=1)
    return EstimationGraph(n, w, e, np.ones(1 << n, dtype=bool), "rotated-cycle")


def graph_from_bases(bases, weights=None, kind="custom") -> EstimationGraph:
    n = bases[0].n
    w = _check_weights(n, weights)
    edges = sorted(set().union(*(b.edges() for b in bases)))
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    return EstimationGraph(n, w, e, np.ones(1 << n, dtype=bool), kind)


def prune_and_check_connectivity(g: EstimationGraph, tau=0.0):
    """Drop vertices with ``w_j <= tau``; report whether the rest is connected."""
    if tau < 0:
        raise DomainError("threshold must be nonnegative")
    alive = g.alive & (g.weights > tau)
    pruned = EstimationGraph(g.n, g.weights, g.edges, alive, g.kind)
    return pruned, pruned.is_connected()


def _bfs(g: EstimationGraph, source):
    indptr, indices, _ = g.csr
    dist = np.full(g.num_vertices, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    while frontier:
        nxt = []
        for v in frontier:
            for u in indices[indptr[v] : indptr[v + 1]]:
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    nxt.append(int(u))
        frontier = nxt
    return dist


def _component_of(g, v):
    for c in g.components():
        if v in c:
            return c
    return [v]


def optimal_path(g: EstimationGraph, j, k) -> PathResult:
    """Minimal-length path from ``j`` to ``k`` of maximal total vertex weight.

    Ties between equally heavy geodesics go to the lexicographically
    smallest vertex sequence.
    """
    for v in (j, k):
        if not 0 <= v < g.num_vertices or not g.alive[v]:
            raise DomainError(f"vertex {v} is not in the pruned graph")
    dk = _bfs(g, k)
    if dk[j] < 0:
        raise DisconnectedGraphError(
            f"no path between {j} and {k}", [_component_of(g, j), _component_of(g, k)]
        )
    indptr, indices, _ = g.csr
    w = g.weights
    # best[v]: heaviest geodesic weight from v to k, built outwards from k
    best = np.full(g.num_vertices, -np.inf)
    best[k] = w[k]
    for d in range(1, int(dk[j]) + 1):
        for v in np.flatnonzero(dk == d):
            nb = indices[indptr[v] : indptr[v + 1]]
            nb = nb[dk[nb] == d - 1]
            best[v] = w[v] + best[nb].max()
    path = [int(j)]
    v = j
    while v != k:
        nb = indices[indptr[v] : indptr[v + 1]]
        nb = nb[dk[nb] == dk[v] - 1]
        top = best[nb].max()
        v = int(nb[best[nb] >= top - TIE_TOL].min())
        path.append(v)
    return PathResult(tuple(path), len(path) - 1, float(w[path].sum()))


def _tree_from_kernel(g, root, score, unreliable):
    indptr, indices, eid = g.csr
    if unreliable is None:
        slot_unrel = np.zeros(len(indices), dtype=np.uint8)
    else:
        flags = np.asarray(unreliable, dtype=bool)
        slot_unrel = flags[eid].astype(np.uint8)
    parent, depth, order = kernels.shortest_path_tree(
        indptr, indices, score, slot_unrel, g.alive.astype(np.uint8), root
    )
    reached = depth >= 0
    if np.any(g.alive & ~reached):
        comps = g.components()
        raise DisconnectedGraphError(
            f"graph has {len(comps)} components; the tree from {root} misses "
            f"{int(np.sum(g.alive & ~reached))} live vertices",
            comps,
        )
    return Tree(int(root), parent, depth, order)


def default_root(g: EstimationGraph):
    w = np.where(g.alive, g.weights, -np.inf)
    return int(np.argmax(w))


def reconstruction_tree(g: EstimationGraph, root=None, unreliable=None) -> Tree:
    """Shortest-path spanning tree with heaviest-parent selection.

    ``unreliable`` flags live edges (indexed like ``g.live_edges``) that are
    only used when no other parent at the right depth exists.
    """
    if root is None:
        root = default_root(g)
    if not g.alive[root]:
        raise DomainError(f"root {root} was pruned")
    _, indices, _ = g.csr
    score = g.weights[indices]
    return _tree_from_kernel(g, root, score, unreliable)


def random_shortest_path_tree(g: EstimationGraph, rng, root=None, unreliable=None) -> Tree:
    """Shortest-path tree with uniformly random parent preferences."""
    if root is None:
        root = default_root(g)
    _, indices, _ = g.csr
    score = rng.random(len(indices))
    return _tree_from_kernel(g, root, score, unreliable)


def spanning_tree_count(n) -> int:
    """Number of spanning trees of the n-cube, ``2**-n prod (2i)**C(n,i)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    num = 1
    for i in range(1, n + 1):
        num *= (2 * i) ** comb(n, i)
    q, r = divmod(num, 1 << n)
    assert r == 0
    return q


def matrix_tree_count(g: EstimationGraph) -> int:
    """Spanning-tree count of the live subgraph by an exact integer determinant."""
    verts = [int(v) for v in np.flatnonzero(g.alive)]
    if len(verts) <= 1:
        return 1
    pos = {v: i for i, v in enumerate(verts)}
    m = len(verts)
    lap = [[0] * m for _ in range(m)]
    for a, b in g.live_edges:
        i, j = pos[int(a)], pos[int(b)]
        lap[i][j] -= 1
        lap[j][i] -= 1
        lap[i][i] += 1
        lap[j][j] += 1
    return bareiss_det([row[1:] for row in lap[1:]])


def bareiss_det(mat) -> int:
    """Fraction-free Gaussian elimination over the integers."""
    a = [list(r) for r in mat]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]
