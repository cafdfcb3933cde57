"""Pure-Python graph kernels.

Reference implementation of the routines in ``_kernels.pyx``. Both versions
visit vertices and neighbours in the same order and accumulate floating-point
sums in the same order, so they return identical arrays.

All graphs are passed in CSR form: the neighbours of ``v`` are
``indices[indptr[v]:indptr[v + 1]]`` and must be sorted ascending.
"""

import numpy as np

TIE_TOL = 1e-12


def shortest_path_tree(indptr, indices, score, unreliable, alive, root):
    """BFS tree from ``root`` with a ranked parent choice.

    For every reached vertex the parent is picked among neighbours one layer
    closer to the root, minimising ``(unreliable[e], -score[e], u)`` where
    ``e`` is the CSR slot of the candidate ``u`` in the row of the child.

    Returns ``(parent, depth, order)``; unreached vertices have depth -1 and
    parent -1, ``order`` lists reached vertices in BFS order.
    """
    nv = len(indptr) - 1
    depth = np.full(nv, -1, dtype=np.int64)
    parent = np.full(nv, -1, dtype=np.int64)
    order = np.empty(nv, dtype=np.int64)
    depth[root] = 0
    order[0] = root
    head, tail = 0, 1
    while head < tail:
        v = order[head]
        head += 1
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if alive[u] and depth[u] < 0:
                depth[u] = depth[v] + 1
                order[tail] = u
                tail += 1
    order = order[:tail].copy()
    for i in range(1, tail):
        v = order[i]
        best = -1
        best_unrel = 2
        best_score = 0.0
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if not alive[u] or depth[u] != depth[v] - 1:
                continue
            ur = 1 if unreliable[e] else 0
            s = score[e]
            if (
                best < 0
                or ur < best_unrel
                or (ur == best_unrel and s > best_score + TIE_TOL)
                or (ur == best_unrel and abs(s - best_score) <= TIE_TOL and u < best)
            ):
                best, best_unrel, best_score = u, ur, s
        parent[v] = best
    return parent, depth, order


def propagate_phases(order, parent, step_phase, step_var):
    """Accumulate phases and their variances from the root outwards.

    ``phase[v] = phase[parent[v]] - step_phase[v]`` and the variance adds up
    along the tree path.
    """
    nv = len(parent)
    phase = np.zeros(nv, dtype=np.float64)
    var = np.zeros(nv, dtype=np.float64)
    for i in range(1, len(order)):
        v = order[i]
        p = parent[v]
        phase[v] = phase[p] - step_phase[v]
        var[v] = var[p] + step_var[v]
    return phase, var


def dijkstra(indptr, indices, cost, source):
    """Dense O(V^2) Dijkstra; ties resolved towards the smaller vertex id.

    ``cost[e]`` is the price of stepping along CSR slot ``e``. Returns
    ``(dist, parent, hops)`` with ``inf``/-1/-1 for unreachable vertices.
    """
    nv = len(indptr) - 1
    dist = np.full(nv, np.inf)
    parent = np.full(nv, -1, dtype=np.int64)
    hops = np.full(nv, -1, dtype=np.int64)
    done = np.zeros(nv, dtype=bool)
    dist[source] = 0.0
    hops[source] = 0
    for _ in range(nv):
        v = -1
        best = np.inf
        for u in range(nv):
            if not done[u] and dist[u] < best:
                best = dist[u]
                v = u
        if v < 0:
            break
        done[v] = True
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if done[u]:
                continue
            nd = dist[v] + cost[e]
            if nd < dist[u]:
                dist[u] = nd
                parent[u] = v
                hops[u] = hops[v] + 1
    return dist, parent, hops


def best_simple_path(indptr, indices, edge_w, node_w, length):
    """Exhaustive DFS over simple paths with exactly ``length`` nodes.

    Cost is the sum of node weights plus edge weights along the path.
    Enumeration is lexicographic, so the first path found among equal-cost
    candidates is the lexicographically smallest. Returns
    ``(best_cost, best_path, n_paths)``; ``best_path`` is empty if no path
    exists.
    """
    nv = len(indptr) - 1
    best_cost = np.inf
    best_path = np.empty(0, dtype=np.int64)
    count = 0
    if length < 1 or nv == 0:
        return best_cost, best_path, count
    path = np.zeros(length, dtype=np.int64)
    ptr = np.zeros(length, dtype=np.int64)
    prefix = np.zeros(length, dtype=np.float64)
    on_path = np.zeros(nv, dtype=bool)
    for s in range(nv):
        path[0] = s
        prefix[0] = node_w[s]
        on_path[s] = True
        ptr[0] = indptr[s]
        d = 0
        while d >= 0:
            if d == length - 1:
                count += 1
                c = prefix[d]
                if c < best_cost - TIE_TOL:
                    best_cost = c
                    best_path = path.copy()
                on_path[path[d]] = False
                d -= 1
                continue
            v = path[d]
            advanced = False
            while ptr[d] < indptr[v + 1]:
                e = ptr[d]
                ptr[d] += 1
                u = indices[e]
                if on_path[u]:
                    continue
                path[d + 1] = u
                prefix[d + 1] = prefix[d] + edge_w[e] + node_w[u]
                on_path[u] = True
                ptr[d + 1] = indptr[u]
                d += 1
                advanced = True
                break
            if not advanced:
                on_path[v] = False
                d -= 1
    return best_cost, best_path, count
