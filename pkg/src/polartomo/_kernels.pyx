# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels; semantics mirror ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

cdef double TIE_TOL = 1e-12


def shortest_path_tree(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
                       const double[:] score, const cnp.uint8_t[:] unreliable,
                       const cnp.uint8_t[:] alive, Py_ssize_t root):
    cdef Py_ssize_t nv = indptr.shape[0] - 1
    depth_a = np.full(nv, -1, dtype=np.int64)
    parent_a = np.full(nv, -1, dtype=np.int64)
    order_a = np.empty(nv, dtype=np.int64)
    cdef cnp.int64_t[:] depth = depth_a
    cdef cnp.int64_t[:] parent = parent_a
    cdef cnp.int64_t[:] order = order_a
    cdef Py_ssize_t head = 0, tail = 1, i, v, u, e, best
    cdef int ur, best_unrel
    cdef double s, best_score
    depth[root] = 0
    order[0] = root
    while head < tail:
        v = order[head]
        head += 1
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if alive[u] and depth[u] < 0:
                depth[u] = depth[v] + 1
                order[tail] = u
                tail += 1
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
            if (best < 0 or ur < best_unrel
                    or (ur == best_unrel and s > best_score + TIE_TOL)
                    or (ur == best_unrel and fabs(s - best_score) <= TIE_TOL and u < best)):
                best = u
                best_unrel = ur
                best_score = s
        parent[v] = best
    return parent_a, depth_a, order_a[:tail].copy()


def propagate_phases(const cnp.int64_t[:] order, const cnp.int64_t[:] parent,
                     const double[:] step_phase, const double[:] step_var):
    cdef Py_ssize_t nv = parent.shape[0], i, v, p
    phase_a = np.zeros(nv, dtype=np.float64)
    var_a = np.zeros(nv, dtype=np.float64)
    cdef double[:] phase = phase_a
    cdef double[:] var = var_a
    for i in range(1, order.shape[0]):
        v = order[i]
        p = parent[v]
        phase[v] = phase[p] - step_phase[v]
        var[v] = var[p] + step_var[v]
    return phase_a, var_a


def dijkstra(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
             const double[:] cost, Py_ssize_t source):
    cdef Py_ssize_t nv = indptr.shape[0] - 1, it, u, v, e
    dist_a = np.full(nv, np.inf)
    parent_a = np.full(nv, -1, dtype=np.int64)
    hops_a = np.full(nv, -1, dtype=np.int64)
    done_a = np.zeros(nv, dtype=np.uint8)
    cdef double[:] dist = dist_a
    cdef cnp.int64_t[:] parent = parent_a
    cdef cnp.int64_t[:] hops = hops_a
    cdef cnp.uint8_t[:] done = done_a
    cdef double best, nd
    dist[source] = 0.0
    hops[source] = 0
    for it in range(nv):
        v = -1
        best = INFINITY
        for u in range(nv):
            if not done[u] and dist[u] < best:
                best = dist[u]
                v = u
        if v < 0:
            break
        done[v] = 1
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if done[u]:
                continue
            nd = dist[v] + cost[e]
            if nd < dist[u]:
                dist[u] = nd
                parent[u] = v
                hops[u] = hops[v] + 1
    return dist_a, parent_a, hops_a


def best_simple_path(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
                     const double[:] edge_w, const double[:] node_w, Py_ssize_t length):
    cdef Py_ssize_t nv = indptr.shape[0] - 1
    cdef double best_cost = INFINITY
    best_path = np.empty(0, dtype=np.int64)
    cdef long long count = 0
    if length < 1 or nv == 0:
        return best_cost, best_path, count
    path_a = np.zeros(length, dtype=np.int64)
    ptr_a = np.zeros(length, dtype=np.int64)
    prefix_a = np.zeros(length, dtype=np.float64)
    on_a = np.zeros(nv, dtype=np.uint8)
    cdef cnp.int64_t[:] path = path_a
    cdef cnp.int64_t[:] ptr = ptr_a
    cdef double[:] prefix = prefix_a
    cdef cnp.uint8_t[:] on_path = on_a
    cdef Py_ssize_t s, d, v, u, e
    cdef bint advanced
    cdef double c
    for s in range(nv):
        path[0] = s
        prefix[0] = node_w[s]
        on_path[s] = 1
        ptr[0] = indptr[s]
        d = 0
        while d >= 0:
            if d == length - 1:
                count += 1
                c = prefix[d]
                if c < best_cost - TIE_TOL:
                    best_cost = c
                    best_path = path_a.copy()
                on_path[path[d]] = 0
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
                on_path[u] = 1
                ptr[d + 1] = indptr[u]
                d += 1
                advanced = True
                break
            if not advanced:
                on_path[v] = 0
                d -= 1
    return best_cost, best_path, count
