"""Device-aware choice of a qubit chain from calibration error rates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .bases import two_n_plus_one_bases
from .errors import DomainError, NoChainError, SchemaError, SizeCapError
from .measurement import hellinger, stream_rng
from .state import X, Y, Z, _apply_matrix, graph_state_circuit, prepare_graph_state

ORACLE_MAX_NODES = 16
TIE_TOL = 1e-12
_PAULIS = (X, Y, Z)


@dataclass(frozen=True)
class DeviceGraph:
    """Calibration graph; ids are sorted once and addressed by position."""

    ids: tuple
    node_weight: np.ndarray = field(repr=False)
    edges: tuple = field(repr=False)  # (a_pos, b_pos, weight)
    directed: bool = False

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise SchemaError("node ids must be unique", "nodes")
        w = np.asarray(self.node_weight, dtype=float)
        if np.any(w < 0) or any(e[2] < 0 for e in self.edges):
            raise SchemaError("weights must be nonnegative", "weight")
        object.__setattr__(self, "node_weight", w)

    @classmethod
    def build(cls, nodes, edges, directed=False):
        """``nodes``: ``{id: weight}``; ``edges``: iterable of ``(a, b, weight)``."""
        ids = tuple(sorted(nodes))
        pos = {v: i for i, v in enumerate(ids)}
        w = np.array([nodes[v] for v in ids], dtype=float)
        es = []
        for a, b, ew in edges:
            if a not in pos or b not in pos:
                raise SchemaError(f"edge ({a}, {b}) references an unknown node", "edges")
            if a == b:
                raise SchemaError(f"self-loop on node {a}", "edges")
            es.append((pos[a], pos[b], float(ew)))
        return cls(ids, w, tuple(es), bool(directed))

    def __len__(self):
        return len(self.ids)

    @cached_property
    def csr(self):
        """``(indptr, indices, edge_weight)`` of outgoing arcs, rows sorted."""
        arcs = {}
        for a, b, w in self.edges:
            arcs[(a, b)] = min(w, arcs.get((a, b), np.inf))
            if not self.directed:
                arcs[(b, a)] = min(w, arcs.get((b, a), np.inf))
        keys = sorted(arcs)
        indptr = np.zeros(len(self.ids) + 1, dtype=np.int64)
        for a, _ in keys:
            indptr[a + 1] += 1
        indptr = np.cumsum(indptr)
        indices = np.array([b for _, b in keys], dtype=np.int64)
        ew = np.array([arcs[k] for k in keys], dtype=float)
        return indptr, indices, ew

    def arc_weight(self, a, b):
        indptr, indices, ew = self.csr
        row = indices[indptr[a] : indptr[a + 1]]
        hit = np.flatnonzero(row == b)
        if len(hit) == 0:
            raise DomainError(f"no arc {self.ids[a]} -> {self.ids[b]}")
        return float(ew[indptr[a] + hit[0]])

    def path_cost(self, positions):
        c = float(self.node_weight[list(positions)].sum())
        for a, b in zip(positions[:-1], positions[1:]):
            c += self.arc_weight(a, b)
        return c

    def reversed(self):
        return DeviceGraph(self.ids, self.node_weight, tuple((b, a, w) for a, b, w in self.edges), self.directed)

    def to_json(self):
        return {
            "directed": self.directed,
            "nodes": [{"id": v, "weight": float(w)} for v, w in zip(self.ids, self.node_weight)],
            "edges": [{"a": self.ids[a], "b": self.ids[b], "weight": w} for a, b, w in self.edges],
        }


@dataclass(frozen=True)
class QubitPath:
    nodes: tuple
    positions: tuple
    cost: float

    def to_json(self):
        return {"nodes": list(self.nodes), "cost": self.cost}


def _make_path(g, positions):
    positions = tuple(int(p) for p in positions)
    return QubitPath(tuple(g.ids[p] for p in positions), positions, g.path_cost(positions))


def best_fixed_length_path(g: DeviceGraph, D) -> QubitPath:
    """Cheapest ``D``-node path found in per-source shortest-path trees.

    Each source runs Dijkstra with step cost ``edge weight + weight of the
    entered node``; tree paths with exactly ``D`` nodes are the candidates.
    This is a heuristic: the optimal chain need not lie in any such tree.
    """
    if D < 1:
        raise DomainError("chain length must be >= 1")
    if len(g) == 0:
        raise DomainError("device graph is empty")
    indptr, indices, ew = g.csr
    step = ew + g.node_weight[indices]
    best = None
    for s in range(len(g)):
        dist, parent, hops = kernels.dijkstra(indptr, indices, step, s)
        for v in np.flatnonzero(hops == D - 1):
            cost = float(g.node_weight[s] + dist[v])
            path = [int(v)]
            while path[-1] != s:
                path.append(int(parent[path[-1]]))
            path = tuple(reversed(path))
            if best is None or cost < best[0] - TIE_TOL or (abs(cost - best[0]) <= TIE_TOL and path < best[1]):
                best = (cost, path)
    if best is None:
        raise NoChainError(f"no chain of {D} qubits in the shortest-path trees")
    return _make_path(g, best[1])


def exhaustive_paths_oracle(g: DeviceGraph, D) -> QubitPath:
    """True optimum over all simple ``D``-node paths (small graphs only)."""
    if len(g) > ORACLE_MAX_NODES:
        raise SizeCapError(f"oracle refuses graphs above {ORACLE_MAX_NODES} nodes (got {len(g)})")
    if D < 1:
        raise DomainError("chain length must be >= 1")
    indptr, indices, ew = g.csr
    cost, path, _ = kernels.best_simple_path(indptr, indices, ew, g.node_weight, D)
    if len(path) == 0:
        raise NoChainError(f"device has no simple chain of {D} qubits")
    return _make_path(g, path)


def random_path(g: DeviceGraph, D, rng, attempts=1000) -> QubitPath:
    """Uniformly seeded random simple path of ``D`` nodes (randomized DFS)."""
    indptr, indices, _ = g.csr
    for _ in range(attempts):
        path = [int(rng.integers(len(g)))]
        while len(path) < D:
            nb = [int(u) for u in indices[indptr[path[-1]] : indptr[path[-1] + 1]] if u not in path]
            if not nb:
                break
            path.append(nb[int(rng.integers(len(nb)))])
        if len(path) == D:
            return _make_path(g, path)
    raise NoChainError(f"no random chain of {D} qubits found")


def random_device_graph(n_nodes, rng, p_edge=0.35, directed=False, max_weight=0.05):
    nodes = {i: float(rng.uniform(0, max_weight)) for i in range(n_nodes)}
    edges = []
    for a in range(n_nodes):
        for b in range(n_nodes):
            if a == b or (not directed and b < a):
                continue
            if rng.random() < p_edge:
                edges.append((a, b, float(rng.uniform(0, 2 * max_weight))))
    return DeviceGraph.build(nodes, edges, directed)


# --- noisy preparation ------------------------------------------------------


def _depolarize(amps, targets, p, rng):
    """Apply a uniformly random non-identity Pauli string with probability ``p``."""
    m = amps.shape[0]
    n = int(np.log2(amps.shape[1]))
    if p <= 0:
        return amps
    hit = rng.random(m) < p
    k = len(targets)
    choice = rng.integers(1, 4**k, size=m)
    out = amps.copy()
    for c in np.unique(choice[hit]):
        sel = hit & (choice == c)
        sub = out[sel]
        for t, q in enumerate(targets):
            digit = (int(c) >> (2 * t)) & 3
            if digit:
                sub = _apply_matrix(sub, n, _PAULIS[digit - 1], (q,))
        out[sel] = sub
    return out


def noisy_graph_state_trajectories(g: DeviceGraph, path: QubitPath, shots, seed):
    """Pure-state trajectories of the graph-state circuit run on ``path``.

    One Pauli trajectory per shot: after every gate a depolarizing error with
    the node weight (single-qubit gates) or arc weight (ECR) of the device.
    """
    n = len(path.positions)
    rng = stream_rng(seed, 0x4E)
    amps = np.zeros((shots, 1 << n), dtype=complex)
    amps[:, 0] = 1.0
    for layer in graph_state_circuit(n):
        for gate in layer:
            amps = _apply_matrix(amps, n, gate.matrix, gate.targets)
            if len(gate.targets) == 1:
                p = g.node_weight[path.positions[gate.targets[0]]]
            else:
                a, b = (path.positions[t] for t in gate.targets)
                p = g.arc_weight(a, b)
            amps = _depolarize(amps, gate.targets, p, rng)
    return amps


def _sample_rows(probs, rng):
    probs = probs / probs.sum(axis=1, keepdims=True)
    u = rng.random(probs.shape[0])[:, None]
    out = (np.cumsum(probs, axis=1) < u).sum(axis=1)
    return np.bincount(np.minimum(out, probs.shape[1] - 1), minlength=probs.shape[1])


def tomography_hellinger(g: DeviceGraph, path: QubitPath, shots, seed):
    """Mean Hellinger distance to the ideal outcome distributions of the
    tomography bases (computational plus ``H``/``SH`` on each qubit).

    The computational distribution alone cannot register the device noise:
    the preparation is a Clifford circuit, so Pauli errors reach the output
    as Pauli errors, which leave the uniform computational distribution
    unchanged. Each basis reads the same trajectory batch.
    """
    n = len(path.positions)
    ideal = prepare_graph_state(n).amplitudes
    amps = noisy_graph_state_trajectories(g, path, shots, seed)
    rng = stream_rng(seed, 0x4F)
    dists = []
    for b in two_n_plus_one_bases(n):
        counts = _sample_rows(b.probabilities_by_outcome(amps), rng)
        dists.append(hellinger(counts / shots, b.probabilities_by_outcome(ideal)))
    return float(np.mean(dists))


@dataclass(frozen=True)
class HellingerComparison:
    optimized: np.ndarray
    control: np.ndarray

    @property
    def median_optimized(self):
        return float(np.median(self.optimized))

    @property
    def median_control(self):
        return float(np.median(self.control))

    def to_json(self):
        return {
            "optimized": [float(x) for x in self.optimized],
            "control": [float(x) for x in self.control],
            "median_optimized": self.median_optimized,
            "median_control": self.median_control,
        }


def compare_selection_hellinger(g: DeviceGraph, optimized: QubitPath, control: QubitPath, shots=2000, seeds=range(10)):
    """Hellinger distance to the ideal distribution for both chains, per seed."""
    n = len(optimized.positions)
    if len(control.positions) != n:
        raise DomainError("both paths must have the same length")
    out = {"opt": [], "ctl": []}
    for s in seeds:
        for key, path in (("opt", optimized), ("ctl", control)):
            out[key].append(tomography_hellinger(g, path, shots, s))
    return HellingerComparison(np.array(out["opt"]), np.array(out["ctl"]))


# --- files ------------------------------------------------------------------


def device_from_json(doc) -> DeviceGraph:
    if not isinstance(doc, dict):
        raise SchemaError("device file must be a JSON object", "device")
    for key in ("nodes", "edges"):
        if key not in doc or not isinstance(doc[key], list):
            raise SchemaError(f"device file needs a list field {key!r}", key)
    nodes = {}
    for i, nd in enumerate(doc["nodes"]):
        if not isinstance(nd, dict) or "id" not in nd or "weight" not in nd:
            raise SchemaError(f"nodes[{i}] needs 'id' and 'weight'", "nodes")
        if nd["id"] in nodes:
            raise SchemaError(f"duplicate node id {nd['id']!r}", "nodes")
        nodes[nd["id"]] = float(nd["weight"])
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not isinstance(e, dict) or not {"a", "b", "weight"} <= set(e):
            raise SchemaError(f"edges[{i}] needs 'a', 'b' and 'weight'", "edges")
        edges.append((e["a"], e["b"], float(e["weight"])))
    return DeviceGraph.build(nodes, edges, bool(doc.get("directed", False)))


def read_device_file(path) -> DeviceGraph:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc.msg})", "file") from exc
    return device_from_json(doc)
