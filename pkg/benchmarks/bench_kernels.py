"""Time the compiled graph kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 10] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from polartomo import _kernels_py, kernels
from polartomo.graph import hypercube_graph

try:
    from polartomo import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _cases(n, rng):
    g = hypercube_graph(n)
    indptr, indices, _ = g.csr
    dim = 1 << n
    score = rng.random(len(indices))
    unreliable = np.zeros(len(indices), dtype=np.uint8)
    alive = np.ones(dim, dtype=np.uint8)
    parent = np.full(dim, -1, dtype=np.int64)
    parent[1:] = np.arange(1, dim) & (np.arange(1, dim) - 1)  # clear lowest set bit
    order = np.argsort(np.bitwise_count(np.arange(dim)), kind="stable")
    phase, var = rng.random(dim), rng.random(dim)
    cost = rng.random(len(indices))
    m = 24
    dev_ptr = np.arange(0, 2 * m + 1, 2)
    dev_idx = np.sort(np.stack([(np.arange(m) - 1) % m, (np.arange(m) + 1) % m], axis=1), axis=1).ravel()
    dev_w, node_w = rng.random(2 * m), rng.random(m)
    return {
        "shortest_path_tree": lambda impl: kernels.shortest_path_tree(
            indptr, indices, score, unreliable, alive, 0, impl=impl
        ),
        "propagate_phases": lambda impl: kernels.propagate_phases(order, parent, phase, var, impl=impl),
        "dijkstra": lambda impl: kernels.dijkstra(indptr, indices, cost, 0, impl=impl),
        "best_simple_path": lambda impl: kernels.best_simple_path(dev_ptr, dev_idx, dev_w, node_w, 8, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = _cases(args.n, np.random.default_rng(0))
    print(f"hypercube n={args.n}, compiled backend {'available' if _kernels_c else 'missing'}")
    print(f"{'kernel':<20} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _kernels_c is None:
            print(f"{name:<20} {t_py:12.3f} {'-':>12} {'-':>8}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_kernels_c), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20} {t_py:12.3f} {t_c:12.3f} {t_py / t_c:8.1f}x")


if __name__ == "__main__":
    main()
