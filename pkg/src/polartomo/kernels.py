"""Backend selection for the graph kernels.

The compiled extension is used when it was built; setting
``POLARTOMO_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

import os

import numpy as np

if os.environ.get("POLARTOMO_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

        BACKEND = "python"


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _u8(a):
    return np.ascontiguousarray(a, dtype=np.uint8)


def shortest_path_tree(indptr, indices, score, unreliable, alive, root, impl=None):
    impl = impl or _impl
    return impl.shortest_path_tree(
        _i64(indptr), _i64(indices), _f64(score), _u8(unreliable), _u8(alive), int(root)
    )


def propagate_phases(order, parent, step_phase, step_var, impl=None):
    impl = impl or _impl
    return impl.propagate_phases(_i64(order), _i64(parent), _f64(step_phase), _f64(step_var))


def dijkstra(indptr, indices, cost, source, impl=None):
    impl = impl or _impl
    return impl.dijkstra(_i64(indptr), _i64(indices), _f64(cost), int(source))


def best_simple_path(indptr, indices, edge_w, node_w, length, impl=None):
    impl = impl or _impl
    cost, path, count = impl.best_simple_path(
        _i64(indptr), _i64(indices), _f64(edge_w), _f64(node_w), int(length)
    )
    return float(cost), np.asarray(path, dtype=np.int64), int(count)
