"""Edge estimates, analytic reconstruction, purity certificate.

The stored edge quantity is ``rho_hat = a_j a_k^*`` for ``j < k``. Other
scalings in use elsewhere are ``4 * rho_hat`` (chain closed form) and
``2 * rho_hat`` (the error-propagation convention); the variance fields of
:class:`LambdaEstimate` refer to the latter, ``Lambda = 2 * rho_hat``.

Input probabilities follow the bra convention: ``p+`` and ``p-`` belong to
``(<j| +- <k|) psi``, ``pt+`` and ``pt-`` to ``(<j| +- i<k|) psi``. With ket
basis vectors ``|j> + i^l |k>`` this means ``pt+`` is the ``l = 3`` vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bases import MeasurementBasis
from .errors import DisconnectedGraphError, DomainError, NoChainError
from .graph import (
    EstimationGraph,
    Tree,
    prune_and_check_connectivity,
    random_shortest_path_tree,
    reconstruction_tree,
)
from .measurement import NoiseModel, outcome_probabilities
from .state import H, StateVector, apply_local, rotate_index

EXACT_FLOOR = 1e-12
UNRELIABLE_SIGMAS = 3.0
LOG_FLOOR = 1e-12


# --- data -------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Probabilities (exact or empirical) for every basis of one family.

    ``shots[id]`` is None for exact probabilities.
    """

    n: int
    bases: tuple
    probabilities: dict = field(repr=False)
    shots: dict = field(repr=False)
    counts: dict = field(repr=False)

    @classmethod
    def from_exact(cls, bases, state: StateVector, noise: NoiseModel | None = None):
        probs = {b.id: outcome_probabilities(state, b, noise).probabilities for b in bases}
        return cls(bases[0].n, tuple(bases), probs, {b.id: None for b in bases}, {b.id: None for b in bases})

    @classmethod
    def from_distributions(cls, bases, dists):
        probs = {d.basis_id: np.asarray(d.probabilities, float) for d in dists}
        return cls(bases[0].n, tuple(bases), probs, {b.id: None for b in bases}, {b.id: None for b in bases})

    @classmethod
    def from_counts(cls, bases, tables):
        by_id = {t.basis_id: t for t in tables}
        missing = [b.id for b in bases if b.id not in by_id]
        if missing:
            raise DomainError(f"no counts for bases {missing}")
        probs = {b.id: by_id[b.id].frequencies().probabilities for b in bases}
        shots = {b.id: by_id[b.id].shots for b in bases}
        counts = {b.id: by_id[b.id].counts for b in bases}
        return cls(bases[0].n, tuple(bases), probs, shots, counts)

    @property
    def computational(self) -> MeasurementBasis:
        for b in self.bases:
            if b.is_computational:
                return b
        raise DomainError("dataset has no computational basis")

    @property
    def weights(self):
        return self.probabilities[self.computational.id]

    @property
    def computational_shots(self):
        return self.shots[self.computational.id]


# --- edge estimates ---------------------------------------------------------


@dataclass(frozen=True)
class LambdaEstimate:
    edge: tuple
    rho_hat: complex
    var_re: float
    var_im: float
    var_abs: float
    var_phase: float
    shots: int | None
    unreliable: bool

    @property
    def lambda_chain(self):
        return 4 * self.rho_hat

    @property
    def lambda_error(self):
        return 2 * self.rho_hat


def _variances(pp, pm, ptp, ptm, wj, wk, n_re, n_im):
    with np.errstate(divide="ignore", invalid="ignore"):
        var_re = ((pp + pm) - (pp - pm) ** 2) / n_re
        var_im = ((ptp + ptm) - (ptp - ptm) ** 2) / n_im
        var_abs = (wj + wk - 4 * wj * wk) / n_re
        lam = (pp - pm) + 1j * (ptp - ptm)
        mod2 = np.abs(lam) ** 2
        var_phase = (lam.imag**2 * var_re + lam.real**2 * var_im) / mod2**2
        var_phase = np.where(mod2 > 0, var_phase, np.inf)
    var_phase = np.where((var_re == 0) & (var_im == 0) & (mod2 > 0), 0.0, var_phase)
    return var_re, var_im, var_abs, var_phase


def _unreliable(rho, var_re, var_im):
    # variances are for 2 * rho_hat
    sd = np.sqrt(var_re + var_im) / 2
    return (np.abs(rho) < UNRELIABLE_SIGMAS * sd) | (np.abs(rho) <= EXACT_FLOOR)


def lambda_from_counts(p_plus, p_minus, pt_plus, pt_minus, w_j, w_k, N=None, N_im=None, edge=(0, 1)):
    """Estimate ``a_j a_k^*`` for one edge from its four probabilities."""
    n_re = np.inf if N is None else float(N)
    n_im = n_re if N_im is None else float(N_im)
    rho = ((p_plus - p_minus) + 1j * (pt_plus - pt_minus)) / 2
    vr, vi, va, vp = _variances(p_plus, p_minus, pt_plus, pt_minus, w_j, w_k, n_re, n_im)
    return LambdaEstimate(
        tuple(edge),
        complex(rho),
        float(vr),
        float(vi),
        float(va),
        float(vp),
        None if N is None else int(N),
        bool(_unreliable(rho, vr, vi)),
    )


@dataclass(frozen=True)
class EdgeEstimates:
    """Vectorized edge estimates, sorted by ``(j, k)`` with ``j < k``."""

    n: int
    edges: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    var_re: np.ndarray = field(repr=False)
    var_im: np.ndarray = field(repr=False)
    var_abs: np.ndarray = field(repr=False)
    var_phase: np.ndarray = field(repr=False)
    shots: np.ndarray = field(repr=False)
    unreliable: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.edges)

    @property
    def keys(self):
        return self.edges[:, 0] * (1 << self.n) + self.edges[:, 1]

    def lookup(self, j, k):
        """Indices of edges ``{j, k}`` (either order); -1 when absent."""
        j = np.asarray(j, dtype=np.int64)
        k = np.asarray(k, dtype=np.int64)
        key = np.minimum(j, k) * (1 << self.n) + np.maximum(j, k)
        keys = self.keys
        pos = np.searchsorted(keys, key)
        pos = np.minimum(pos, len(keys) - 1)
        return np.where(keys[pos] == key, pos, -1)

    def oriented_rho(self, j, k):
        """``a_j a_k^*`` for arbitrary orientation."""
        idx = self.lookup(j, k)
        if np.any(idx < 0):
            raise DomainError("edge not probed by the measured bases")
        r = self.rho[idx]
        return np.where(np.asarray(j) < np.asarray(k), r, np.conj(r))

    def get(self, j, k) -> LambdaEstimate:
        i = int(self.lookup(j, k))
        if i < 0:
            raise DomainError(f"edge ({j}, {k}) not probed")
        sh = self.shots[i]
        return LambdaEstimate(
            (int(self.edges[i, 0]), int(self.edges[i, 1])),
            complex(self.rho[i]),
            float(self.var_re[i]),
            float(self.var_im[i]),
            float(self.var_abs[i]),
            float(self.var_phase[i]),
            None if not np.isfinite(sh) else int(sh),
            bool(self.unreliable[i]),
        )


def edge_estimates(data: Dataset) -> EdgeEstimates:
    """Combine every edge-probing basis into per-edge ``rho_hat`` values."""
    n = data.n
    dim = 1 << n
    lo, hi, ell, p, shots = [], [], [], [], []
    for b in data.bases:
        if b.is_computational:
            continue
        probs = data.probabilities[b.id]
        lo.append(b.low)
        hi.append(b.high)
        ell.append(b.ell)
        p.append(probs[b.outcome])
        N = data.shots[b.id]
        shots.append(np.full(len(b), np.inf if N is None else float(N)))
    if not lo:
        empty = np.empty(0)
        return EdgeEstimates(n, np.empty((0, 2), np.int64), empty.astype(complex), *([empty] * 6))
    lo, hi, ell, p, shots = map(np.concatenate, (lo, hi, ell, p, shots))
    keys, inv = np.unique(lo * dim + hi, return_inverse=True)
    m = len(keys)
    P = np.full((m, 4), np.nan)
    P[inv, ell] = p
    Ns = np.full((m, 2), np.nan)
    Ns[inv, ell % 2] = shots
    ok = ~np.isnan(P).any(axis=1)
    keys, P, Ns = keys[ok], P[ok], Ns[ok]
    edges = np.stack([keys // dim, keys % dim], axis=1)
    w = data.weights
    pp, pm, ptp, ptm = P[:, 0], P[:, 2], P[:, 3], P[:, 1]
    rho = ((pp - pm) + 1j * (ptp - ptm)) / 2
    vr, vi, va, vp = _variances(pp, pm, ptp, ptm, w[edges[:, 0]], w[edges[:, 1]], Ns[:, 0], Ns[:, 1])
    unrel = _unreliable(rho, vr, vi)
    return EdgeEstimates(n, edges, rho, vr, vi, va, vp, Ns[:, 0], unrel)


def estimation_graph(data: Dataset, est: EdgeEstimates, kind="measured") -> EstimationGraph:
    return EstimationGraph(data.n, data.weights, est.edges, np.ones(1 << data.n, dtype=bool), kind)


def default_threshold(data: Dataset):
    N = data.computational_shots
    return EXACT_FLOOR if N is None else 1.0 / (10 * N)


# --- results ----------------------------------------------------------------


@dataclass(frozen=True)
class PurityReport:
    P: float
    residuals: np.ndarray = field(repr=False)
    floor: float
    edges: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ReconstructionResult:
    amplitudes: np.ndarray = field(repr=False)
    root: int
    structure: str
    tree: Tree | None = None
    order: np.ndarray | None = field(default=None, repr=False)
    phase_variance: np.ndarray | None = field(default=None, repr=False)
    method: str | None = None
    fidelity: float | None = None
    purity: PurityReport | None = None

    @property
    def n(self):
        return int(np.log2(len(self.amplitudes)))

    @property
    def state(self) -> StateVector:
        return StateVector(self.n, self.amplitudes)

    def with_fields(self, **kw):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return ReconstructionResult(**d)

    def to_json(self):
        tree = None
        if self.tree is not None:
            tree = self.tree.to_json()
        elif self.order is not None:
            o = [int(v) for v in self.order]
            tree = {"root": o[0], "edges": [[a, b] for a, b in zip(o[:-1], o[1:])]}
        pv = None if self.phase_variance is None else [float(v) for v in self.phase_variance]
        return {
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
            "fidelity": None if self.fidelity is None else float(self.fidelity),
            "purity_P": None if self.purity is None else float(self.purity.P),
            "purity_floor": None if self.purity is None else float(self.purity.floor),
            "phase_variances": pv,
            "tree": tree,
            "structure": self.structure,
            "method": self.method,
            "conventions": {"lambda": "rho_hat", "root_phase": 0},
        }


def _finalize(amps, root):
    amps = np.asarray(amps, dtype=complex)
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise DomainError("reconstruction produced the zero vector")
    amps = amps / norm
    ph = np.angle(amps[root]) if abs(amps[root]) > 0 else 0.0
    amps = amps * np.exp(-1j * ph)
    amps[root] = abs(amps[root])
    return amps


# --- chain ------------------------------------------------------------------


def chain_order(est: EdgeEstimates):
    """Label sequence along the measured cycle: ``0, 1, 2, ...`` or its Gray image."""
    dim = 1 << est.n
    plain = np.arange(dim, dtype=np.int64)
    if np.all(est.lookup(plain[:-1], plain[1:]) >= 0):
        return plain
    gray = rotate_index(plain, est.n) if est.n >= 2 else plain
    if np.all(est.lookup(gray[:-1], gray[1:]) >= 0):
        return gray
    raise NoChainError("measured edges contain no Hamiltonian chain through all labels")


def reconstruct_chain(est: EdgeEstimates, weights, order=None, form="closed", method=None) -> ReconstructionResult:
    """Solve the consecutive-edge system along ``order``.

    ``form="closed"`` evaluates the product formula (in log-modulus and
    phase sums, which avoids underflow at large n); ``form="recursive"``
    steps ``a_m = conj(L) / (2 conj(a_{m-1}))`` with ``L = 2 rho_hat``.
    Magnitudes come from the edge products, only ``a_0`` from ``weights``.
    """
    if order is None:
        order = chain_order(est)
    order = np.asarray(order, dtype=np.int64)
    dim = len(order)
    a0 = float(np.sqrt(max(weights[order[0]], 0.0)))
    if a0 <= EXACT_FLOOR:
        raise NoChainError(f"chain start {int(order[0])} has zero weight")
    idx = est.lookup(order[:-1], order[1:])
    if np.any(idx < 0):
        raise NoChainError("chain uses an edge that was not measured")
    if np.any(est.unreliable[idx]):
        bad = order[1:][est.unreliable[idx]]
        raise NoChainError(f"chain broken at labels {bad.tolist()[:8]}: edge value below noise floor")
    rho = est.oriented_rho(order[:-1], order[1:])
    amps = np.zeros(1 << est.n, dtype=complex)
    if form == "closed":
        lam = 4 * rho  # lam[m - 1] couples order[m - 1] and order[m]
        s = np.log(np.abs(lam))
        theta = np.angle(lam)
        m = np.arange(1, dim)
        even = m % 2 == 0
        cs_even = np.concatenate([[0.0], np.cumsum(np.where(even, s, 0.0))])
        cs_odd = np.concatenate([[0.0], np.cumsum(np.where(~even, s, 0.0))])
        cs_theta = np.concatenate([[0.0], np.cumsum(theta)])
        j = np.arange(dim)
        # even j: a0 prod_{even<=j} L*/prod_{odd<j} L ; odd j: prod_{odd<=j} L*/(4 a0 prod_{even<j} L)
        logmod = np.where(
            j % 2 == 0,
            np.log(a0) + cs_even[j] - cs_odd[j],
            -np.log(4 * a0) + cs_odd[j] - cs_even[j],
        )
        vals = np.exp(logmod - 1j * cs_theta[j])
        amps[order] = vals
    elif form == "recursive":
        lam = 2 * rho
        amps[order[0]] = a0
        for m in range(1, dim):
            amps[order[m]] = np.conj(lam[m - 1]) / (2 * np.conj(amps[order[m - 1]]))
    else:
        raise DomainError(f"unknown chain form {form!r}")
    var = np.zeros(1 << est.n)
    var[order] = np.concatenate([[0.0], np.cumsum(est.var_phase[idx])])
    root = int(order[0])
    return ReconstructionResult(_finalize(amps, root), root, "chain", order=order, phase_variance=var, method=method)


# --- tree -------------------------------------------------------------------


def _edge_flags_for(g: EstimationGraph, est: EdgeEstimates):
    e = g.live_edges
    idx = est.lookup(e[:, 0], e[:, 1])
    return est.unreliable[idx]


def reconstruct_tree(
    g: EstimationGraph, est: EdgeEstimates, tree: Tree | None = None, method=None
) -> ReconstructionResult:
    """Magnitudes from the vertex weights, phases propagated along ``tree``.

    ``g`` is the pruned graph; pruned vertices get amplitude 0.
    """
    comps = g.components()
    if len(comps) != 1:
        raise DisconnectedGraphError(
            f"estimation graph splits into {len(comps)} components above the pruning threshold", comps
        )
    if tree is None:
        tree = reconstruction_tree(g, unreliable=_edge_flags_for(g, est))
    if g.weights[tree.root] <= 0:
        raise DomainError("tree root has zero weight")
    nv = g.num_vertices
    step_phase = np.zeros(nv)
    step_var = np.zeros(nv)
    child = tree.order[1:]
    par = tree.parent[child]
    rho = est.oriented_rho(par, child)
    step_phase[child] = np.angle(rho)
    step_var[child] = est.var_phase[est.lookup(par, child)]
    phase, var = kernels.propagate_phases(tree.order, tree.parent, step_phase, step_var)
    mag = np.where(g.alive, np.sqrt(np.clip(g.weights, 0, None)), 0.0)
    amps = mag * np.exp(1j * phase)
    var = np.where(g.alive, var, np.nan)
    return ReconstructionResult(_finalize(amps, tree.root), tree.root, "tree", tree=tree, phase_variance=var, method=method)


def candidate_trees(g: EstimationGraph, est: EdgeEstimates, K=32, seed=0):
    """Default greedy tree plus ``K`` randomized shortest-path trees.

    Odd-numbered random candidates also draw a random live root.
    """
    flags = _edge_flags_for(g, est)
    out = [reconstruction_tree(g, unreliable=flags)]
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0x7EE,)))
    live = np.flatnonzero(g.alive)
    for i in range(K):
        root = int(rng.choice(live)) if i % 2 == 1 else None
        out.append(random_shortest_path_tree(g, rng, root=root, unreliable=flags))
    return out


def log_likelihood(amplitudes, data: Dataset):
    """Multinomial log-likelihood of all observed data under ``amplitudes``.

    Exact datasets weight by probabilities instead of counts.
    """
    total = 0.0
    for b in data.bases:
        p = np.clip(b.probabilities_by_outcome(amplitudes), LOG_FLOOR, None)
        c = data.counts[b.id]
        weights = data.probabilities[b.id] if c is None else c
        total += float(np.dot(weights, np.log(p)))
    return total


def select_best_reconstruction(candidates, data: Dataset | None = None, mode="blind", target=None):
    """Pick the best candidate; earliest index wins ties.

    ``mode="benchmark"`` maximizes fidelity to ``target``; ``"blind"``
    maximizes the log-likelihood of ``data``.
    """
    if not candidates:
        raise DomainError("no candidates")
    if len(candidates) == 1:
        return candidates[0]
    if mode == "benchmark":
        if target is None:
            raise DomainError("benchmark mode needs a target state")
        t = target.amplitudes if isinstance(target, StateVector) else np.asarray(target)
        scores = [float(np.abs(np.vdot(c.amplitudes, t)) ** 2) for c in candidates]
    elif mode == "blind":
        if data is None:
            raise DomainError("blind mode needs the measured data")
        scores = [log_likelihood(c.amplitudes, data) for c in candidates]
    else:
        raise DomainError(f"unknown selection mode {mode!r}")
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best] + 1e-12 * max(1.0, abs(scores[best])):
            best = i
    return candidates[best]


# --- zeros ------------------------------------------------------------------


def haar_unitary(rng):
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def prerotate_for_zeros(weights_of, graph_of, n, tau=EXACT_FLOOR, retries=16, seed=0):
    """Local rotations that make the estimation graph connected.

    ``weights_of(unitaries)`` returns computational-basis weights of the
    rotated state (exact or estimated); ``graph_of(weights)`` builds the
    family's estimation graph. The unrotated state is tried first, then
    ``H`` on every qubit, then ``retries`` Haar-random local rotations.
    """
    identity = [np.eye(2, dtype=complex) for _ in range(n)]
    proposals = [("identity", identity), ("hadamard", [H.copy() for _ in range(n)])]
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0x0207,)))
    tried = []
    for attempt in range(len(proposals) + retries):
        if attempt < len(proposals):
            name, us = proposals[attempt]
        else:
            name, us = f"random-{attempt - len(proposals)}", [haar_unitary(rng) for _ in range(n)]
        _, connected = prune_and_check_connectivity(graph_of(weights_of(us)), tau)
        tried.append(name)
        if connected:
            return us
    raise DisconnectedGraphError(
        f"no local rotation among {len(tried)} tried ({', '.join(tried[:4])}, ...) connects the graph", []
    )


def rotated_state(state: StateVector, unitaries):
    return apply_local(state, unitaries)


def unrotate_amplitudes(amplitudes, n, unitaries):
    """Undo local rotations: ``psi = (U_0^dag x ... ) psi'``."""
    s = StateVector(n, np.asarray(amplitudes, dtype=complex) / np.linalg.norm(amplitudes))
    return apply_local(s, [np.conj(u).T for u in unitaries]).amplitudes


# --- purity -----------------------------------------------------------------


def purity_metric(est: EdgeEstimates, data: Dataset, g: EstimationGraph | None = None) -> PurityReport:
    """Root-sum-square of ``|rho_jk|^2 - rho_jj rho_kk`` over graph edges.

    The floor is the delta-method standard deviation of that sum of squares
    under pure-state data with the same shot counts.
    """
    edges = est.edges if g is None else g.live_edges
    idx = est.lookup(edges[:, 0], edges[:, 1])
    if np.any(idx < 0):
        raise DomainError("graph contains edges without estimates")
    w = data.weights
    wj, wk = w[edges[:, 0]], w[edges[:, 1]]
    rho = est.rho[idx]
    resid = np.abs(rho) ** 2 - wj * wk
    P = float(np.sqrt(np.sum(resid**2)))
    Nc = data.computational_shots
    if Nc is None:
        floor = 0.0
    else:
        var_w_j = wj * (1 - wj) / Nc
        var_w_k = wk * (1 - wk) / Nc
        cov = -wj * wk / Nc
        var_prod = wk**2 * var_w_j + wj**2 * var_w_k + 2 * wj * wk * cov
        var_rho = (2 * rho.real) ** 2 * est.var_re[idx] / 4 + (2 * rho.imag) ** 2 * est.var_im[idx] / 4
        floor = float(np.sqrt(np.sum(np.clip(var_prod + var_rho, 0, None))))
    return PurityReport(P, resid, floor, edges)


# --- analytic variances -----------------------------------------------------


def phase_variance_special_cases(case, N, weight=None, p_plus=None, p_minus=None, pt_plus=None, w_j=None, w_k=None):
    """Closed-form variances used as test oracles.

    ``"uniform"``: ``1 / (4 N w)``; ``"real"``: ``2 pt+ / (N (p+ - p-)**2)``;
    ``"modulus"``: ``(w_j + w_k - 4 w_j w_k) / N``.
    """
    N = float(N)
    if case == "uniform":
        return 1.0 / (4 * N * weight) if np.isfinite(N) else 0.0
    if case == "real":
        d = p_plus - p_minus
        if d == 0:
            raise DomainError("unreliable phase: p+ equals p-, the variance diverges")
        return 2 * pt_plus / (N * d**2)
    if case == "modulus":
        return (w_j + w_k - 4 * w_j * w_k) / N
    raise DomainError(f"unknown case {case!r}")
