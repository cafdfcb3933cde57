"""End-to-end simulated tomography runs and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .bases import basis_family, original_five_bases
from .errors import DisconnectedGraphError, SchemaError
from .graph import graph_from_bases, hypercube_graph, prune_and_check_connectivity, rotated_cycle_graph
from .measurement import (
    CountsTable,
    NoiseModel,
    outcome_probabilities,
    sample_counts,
    simulate_adaptive_run,
    stream_rng,
)
from .reconstruction import (
    Dataset,
    candidate_trees,
    default_threshold,
    edge_estimates,
    estimation_graph,
    prerotate_for_zeros,
    purity_metric,
    reconstruct_tree,
    select_best_reconstruction,
    unrotate_amplitudes,
)
from .state import StateVector, apply_local, fidelity, ghz_state, prepare_graph_state, random_state

SWEEP_COLUMNS = ["method", "n", "shots_per_basis", "total_shots", "seed", "fidelity", "purity_P", "wall_time"]
METHODS = {"five": "five", "2n+1": "2n+1", "two_n_plus_one": "2n+1", "five-entangled": "five-entangled"}
STATES = ("graph", "random", "ghz", "file")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "2n+1"
    n: int = 3
    shots_per_basis: int | None = None
    total_shots: int | None = None
    exact: bool = False
    readout_flip: float = 0.0
    depolarizing: float = 0.0
    seed: int = 0
    repetitions: int = 1
    state: str = "graph"
    state_file: str | None = None
    min_weight: float = 0.0
    prerotate: bool = False
    candidates: int = 32
    selection: str = "blind"
    adaptive_shots: bool = False
    bootstrap: int = 0
    tau: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise SchemaError(f"unknown method {self.method!r}", "method")
        object.__setattr__(self, "method", METHODS[self.method])
        if self.state not in STATES:
            raise SchemaError(f"unknown state {self.state!r}", "state")
        if self.state == "file" and not self.state_file:
            raise SchemaError("state 'file' needs state_file", "state_file")
        if self.shots_per_basis is not None and self.total_shots is not None:
            raise SchemaError("set only one of shots_per_basis and total_shots", "shots_per_basis")
        if not self.exact and self.shots_per_basis is None and self.total_shots is None:
            object.__setattr__(self, "shots_per_basis", 1000)
        if self.selection not in ("blind", "benchmark"):
            raise SchemaError("selection must be 'blind' or 'benchmark'", "selection")
        if self.repetitions < 1:
            raise SchemaError("repetitions must be >= 1", "repetitions")

    @property
    def noise(self):
        return NoiseModel(self.readout_flip, self.depolarizing)

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict):
            raise SchemaError("config must be a JSON object", "config")
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(doc) - known)
        if extra:
            raise SchemaError(f"unknown config field {extra[0]!r}", extra[0])
        return cls(**doc)

    def to_json(self):
        return asdict(self)


def shot_allocation(n_bases, shots_per_basis=None, total_shots=None):
    """Per-basis shots; budget mode gives the remainder to basis 0."""
    if shots_per_basis is not None:
        return [int(shots_per_basis)] * n_bases
    base, rem = divmod(int(total_shots), n_bases)
    return [base + rem] + [base] * (n_bases - 1)


def target_state(cfg: ExperimentConfig, rep=0) -> StateVector:
    if cfg.state == "graph":
        return prepare_graph_state(cfg.n)
    if cfg.state == "ghz":
        return ghz_state(cfg.n)
    if cfg.state == "random":
        return random_state(cfg.n, stream_rng(cfg.seed, 1, rep), min_weight=cfg.min_weight)
    with open(cfg.state_file) as fh:
        s = StateVector.from_json(json.load(fh))
    if s.n != cfg.n:
        raise SchemaError(f"state file has n={s.n}, config has n={cfg.n}", "n")
    return s


def family_graph(method, n, weights):
    if method == "2n+1" or n == 1:
        return hypercube_graph(n, weights)
    if method == "five":
        return rotated_cycle_graph(n, weights)
    return graph_from_bases(original_five_bases(n), weights)


def measure(cfg: ExperimentConfig, bases, state: StateVector, rep=0) -> Dataset:
    noise = cfg.noise
    if cfg.exact:
        return Dataset.from_exact(bases, state, noise)
    shots = shot_allocation(len(bases), cfg.shots_per_basis, cfg.total_shots)
    tables = []
    for i, (b, N) in enumerate(zip(bases, shots)):
        if cfg.adaptive_shots and b.realization == "adaptive":
            t = simulate_adaptive_run(state, b.schedule, N, cfg.seed, stream=(rep, i), noise=noise)
            t = CountsTable(b.id, t.n, t.counts, t.shots, t.seed, noise)
        else:
            t = sample_counts(outcome_probabilities(state, b, noise), N, cfg.seed, stream=(rep, i), noise=noise)
        tables.append(t)
    return Dataset.from_counts(bases, tables)


def _prerotation(cfg, bases, target, rep):
    comp = bases[0]

    def weights_of(us):
        s = apply_local(target, us)
        if cfg.exact:
            return outcome_probabilities(s, comp, cfg.noise).probabilities
        N = shot_allocation(len(bases), cfg.shots_per_basis, cfg.total_shots)[0]
        return sample_counts(outcome_probabilities(s, comp, cfg.noise), N, cfg.seed, stream=(rep, 0x5052)).frequencies().probabilities

    N0 = None if cfg.exact else shot_allocation(len(bases), cfg.shots_per_basis, cfg.total_shots)[0]
    tau = cfg.tau if cfg.tau is not None else (1e-12 if N0 is None else 1 / (10 * N0))
    return prerotate_for_zeros(weights_of, lambda w: family_graph(cfg.method, cfg.n, w), cfg.n, tau, seed=cfg.seed)


def reconstruct_dataset(cfg, data: Dataset, bench_target=None, K=None):
    """Estimates, pruning, candidate trees and selection for one dataset."""
    est = edge_estimates(data)
    tau = cfg.tau if cfg.tau is not None else default_threshold(data)
    pruned, connected = prune_and_check_connectivity(estimation_graph(data, est, cfg.method), tau)
    if not connected:
        comps = pruned.components()
        raise DisconnectedGraphError(
            f"estimation graph is disconnected after pruning at tau={tau:.3g} "
            f"({len(comps)} components); rerun with pre-rotation enabled",
            comps,
        )
    K = cfg.candidates if K is None else K
    cands = [reconstruct_tree(pruned, est, t, method=cfg.method) for t in candidate_trees(pruned, est, K, cfg.seed)]
    best = select_best_reconstruction(cands, data, cfg.selection, bench_target)
    return best, est, pruned


def _bootstrap_fidelity(cfg, data, unrot, target, rep, B):
    """Parametric bootstrap: redraw every basis from its observed frequencies."""
    fids = []
    for b in range(B):
        tables = []
        for i, basis in enumerate(data.bases):
            N = data.shots[basis.id]
            p = data.probabilities[basis.id]
            rng = stream_rng(cfg.seed, 0xB007, rep, b, i)
            tables.append(CountsTable(basis.id, data.n, rng.multinomial(N, p / p.sum()), N))
        d2 = Dataset.from_counts(data.bases, tables)
        try:
            r, _, _ = reconstruct_dataset(replace(cfg, selection="blind"), d2, K=0)
        except DisconnectedGraphError:
            continue
        amps = r.amplitudes if unrot is None else unrotate_amplitudes(r.amplitudes, cfg.n, unrot)
        fids.append(fidelity(target, StateVector(cfg.n, amps)))
    return float(np.std(fids, ddof=1)) if len(fids) > 1 else None


def run_single(cfg: ExperimentConfig, rep=0):
    t0 = time.perf_counter()
    bases = basis_family(cfg.method, cfg.n)
    target = target_state(cfg, rep)
    unitaries = _prerotation(cfg, bases, target, rep) if cfg.prerotate else None
    measured = target if unitaries is None else apply_local(target, unitaries)
    data = measure(cfg, bases, measured, rep)
    best, est, pruned = reconstruct_dataset(cfg, data, measured)
    amps = best.amplitudes
    if unitaries is not None:
        amps = unrotate_amplitudes(amps, cfg.n, unitaries)
    est_state = StateVector(cfg.n, amps)
    F = fidelity(target, est_state)
    purity = purity_metric(est, data, pruned)
    result = best.with_fields(amplitudes=est_state.amplitudes, fidelity=F, purity=purity)
    report = result.to_json()
    report["fidelity_std"] = (
        _bootstrap_fidelity(cfg, data, unitaries, target, rep, cfg.bootstrap) if cfg.bootstrap and not cfg.exact else None
    )
    shots = None if cfg.exact else [int(data.shots[b.id]) for b in bases]
    report["shots"] = shots
    report["total_shots"] = None if shots is None else int(sum(shots))
    report["bases"] = [b.id for b in bases]
    report["prerotation"] = (
        None if unitaries is None else [[[float(x.real), float(x.imag)] for x in u.ravel()] for u in unitaries]
    )
    report["pruned_vertices"] = [int(v) for v in np.flatnonzero(~pruned.alive)]
    report["unreliable_edges"] = int(np.sum(est.unreliable))
    return report, time.perf_counter() - t0


def run_experiment(cfg: ExperimentConfig, timing=False):
    """Run ``cfg.repetitions`` independent repetitions; returns the report dict."""
    runs = []
    for rep in range(cfg.repetitions):
        rpt, wall = run_single(cfg, rep)
        if timing:
            rpt["wall_time"] = wall
        runs.append(rpt)
    fids = [r["fidelity"] for r in runs]
    return {
        "config": cfg.to_json(),
        "runs": runs,
        "summary": {
            "median_fidelity": float(np.median(fids)),
            "mean_fidelity": float(np.mean(fids)),
            "min_fidelity": float(np.min(fids)),
        },
    }


def dumps_report(report):
    return json.dumps(report, indent=1, sort_keys=True) + "\n"


# --- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepGrid:
    methods: tuple = ("five", "2n+1")
    ns: tuple = (3,)
    shots_per_basis: tuple = ()
    total_shots: tuple = ()
    seeds: tuple = (0,)
    base: ExperimentConfig = field(default_factory=ExperimentConfig)

    def cells(self):
        out = []
        for m in self.methods:
            for n in self.ns:
                for s in self.seeds:
                    for N in self.shots_per_basis:
                        out.append(replace(self.base, method=m, n=n, seed=s, shots_per_basis=N, total_shots=None, repetitions=1))
                    for T in self.total_shots:
                        out.append(replace(self.base, method=m, n=n, seed=s, shots_per_basis=None, total_shots=T, repetitions=1))
        return out


def _run_cell(cfg: ExperimentConfig):
    t0 = time.perf_counter()
    try:
        rpt, _ = run_single(cfg, 0)
        F, P, T = rpt["fidelity"], rpt["purity_P"], rpt["total_shots"]
    except DisconnectedGraphError:
        F, P, T = float("nan"), float("nan"), None
    nb = len(basis_family(cfg.method, cfg.n))
    spb = cfg.shots_per_basis if cfg.shots_per_basis is not None else cfg.total_shots // nb
    total = T if T is not None else sum(shot_allocation(nb, cfg.shots_per_basis, cfg.total_shots))
    return {
        "method": cfg.method,
        "n": cfg.n,
        "shots_per_basis": spb,
        "total_shots": total,
        "seed": cfg.seed,
        "fidelity": F,
        "purity_P": P,
        "wall_time": time.perf_counter() - t0,
    }


def worker_count():
    raw = os.environ.get("POLARTOMO_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise SchemaError(f"POLARTOMO_WORKERS must be an integer, got {raw!r}", "POLARTOMO_WORKERS") from exc


def run_sweep(grid: SweepGrid, workers=None):
    """One row per cell, sorted by (method, n, shots_per_basis, total_shots, seed)."""
    cells = grid.cells()
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    rows.sort(key=lambda r: (r["method"], r["n"], r["shots_per_basis"], r["total_shots"], r["seed"]))
    return rows


def rows_to_csv(rows, timing=True):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        r = dict(r)
        for k in ("fidelity", "purity_P"):
            r[k] = repr(float(r[k]))
        r["wall_time"] = f"{r['wall_time']:.6f}" if timing else ""
        w.writerow(r)
    return buf.getvalue()
