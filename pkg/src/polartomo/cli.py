"""Command-line front end: ``polartomo <subcommand>``.

Exit codes: 0 success, 1 oracle failure or other tool error, 2 malformed
input, 3 disconnected estimation graph or missing chain, 4 size cap.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import __version__
from .bases import basis_family, disentangled_five_bases, largest_schmidt_per_qubit, locc_schedule, two_n_plus_one_bases
from .errors import SchemaError, TomographyError
from .experiment import (
    ExperimentConfig,
    SweepGrid,
    dumps_report,
    measure,
    reconstruct_dataset,
    rows_to_csv,
    run_experiment,
    run_sweep,
    target_state,
)
from .graph import (
    hypercube_graph,
    matrix_tree_count,
    prune_and_check_connectivity,
    reconstruction_tree,
    rotated_cycle_graph,
    spanning_tree_count,
)
from .hwopt import (
    best_fixed_length_path,
    compare_selection_hellinger,
    exhaustive_paths_oracle,
    random_device_graph,
    random_path,
    read_device_file,
)
from .measurement import CountsTable, counts_to_json, ingest_pauli_counts, write_counts_file
from .reconstruction import Dataset, purity_metric
from .state import StateVector, ghz_state, prepare_graph_state, random_state, rotate_index


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _dumps(doc):
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _int_list(text, name):
    """``"3..7"`` or ``"3,5,7"``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                a, b = part.split("..")
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise SchemaError(f"cannot parse integer list {text!r}", name) from exc
    return tuple(out)


def _load_json(path, name):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc.msg})", name) from exc


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except TomographyError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)


@click.group(cls=_Group)
@click.version_option(__version__)
def main():
    """Pure-state tomography from polarization identities (simulation toolkit)."""


_experiment_options = [
    click.option("--method", type=click.Choice(["five", "2n+1", "five-entangled"]), default="2n+1"),
    click.option("--n", "n", type=int, default=3, show_default=True),
    click.option("--shots-per-basis", type=int, default=None),
    click.option("--total-shots", type=int, default=None, help="Budget split equally, remainder to the computational basis."),
    click.option("--exact", is_flag=True, help="Use exact probabilities instead of sampled counts."),
    click.option("--readout-flip", type=float, default=0.0),
    click.option("--depolarizing", type=float, default=0.0),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--state", type=click.Choice(["graph", "random", "ghz", "file"]), default="graph"),
    click.option("--state-file", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--min-weight", type=float, default=0.0, help="Smallest |a_j|^2 of random states."),
    click.option("--prerotate", is_flag=True, help="Apply local rotations when amplitudes vanish."),
    click.option("--candidates", type=int, default=32, show_default=True),
    click.option("--selection", type=click.Choice(["blind", "benchmark"]), default="blind"),
    click.option("--adaptive-shots", is_flag=True, help="Simulate adaptive bases shot by shot."),
    click.option("--tau", type=float, default=None, help="Pruning threshold (default 1/(10 N_comp))."),
]


def experiment_options(f):
    for opt in reversed(_experiment_options):
        f = opt(f)
    return f


def _config_from(kwargs, config_path, **extra):
    if config_path:
        doc = _load_json(config_path, "config")
        return ExperimentConfig.from_json(doc)
    return ExperimentConfig(**kwargs, **extra)


@main.command()
@experiment_options
@click.option("--repetitions", type=int, default=1, show_default=True)
@click.option("--bootstrap", type=int, default=0, help="Bootstrap resamples for the fidelity error bar.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--timing", is_flag=True, help="Include wall time (breaks byte-identical reruns).")
@click.option("--counts-out", type=click.Path(dir_okay=False), default=None, help="Also write sampled counts.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def run(config_path, timing, counts_out, out, **kwargs):
    """Simulate one experiment and print the reconstruction report."""
    cfg = _config_from(kwargs, config_path)
    report = run_experiment(cfg, timing=timing)
    if counts_out:
        bases = basis_family(cfg.method, cfg.n)
        data = measure(cfg, bases, target_state(cfg, 0), 0)
        if data.counts[bases[0].id] is None:
            raise SchemaError("exact mode has no counts to write", "counts_out")
        tables = [CountsTable(b.id, cfg.n, data.counts[b.id], data.shots[b.id], cfg.seed) for b in bases]
        write_counts_file(counts_out, tables, cfg.n, cfg.seed)
    _emit(dumps_report(report), out)


@main.command()
@click.option("--methods", default="five,2n+1", show_default=True)
@click.option("--n", "ns", default="3", show_default=True, help="List or range, e.g. 3..7")
@click.option("--shots-per-basis", "spb", default="", help="List of per-basis shot counts.")
@click.option("--total-shots", "budgets", default="", help="List of total budgets.")
@click.option("--seeds", default="0..4", show_default=True)
@click.option("--state", type=click.Choice(["graph", "random", "ghz"]), default="graph")
@click.option("--min-weight", type=float, default=0.0)
@click.option("--readout-flip", type=float, default=0.0)
@click.option("--depolarizing", type=float, default=0.0)
@click.option("--candidates", type=int, default=32)
@click.option("--selection", type=click.Choice(["blind", "benchmark"]), default="blind")
@click.option("--no-timing", is_flag=True, help="Leave wall_time empty so reruns are byte-identical.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def sweep(methods, ns, spb, budgets, seeds, state, min_weight, readout_flip, depolarizing, candidates, selection, no_timing, out):
    """Grid of experiments as CSV; POLARTOMO_WORKERS sets the pool size."""
    base = ExperimentConfig(
        state=state,
        min_weight=min_weight,
        readout_flip=readout_flip,
        depolarizing=depolarizing,
        candidates=candidates,
        selection=selection,
    )
    grid = SweepGrid(
        methods=tuple(m for m in methods.split(",") if m),
        ns=_int_list(ns, "n"),
        shots_per_basis=_int_list(spb, "shots_per_basis"),
        total_shots=_int_list(budgets, "total_shots"),
        seeds=_int_list(seeds, "seeds"),
        base=base,
    )
    _emit(rows_to_csv(run_sweep(grid), timing=not no_timing), out)


@main.command()
@click.option("--n", "n", type=int, required=True)
@click.option("--family", type=click.Choice(["five", "2n+1", "five-entangled", "locc"]), default="five")
@click.option("--b-c", "b_c", type=int, default=0, help="LOCC control bit (family locc).")
@click.option("--b-s", "b_s", type=int, default=0, help="LOCC phase bit (family locc).")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def bases(n, family, b_c, b_s, out):
    """Dump a basis family as JSON."""
    if family == "locc":
        doc = [locc_schedule(n, b_c, b_s).induced_basis().to_json()]
    else:
        doc = [b.to_json() for b in basis_family(family, n)]
    _emit(_dumps(doc), out)


def _weights(spec, n, seed):
    if spec == "uniform":
        return np.full(1 << n, 1.0 / (1 << n))
    if spec == "ghz":
        return ghz_state(n).probabilities
    if spec == "graph":
        return prepare_graph_state(n).probabilities
    if spec == "random":
        return random_state(n, np.random.default_rng(seed)).probabilities
    doc = _load_json(spec, "weights")
    if isinstance(doc, dict):
        return StateVector.from_json(doc).probabilities
    w = np.asarray(doc, dtype=float)
    if w.shape != (1 << n,):
        raise SchemaError(f"weights file must hold {1 << n} numbers", "weights")
    return w


@main.command()
@click.option("--n", "n", type=int, required=True)
@click.option("--kind", type=click.Choice(["hypercube", "cycle"]), default="hypercube")
@click.option("--weights", "wspec", default="uniform", help="uniform, ghz, graph, random, or a JSON file.")
@click.option("--tau", type=float, default=0.0)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def graph(n, kind, wspec, tau, seed, out):
    """Dump an estimation graph (with its reconstruction tree when connected)."""
    w = _weights(wspec, n, seed)
    g = hypercube_graph(n, w) if kind == "hypercube" else rotated_cycle_graph(n, w)
    pruned, connected = prune_and_check_connectivity(g, tau)
    tree = reconstruction_tree(pruned) if connected else None
    doc = pruned.to_json(tree)
    doc["connected"] = connected
    doc["components"] = pruned.components()
    _emit(_dumps(doc), out)


@main.command()
@click.option("--device", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--length", type=int, required=True)
@click.option("--oracle", is_flag=True, help="Also run the exhaustive oracle.")
@click.option("--compare", is_flag=True, help="Hellinger comparison against a random control chain.")
@click.option("--shots", type=int, default=2000)
@click.option("--seeds", default="0..9")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def hwopt(device, length, oracle, compare, shots, seeds, out):
    """Pick a low-error chain of qubits from a calibration file."""
    g = read_device_file(device)
    best = best_fixed_length_path(g, length)
    doc = {"chain": list(best.nodes), "cost": best.cost}
    if oracle:
        o = exhaustive_paths_oracle(g, length)
        doc["oracle"] = {"chain": list(o.nodes), "cost": o.cost, "gap": best.cost - o.cost}
    if compare:
        seed_list = _int_list(seeds, "seeds")
        control = random_path(g, length, np.random.default_rng(seed_list[0] if seed_list else 0))
        cmp = compare_selection_hellinger(g, best, control, shots, seed_list)
        doc["control"] = {"chain": list(control.nodes), "cost": control.cost}
        doc["hellinger"] = cmp.to_json()
    _emit(_dumps(doc), out)


@main.command()
@click.option("--pauli", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--reconstruct", is_flag=True, help="Also reconstruct from the ingested counts.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def ingest(pauli, reconstruct, out):
    """Map Pauli-setting counts onto the single-direction product bases."""
    doc = _load_json(pauli, "pauli")
    tables = ingest_pauli_counts(doc)
    n = tables[0].n if tables else doc["n"]
    fam = {b.id: b for b in basis_family("2n+1", n)}
    res = counts_to_json(tables, n, doc.get("seed"))
    for entry, t in zip(res["bases"], tables):
        b = fam[t.basis_id]
        ann = {}
        for i in range(len(b)):
            x = int(b.outcome[i])
            if t.counts[x]:
                v = b.vector(i)
                label = format(x, f"0{n}b")
                ann[label] = {"edge": None if v.edge is None else list(v.edge), "ell": v.ell}
        entry["annotations"] = ann
    if reconstruct:
        data = Dataset.from_counts(list(fam.values()), tables)
        cfg = ExperimentConfig(method="2n+1", n=n)
        best, est, pruned = reconstruct_dataset(cfg, data)
        r = best.with_fields(purity=purity_metric(est, data, pruned)).to_json()
        res["reconstruction"] = r
    _emit(_dumps(res), out)


@main.command("dump-state")
@click.option("--state", type=click.Choice(["graph", "ghz", "random"]), default="graph")
@click.option("--n", "n", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--min-weight", type=float, default=0.0)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def dump_state(state, n, seed, min_weight, out):
    """Write a state vector as JSON."""
    if state == "graph":
        s = prepare_graph_state(n)
    elif state == "ghz":
        s = ghz_state(n)
    else:
        s = random_state(n, np.random.default_rng(seed), min_weight=min_weight)
    _emit(_dumps(s.to_json()), out)


def _oracle_checks(max_n):
    for n in range(1, 5):
        a, b = spanning_tree_count(n), matrix_tree_count(hypercube_graph(n))
        yield f"spanning trees n={n}: closed form {a} vs determinant {b}", a == b
    for n in range(2, 17):
        j = np.arange(1 << n, dtype=np.int64)
        d = np.bitwise_count(rotate_index(j, n) ^ rotate_index((j + 1) % (1 << n), n))
        yield f"rotated successor distance n={n}", bool(np.all(d == 1))
    for n in range(2, max_n + 1):
        for fam_name, fam in (("five", disentangled_five_bases(n)), ("2n+1", two_n_plus_one_bases(n))):
            worst = min(float(largest_schmidt_per_qubit(b.matrix().T, n).min()) for b in fam)
            yield f"product vectors {fam_name} n={n}: min largest Schmidt {worst:.12f}", worst >= 1 - 1e-10
    rng = np.random.default_rng(0)
    agree = total = 0
    ok = True
    for t in range(50):
        g = random_device_graph(int(rng.integers(4, 11)), rng, directed=bool(t % 2))
        D = int(rng.integers(2, 5))
        try:
            o = exhaustive_paths_oracle(g, D)
        except TomographyError:
            continue
        try:
            h = best_fixed_length_path(g, D).cost
        except TomographyError:
            h = np.inf
        total += 1
        agree += abs(h - o.cost) <= 1e-12
        ok &= h >= o.cost - 1e-12
    yield f"chain heuristic never beats exhaustive optimum ({agree}/{total} equal)", ok


@main.command()
@click.option("--max-n", type=int, default=6, show_default=True)
def oracle(max_n):
    """Run the brute-force oracles and print one pass/fail line each."""
    failed = 0
    for label, ok in _oracle_checks(max_n):
        click.echo(f"{'PASS' if ok else 'FAIL'}  {label}")
        failed += not ok
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
