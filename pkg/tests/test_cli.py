import json

import numpy as np
import pytest
from click.testing import CliRunner

from polartomo.bases import two_n_plus_one_bases
from polartomo.cli import main
from polartomo.measurement import format_label, outcome_probabilities, sample_counts
from polartomo.state import prepare_graph_state


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def _pauli_file(tmp_path, n=3, shots=4000):
    state = prepare_graph_state(n)
    entries = []
    for i, b in enumerate(two_n_plus_one_bases(n)):
        t = sample_counts(outcome_probabilities(state, b), shots, 0, (i,))
        if b.id == "Z":
            setting = "Z" * n
        else:
            k = int(b.id.lstrip("SH"))
            c = "Y" if b.id.startswith("SH") else "X"
            setting = "".join(c if q == k else "Z" for q in range(n))
        counts = {format_label(x, n, "msb"): int(v) for x, v in enumerate(t.counts) if v}
        entries.append({"setting": setting, "shots": shots, "counts": counts})
    f = tmp_path / "pauli.json"
    f.write_text(json.dumps({"n": n, "bases": entries}))
    return f


def _device_file(tmp_path):
    doc = {
        "directed": False,
        "nodes": [{"id": i, "weight": w} for i, w in enumerate([0.01, 0.02, 0.001, 0.1])],
        "edges": [{"a": 0, "b": 1, "weight": 0.01}, {"a": 1, "b": 2, "weight": 0.02}, {"a": 2, "b": 3, "weight": 0.05}],
    }
    f = tmp_path / "dev.json"
    f.write_text(json.dumps(doc))
    return f


def test_bases_seven_for_n3():
    r = invoke("bases", "--n", 3, "--family", "2n+1")
    assert r.exit_code == 0, r.output
    doc = json.loads(r.output)
    assert len(doc) == 7


@pytest.mark.parametrize("family,count", [("five", 5), ("five-entangled", 5), ("locc", 1)])
def test_bases_families(family, count):
    doc = json.loads(invoke("bases", "--n", 3, "--family", family).output)
    assert len(doc) == count


def test_graph_uniform_q3():
    r = invoke("graph", "--n", 3, "--weights", "uniform")
    assert r.exit_code == 0
    doc = json.loads(r.output)
    assert len(doc["edges"]) == 12 and doc["connected"]


def test_graph_ghz_disconnected():
    doc = json.loads(invoke("graph", "--n", 3, "--weights", "ghz").output)
    assert not doc["connected"]
    assert doc["components"] == [[0], [7]]


def test_run_exact_and_exit_codes(tmp_path):
    r = invoke("run", "--n", 3, "--exact")
    assert r.exit_code == 0
    assert json.loads(r.output)["summary"]["min_fidelity"] > 1 - 1e-9
    r = invoke("run", "--n", 3, "--exact", "--state", "ghz")
    assert r.exit_code == 3
    r = invoke("run", "--n", 3, "--exact", "--state", "ghz", "--prerotate")
    assert r.exit_code == 0
    r = invoke("run", "--n", 3, "--shots-per-basis", 10, "--total-shots", 100)
    assert r.exit_code == 2
    bad = tmp_path / "cfg.json"
    bad.write_text('{"n": 3, "shots": 5}')
    r = invoke("run", "--config", bad)
    assert r.exit_code == 2 and "shots" in r.output


def test_run_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 2, "exact": True, "method": "five"}))
    doc = json.loads(invoke("run", "--config", cfg).output)
    assert doc["config"]["method"] == "five" and doc["config"]["n"] == 2


def test_counts_out(tmp_path):
    f = tmp_path / "counts.json"
    r = invoke("run", "--n", 2, "--shots-per-basis", 100, "--counts-out", f)
    assert r.exit_code == 0
    doc = json.loads(f.read_text())
    assert doc["n"] == 2 and len(doc["bases"]) == 5


def test_hwopt(tmp_path):
    dev = _device_file(tmp_path)
    doc = json.loads(invoke("hwopt", "--device", dev, "--length", 3, "--oracle").output)
    assert doc["chain"] in ([0, 1, 2], [2, 1, 0])
    assert doc["oracle"]["gap"] >= 0
    r = invoke("hwopt", "--device", dev, "--length", 5)
    assert r.exit_code == 3
    doc = json.loads(invoke("hwopt", "--device", dev, "--length", 2, "--compare", "--shots", 500, "--seeds", "0,1").output)
    assert 0 <= doc["hellinger"]["median_optimized"] <= 1


def test_hwopt_size_cap(tmp_path):
    doc = {"nodes": [{"id": i, "weight": 0.0} for i in range(17)], "edges": [{"a": i, "b": i + 1, "weight": 0} for i in range(16)]}
    f = tmp_path / "big.json"
    f.write_text(json.dumps(doc))
    assert invoke("hwopt", "--device", f, "--length", 3, "--oracle").exit_code == 4
    f.write_text(json.dumps({"nodes": [{"id": 0}], "edges": []}))
    r = invoke("hwopt", "--device", f, "--length", 1)
    assert r.exit_code == 2 and "nodes" in r.output


def test_ingest_annotations(tmp_path):
    f = _pauli_file(tmp_path)
    r = invoke("ingest", "--pauli", f, "--reconstruct")
    assert r.exit_code == 0, r.output
    doc = json.loads(r.output)
    ids = [b["id"] for b in doc["bases"]]
    assert sorted(ids) == sorted(b.id for b in two_n_plus_one_bases(3))
    h0 = doc["bases"][ids.index("H0")]["annotations"]
    assert all(abs(a["edge"][0] - a["edge"][1]) == 1 for a in h0.values())
    assert all(a["edge"] is None for a in doc["bases"][ids.index("Z")]["annotations"].values())
    amps = np.array([complex(*z) if isinstance(z, list) else z for z in doc["reconstruction"]["amplitudes"]])
    assert abs(np.vdot(prepare_graph_state(3).amplitudes, amps)) ** 2 > 0.98


def test_ingest_rejects_two_off_axis(tmp_path):
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"n": 2, "bases": [{"setting": "XX", "shots": 1, "counts": {"00": 1}}]}))
    r = invoke("ingest", "--pauli", f)
    assert r.exit_code == 2 and "setting" in r.output


def test_dump_state():
    doc = json.loads(invoke("dump-state", "--n", 3).output)
    assert doc["n"] == 3


def test_oracle_passes():
    r = invoke("oracle", "--max-n", 4)
    assert r.exit_code == 0, r.output
    assert "FAIL" not in r.output


@pytest.mark.parametrize(
    "args",
    [
        ("run", "--n", 3, "--shots-per-basis", 300, "--state", "random", "--repetitions", 2, "--bootstrap", 3),
        ("sweep", "--n", "2..3", "--total-shots", 5000, "--seeds", "0,1", "--no-timing"),
        ("bases", "--n", 3, "--family", "locc", "--b-c", 1, "--b-s", 1),
        ("graph", "--n", 4, "--weights", "random", "--seed", 7),
    ],
)
def test_byte_identical_reruns(args):
    a, b = invoke(*args), invoke(*args)
    assert a.exit_code == 0, a.output
    assert a.output == b.output
