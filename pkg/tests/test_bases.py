import itertools
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polartomo.bases import (
    basis_family,
    disentangled_five_bases,
    is_product_state,
    largest_schmidt_per_qubit,
    locc_schedule,
    original_five_bases,
    projector_set,
    two_n_plus_one_bases,
)
from polartomo.errors import DomainError
from polartomo.state import H, SH, hamming_distance, rotate_index

_KET = {
    "0": np.array([1, 0]),
    "1": np.array([0, 1]),
    "+": np.array([1, 1]) / np.sqrt(2),
    "-": np.array([1, -1]) / np.sqrt(2),
    "i": np.array([1, 1j]) / np.sqrt(2),
    "j": np.array([1, -1j]) / np.sqrt(2),
}


def ket(s):
    """Product ket written most significant qubit first, e.g. ``"0+1"``."""
    return reduce(np.kron, [_KET[c] for c in s]).astype(complex)


def superpos(a, b, phase):
    return (ket(a) + phase * ket(b)) / np.sqrt(2)


def _proj_key(vectors, decimals=9):
    out = set()
    for v in vectors:
        p = np.outer(v, v.conj())
        out.add(tuple(np.round(p.real, decimals).ravel() + 0.0) + tuple(np.round(p.imag, decimals).ravel() + 0.0))
    return out


def _family_projectors(bases):
    out = []
    for b in bases:
        out.append(frozenset(projector_set(b)))
    return out


ALL_FAMILIES = [original_five_bases, disentangled_five_bases, two_n_plus_one_bases]


@pytest.mark.parametrize("family", ALL_FAMILIES)
@pytest.mark.parametrize("n", range(2, 7))
def test_complete_and_orthonormal(family, n):
    for b in family(n):
        m = b.matrix()
        assert len(b) == 1 << n
        np.testing.assert_allclose(m.conj().T @ m, np.eye(1 << n), atol=1e-10)
        np.testing.assert_allclose(m @ m.conj().T, np.eye(1 << n), atol=1e-10)


@pytest.mark.parametrize("family", ALL_FAMILIES)
def test_vectors_sorted_and_phase_fixed(family):
    for b in family(4):
        keys = list(zip(b.low.tolist(), b.ell.tolist()))
        assert keys == sorted(keys)
        e = b.high >= 0
        assert np.all(b.low[e] < b.high[e])
        m = b.matrix()
        assert np.allclose(m[b.low, np.arange(len(b))].imag, 0)


def test_original_n2_bell_lists():
    b = original_five_bases(2)
    assert _proj_key(b[3].matrix().T) == _proj_key(
        [superpos("00", "11", 1), superpos("00", "11", -1), superpos("01", "10", 1), superpos("01", "10", -1)]
    )
    assert _proj_key(b[4].matrix().T) == _proj_key(
        [superpos("00", "11", 1j), superpos("00", "11", -1j), superpos("01", "10", 1j), superpos("01", "10", -1j)]
    )
    assert _proj_key(b[1].matrix().T) == _proj_key([ket(s) for s in ("0+", "0-", "1+", "1-")])


@pytest.mark.parametrize("n", range(1, 7))
def test_original_edges_trace_cycle(n):
    edges = set()
    for b in original_five_bases(n)[1:]:
        edges |= {tuple(sorted(e)) for e in b.edges()}
    d = 1 << n
    assert edges == {tuple(sorted((j, (j + 1) % d))) for j in range(d)}


def test_disentangled_n2_lists():
    b = disentangled_five_bases(2)
    assert _proj_key(b[3].matrix().T) == _proj_key([ket(s) for s in ("+0", "-0", "+1", "-1")])
    assert _proj_key(b[4].matrix().T) == _proj_key([ket(s) for s in ("i0", "j0", "i1", "j1")])
    assert projector_set(b[1]) == projector_set(original_five_bases(2)[1])


def test_disentangled_n3_matches_listed_bases():
    b = disentangled_five_bases(3)
    assert _proj_key(b[3].matrix().T) == _proj_key(
        [superpos(x, y, s) for x, y in (("000", "100"), ("001", "011"), ("010", "110"), ("111", "101")) for s in (1, -1)]
    )
    assert _proj_key(b[4].matrix().T) == _proj_key(
        [superpos(x, y, s) for x, y in (("000", "100"), ("001", "011"), ("010", "110"), ("101", "111")) for s in (1j, -1j)]
    )


def test_disentangled_rejects_n1():
    with pytest.raises(DomainError):
        disentangled_five_bases(1)


@pytest.mark.parametrize("n", range(2, 9))
def test_disentangled_edges_form_hamiltonian_cycle(n):
    d = 1 << n
    edges = set()
    for b in disentangled_five_bases(n)[1:]:
        edges |= {tuple(sorted(e)) for e in b.edges()}
    expected = {tuple(sorted((rotate_index(j, n), rotate_index((j + 1) % d, n)))) for j in range(d)}
    assert edges == expected and len(edges) == d
    assert all(hamming_distance(a, b) == 1 for a, b in edges)
    deg = np.zeros(d, int)
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    assert np.all(deg == 2)


@pytest.mark.parametrize("n", range(2, 5))
def test_disentangled_first_bases_match_original(n):
    for i in range(3):
        assert projector_set(disentangled_five_bases(n)[i]) == projector_set(original_five_bases(n)[i])


def test_two_n_plus_one_n1_is_mub():
    bases = two_n_plus_one_bases(1)
    assert len(bases) == 3
    mats = [b.matrix() for b in bases]
    for a, b in itertools.combinations(mats, 2):
        np.testing.assert_allclose(np.abs(a.conj().T @ b) ** 2, 0.5, atol=1e-12)


def test_two_n_plus_one_n2_equals_disentangled():
    a = sorted(map(sorted, _family_projectors(two_n_plus_one_bases(2))))
    b = sorted(map(sorted, _family_projectors(disentangled_five_bases(2))))
    assert a == b


def test_two_n_plus_one_n3_matches_listed_bases():
    listed = [
        [ket(s) for s in ("000", "001", "010", "011", "100", "101", "110", "111")],
        [ket(a + b + c) for a in "01" for b in "01" for c in "+-"],
        [ket(a + b + c) for a in "01" for b in "01" for c in "ij"],
        [ket(a + c + b) for a in "01" for b in "01" for c in "+-"],
        [ket(a + c + b) for a in "01" for b in "01" for c in "ij"],
        [ket(c + a + b) for a in "01" for b in "01" for c in "+-"],
        [ket(c + a + b) for a in "01" for b in "01" for c in "ij"],
    ]
    ours = sorted(sorted(s) for s in _family_projectors(two_n_plus_one_bases(3)))
    theirs = sorted(sorted(_proj_key(vs)) for vs in listed)
    assert ours == theirs


@pytest.mark.parametrize("n", range(1, 8))
def test_two_n_plus_one_partitions_hypercube(n):
    bases = two_n_plus_one_bases(n)
    assert len(bases) == 2 * n + 1
    for k in range(n):
        for b in (bases[1 + k], bases[1 + n + k]):
            edges = set(map(tuple, b.edges()))
            assert edges == {(j, j | (1 << k)) for j in range(1 << n) if not (j >> k) & 1}
            assert len(edges) == 1 << (n - 1)


@pytest.mark.parametrize("n", range(2, 9))
def test_all_vectors_are_products(n):
    for fam in (disentangled_five_bases(n), two_n_plus_one_bases(n)):
        for b in fam:
            assert largest_schmidt_per_qubit(b.matrix().T, n).min() >= 1 - 1e-10


def test_original_high_bases_entangled():
    for b in original_five_bases(3)[3:]:
        assert not all(is_product_state(v, 3) for v in b.matrix().T)


def test_is_product_examples():
    assert not is_product_state(superpos("00", "11", 1))
    assert is_product_state(ket("+1"))
    with pytest.raises(DomainError):
        is_product_state(np.zeros(4))


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
@settings(max_examples=80, deadline=None)
def test_two_term_product_iff_adjacent(seed, n):
    rng = np.random.default_rng(seed)
    j, k = rng.choice(1 << n, 2, replace=False)
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    v = np.zeros(1 << n, complex)
    v[j], v[k] = a, b
    v /= np.linalg.norm(v)
    assert is_product_state(v, n) == (hamming_distance(int(j), int(k)) <= 1)


def _schedule_oracle_vectors(sched):
    """Brute force: walk the rule qubit by qubit for every outcome string."""
    n = sched.n
    vecs = []
    for x in range(1 << n):
        b_H = b_M = False
        factors = []
        for q in range(n):
            bit = (x >> q) & 1
            e = np.eye(2)[:, bit].astype(complex)
            if sched.fires(q, b_H, b_M):
                e = sched.gate @ e
                b_H = True
            b_M = bool(bit)
            factors.append(e)
        vecs.append(reduce(np.kron, factors[::-1]))
    return vecs


@pytest.mark.parametrize("n", range(2, 6))
@pytest.mark.parametrize("b_c,b_s", list(itertools.product((0, 1), repeat=2)))
def test_locc_schedule_matches_rule(n, b_c, b_s):
    sched = locc_schedule(n, b_c, b_s)
    oracle = _schedule_oracle_vectors(sched)
    basis = sched.induced_basis()
    assert _proj_key(oracle) == projector_set(basis)
    m = np.array(oracle).T
    np.testing.assert_allclose(m.conj().T @ m, np.eye(1 << n), atol=1e-12)
    # gate fires exactly once per run
    assert np.all((sched.gated_qubits() >= 0) & (sched.gated_qubits() < n))


def test_locc_examples():
    s = locc_schedule(3, 1, 0)
    assert np.all(s.gated_qubits() == 0)
    assert projector_set(s.induced_basis()) == projector_set(two_n_plus_one_bases(3)[1])
    assert locc_schedule(3, 0, 0).gated_qubit(0) == 2
    assert projector_set(locc_schedule(2, 0, 0).induced_basis()) == projector_set(disentangled_five_bases(2)[3])
    with pytest.raises(DomainError):
        locc_schedule(1, 0, 0)


@pytest.mark.parametrize("n", range(2, 5))
def test_locc_family_equivalent_to_rotated_bases(n):
    five = disentangled_five_bases(n)
    sets = {(c, s): projector_set(locc_schedule(n, c, s).induced_basis()) for c in (0, 1) for s in (0, 1)}
    assert sets[(1, 0)] == projector_set(five[1])
    assert sets[(1, 1)] == projector_set(five[2])
    assert sets[(0, 0)] == projector_set(five[3])
    assert sets[(0, 1)] == projector_set(five[4])
    locc_edges = set()
    for c, s in sets:
        locc_edges |= set(map(tuple, locc_schedule(n, c, s).induced_basis().edges()))
    five_edges = set()
    for b in five[1:]:
        five_edges |= set(map(tuple, b.edges()))
    assert locc_edges == five_edges


@pytest.mark.parametrize("family", [disentangled_five_bases, two_n_plus_one_bases, original_five_bases])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_measurement_circuit_realizes_vectors(family, n):
    """Product-circuit bases: applying the inverse gates and reading Z gives the annotated outcome."""
    for b in family(n):
        if b.realization != "product-circuit" or b.gates is None:
            continue
        u = reduce(np.kron, [(g if g is not None else np.eye(2)) for g in b.gates[::-1]])
        for i in range(len(b)):
            v = b.vector(i).amplitudes()
            out = u.conj().T @ v
            assert abs(abs(out[b.outcome[i]]) - 1) < 1e-12


def test_gates_are_h_or_sh():
    for b in two_n_plus_one_bases(3)[1:]:
        gs = [g for g in b.gates if g is not None]
        assert len(gs) == 1 and (np.allclose(gs[0], H) or np.allclose(gs[0], SH))


def test_basis_family_names():
    assert len(basis_family("five", 3)) == 5
    assert len(basis_family("2n+1", 3)) == 7
    assert basis_family("five-entangled", 3)[3].realization == "rotated-circuit"
    with pytest.raises(DomainError):
        basis_family("nine", 3)


def test_to_json_shape():
    doc = two_n_plus_one_bases(2)[1].to_json()
    assert doc["id"] == "H0" and doc["realization"] == "product-circuit"
    assert len(doc["vectors"]) == 4
    assert {"edge", "ell", "amplitudes"} <= set(doc["vectors"][0])
