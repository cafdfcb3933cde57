"""Dense pure states, gates, bit-label algebra and the benchmark graph state.

Label convention: bit ``i`` of the integer label ``j`` is the state of qubit
``i``, i.e. ``j = sum_i j_i 2**i``. Two-qubit gate matrices on targets
``(a, b)`` are written in the basis index ``x_a + 2 * x_b``.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConventionError, DomainError, SizeCapError

MAX_QUBITS = 24
NORM_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
SH = S @ H
SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
# control = first target, target = second target
CNOT = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)

# Echoed cross-resonance, (X_a - Y_a X_b)/sqrt2 on targets (a, b).
ECR_CONVENTIONS = {
    "qiskit": (np.kron(I2, X) - np.kron(X, Y)) / np.sqrt(2),
    "swapped": (np.kron(X, I2) - np.kron(Y, X)) / np.sqrt(2),
}


def check_qubits(n):
    if int(n) != n or n < 1:
        raise DomainError(f"qubit count must be a positive integer, got {n!r}")
    if n > MAX_QUBITS:
        raise SizeCapError(f"dense statevectors are capped at {MAX_QUBITS} qubits, got {n}")
    return int(n)


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state of ``n`` qubits stored as ``2**n`` amplitudes."""

    n: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = check_qubits(self.n)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 1 << n:
            raise DomainError(f"expected {1 << n} amplitudes for n={n}, got {amps.shape[0]}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state is not normalized (norm^2 = {norm:.12g})")
        amps.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, n=None, normalize=True):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if n is None:
            n = int(round(np.log2(amps.shape[0])))
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise DomainError("zero vector cannot be normalized")
            amps = amps / norm
        return cls(n, amps)

    @classmethod
    def basis_state(cls, n, label):
        amps = np.zeros(1 << check_qubits(n), dtype=complex)
        amps[label] = 1.0
        return cls(n, amps)

    @property
    def dim(self):
        return 1 << self.n

    @property
    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def to_json(self):
        return {"n": self.n, "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes]}

    @classmethod
    def from_json(cls, data):
        from .errors import SchemaError

        if not isinstance(data, dict) or "n" not in data or "amplitudes" not in data:
            raise SchemaError("expected an object with 'n' and 'amplitudes'", field="state")
        try:
            amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"amplitudes must be [re, im] pairs ({exc})", field="amplitudes")
        return cls.from_amplitudes(amps, n=int(data["n"]), normalize=True)

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class GateSpec:
    """Unitary on one or two qubits; ``targets`` index the qubits it acts on."""

    matrix: np.ndarray = field(repr=False)
    targets: tuple
    name: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        targets = tuple(int(t) for t in np.atleast_1d(self.targets))
        arity = len(targets)
        if arity not in (1, 2):
            raise DomainError(f"gates act on 1 or 2 qubits, got {arity}")
        if m.shape != (1 << arity, 1 << arity):
            raise DomainError(f"matrix shape {m.shape} does not match arity {arity}")
        if len(set(targets)) != arity:
            raise DomainError(f"targets must be distinct, got {targets}")
        if not np.allclose(m.conj().T @ m, np.eye(1 << arity), atol=NORM_TOL, rtol=0):
            raise DomainError(f"gate {self.name or ''} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", targets)

    @property
    def arity(self):
        return len(self.targets)


def _apply_matrix(amps, n, matrix, targets):
    """Apply a (possibly batched) gate; ``amps`` has shape (..., 2**n)."""
    lead = amps.shape[:-1]
    t = amps.reshape(lead + (2,) * n)
    off = len(lead)
    if len(targets) == 1:
        ax = off + n - 1 - targets[0]
        t = np.moveaxis(np.tensordot(matrix, t, axes=([1], [ax])), 0, ax)
    else:
        a, b = targets
        ax_a, ax_b = off + n - 1 - a, off + n - 1 - b
        m4 = matrix.reshape(2, 2, 2, 2)
        t = np.tensordot(m4, t, axes=([2, 3], [ax_b, ax_a]))
        t = np.moveaxis(t, [0, 1], [ax_b, ax_a])
    return t.reshape(lead + (1 << n,))


def apply_gate(state: StateVector, gate: GateSpec) -> StateVector:
    for t in gate.targets:
        if not 0 <= t < state.n:
            raise DomainError(f"target {t} out of range for n={state.n}")
    out = _apply_matrix(np.asarray(state.amplitudes), state.n, gate.matrix, gate.targets)
    return StateVector(state.n, out)


def apply_local(state: StateVector, unitaries) -> StateVector:
    """Apply one single-qubit unitary per qubit (``None`` means identity)."""
    amps = np.asarray(state.amplitudes)
    for q, u in enumerate(unitaries):
        if u is not None:
            amps = _apply_matrix(amps, state.n, np.asarray(u, dtype=complex), (q,))
    return StateVector(state.n, amps)


# --- bit-label algebra -----------------------------------------------------


def _check_label(j, n):
    if not 0 <= j < (1 << n):
        raise DomainError(f"label {j} out of range for n={n}")


class BitLabel(NamedTuple):
    """Computational-basis label together with its qubit count."""

    value: int
    n: int


def _unpack(label, n):
    if isinstance(label, BitLabel):
        if n is not None and label.n != n:
            raise DomainError(f"label has n={label.n}, expected n={n}")
        return label.value, label.n
    return int(label), n


def hamming_distance(j, k, n=None):
    """Number of differing bits between two labels of the same width."""
    jv, nj = _unpack(j, n)
    kv, nk = _unpack(k, n)
    if nj is not None and nk is not None and nj != nk:
        raise DomainError(f"labels belong to different qubit counts ({nj} vs {nk})")
    width = nj if nj is not None else nk
    if width is not None:
        _check_label(jv, width)
        _check_label(kv, width)
    return (jv ^ kv).bit_count()


def successor_profile(j, n):
    """``(j + 1) mod 2**n`` and its Hamming distance from ``j``.

    The distance is the number of trailing ones plus one, capped at ``n``
    when the all-ones label wraps to zero.
    """
    _check_label(j, n)
    k = (j + 1) % (1 << n)
    trailing = ((j ^ (j + 1)) >> 1).bit_count()
    return k, min(trailing + 1, n)


def rotate_index(j, n):
    """Image of ``|j>`` under the chain CNOT_{n-1,n-2} ... CNOT_{1,0}.

    Bit ``l`` of the image is ``j_l xor j_{l+1}`` (top bit unchanged), which
    is the reflected Gray code ``j ^ (j >> 1)``. Accepts integer arrays.
    """
    if n < 2:
        raise DomainError("the CNOT chain needs n >= 2")
    if np.ndim(j) == 0:
        _check_label(int(j), n)
        return int(j) ^ (int(j) >> 1)
    j = np.asarray(j, dtype=np.int64)
    return j ^ (j >> 1)


def unrotate_index(j, n):
    """Inverse of :func:`rotate_index` (prefix XOR from the top bit down)."""
    if n < 2:
        raise DomainError("the CNOT chain needs n >= 2")
    scalar = np.ndim(j) == 0
    out = np.asarray(j, dtype=np.int64).copy()
    shift = 1
    while shift < n:
        out ^= out >> shift
        shift <<= 1
    return int(out) if scalar else out


def cnot_chain_gates(n):
    """Gates of the chain in application order: CNOT_{1,0} first."""
    return [GateSpec(CNOT, (c, c - 1), name=f"CNOT_{c},{c - 1}") for c in range(1, n)]


# --- states ----------------------------------------------------------------


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.n != b.n:
        raise DomainError(f"dimension mismatch: n={a.n} vs n={b.n}")
    ov = np.vdot(a.amplitudes, b.amplitudes)
    return float(min(1.0, abs(ov) ** 2))


def _graph_state_amplitudes(n, ecr):
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = 1.0
    for q in range(n):
        amps = _apply_matrix(amps, n, SX, (q,))
    for j in range(n // 2):
        amps = _apply_matrix(amps, n, ecr, (2 * j, 2 * j + 1))
    if n % 2:
        amps = _apply_matrix(amps, n, SX, (n - 1,))
    amps = _apply_matrix(amps, n, SX, (0,))
    last = n // 2 - 2 if n % 2 == 0 else n // 2 - 1
    for k in range(last + 1):
        amps = _apply_matrix(amps, n, ecr, (2 * k + 1, 2 * k + 2))
    return amps


def graph_state_circuit(n, convention=None):
    """Layer list of the depth-three preparation circuit as :class:`GateSpec`."""
    ecr = ECR_CONVENTIONS[convention or ecr_convention()]
    layers = [[GateSpec(SX, (q,), "SX") for q in range(n)]]
    mid = [GateSpec(ecr, (2 * j, 2 * j + 1), "ECR") for j in range(n // 2)]
    if n % 2:
        mid.append(GateSpec(SX, (n - 1,), "SX"))
    layers.append(mid)
    last = n // 2 - 2 if n % 2 == 0 else n // 2 - 1
    top = [GateSpec(SX, (0,), "SX")]
    top += [GateSpec(ecr, (2 * k + 1, 2 * k + 2), "ECR") for k in range(last + 1)]
    layers.append(top)
    return layers


@functools.lru_cache(maxsize=None)
def ecr_convention(n_max=12):
    """Pick the ECR qubit ordering under which the graph state is uniform.

    Raises :class:`ConventionError` with the per-convention deviations when
    no candidate works.
    """
    report = {}
    for name, ecr in ECR_CONVENTIONS.items():
        dev = max(
            float(np.max(np.abs(np.abs(_graph_state_amplitudes(n, ecr)) ** 2 - 2.0**-n)))
            for n in range(2, n_max + 1)
        )
        report[name] = dev
        if dev < NORM_TOL:
            return name
    raise ConventionError(f"no ECR convention gives uniform amplitudes: {report}")


def prepare_graph_state(n, convention=None) -> StateVector:
    n = check_qubits(n)
    if n < 2:
        raise DomainError("the graph state needs n >= 2")
    ecr = ECR_CONVENTIONS[convention or ecr_convention()]
    return StateVector(n, _graph_state_amplitudes(n, ecr))


def ghz_state(n) -> StateVector:
    amps = np.zeros(1 << check_qubits(n), dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return StateVector(n, amps)


def random_state(n, rng, min_weight=0.0) -> StateVector:
    """Random pure state; with ``min_weight`` every ``|a_j|^2`` is at least that.

    Without a floor the state is Haar distributed. With a floor the weights
    are ``min_weight + (1 - 2**n min_weight) * Dirichlet(1, ..., 1)`` and the
    phases are uniform, which is the Haar law of the weights shifted away
    from zero.
    """
    dim = 1 << check_qubits(n)
    if min_weight <= 0:
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return StateVector.from_amplitudes(v, n=n)
    slack = 1.0 - dim * min_weight
    if slack < 0:
        raise DomainError(f"min_weight {min_weight} infeasible for n={n}")
    w = min_weight + slack * rng.dirichlet(np.ones(dim))
    phases = rng.uniform(0, 2 * np.pi, size=dim)
    return StateVector.from_amplitudes(np.sqrt(w) * np.exp(1j * phases), n=n)


# --- entanglement diagnostics ---------------------------------------------


def schmidt_coefficients(amplitudes, n, subsystem):
    """Squared Schmidt coefficients across ``subsystem | rest`` (descending)."""
    sub = sorted(set(int(q) for q in subsystem))
    rest = [q for q in range(n) if q not in sub]
    t = np.asarray(amplitudes, dtype=complex).reshape((2,) * n)
    axes = [n - 1 - q for q in sub] + [n - 1 - q for q in rest]
    m = np.transpose(t, axes).reshape(1 << len(sub), -1)
    sv = np.linalg.svd(m, compute_uv=False)
    return sv**2


def bipartitions(n):
    """Every unordered bipartition, as the side that contains qubit 0."""
    out = []
    for mask in range(1 << (n - 1)):
        side = [0] + [q + 1 for q in range(n - 1) if (mask >> q) & 1]
        if len(side) < n:
            out.append(side)
    return out


def min_schmidt_rank(state: StateVector, tol=1e-10):
    """Smallest Schmidt rank over all bipartitions and the cut achieving it."""
    best = None
    for side in bipartitions(state.n):
        lam = schmidt_coefficients(state.amplitudes, state.n, side)
        rank = int(np.sum(lam > tol))
        if best is None or rank < best[0]:
            best = (rank, side)
    return best
