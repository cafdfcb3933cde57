"""Measurement bases built from two-term superpositions ``|j> + i^l |j'>``.

Every basis vector carries the pair of labels it couples (an edge of the
estimation graph), its phase index ``l`` and the measured bitstring that
reports it. Vectors are stored in the canonical form where the smaller label
has phase 0, and bases keep them sorted by ``(smaller label, l)``.

A product-circuit basis is described by one basis-change unitary ``U_q`` per
qubit: its vectors are ``(U_0 x ... x U_{n-1}) |x>``. A device realizes it by
applying ``U_q^dagger`` before a computational-basis readout, so the
``SH`` setting (vectors ``|0> +- i|1>``) is run as ``S^dagger`` then ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .state import H, SH, check_qubits, rotate_index

_PHASES = np.array([1, 1j, -1, -1j])
PRODUCT_TOL = 1e-10


@dataclass(frozen=True)
class BasisVector:
    """One basis element; ``edge`` is None for computational vectors."""

    n: int
    kind: str
    label: int
    edge: tuple | None
    ell: int
    outcome: int

    def amplitudes(self):
        v = np.zeros(1 << self.n, dtype=complex)
        if self.edge is None:
            v[self.label] = 1.0
        else:
            j, k = self.edge
            v[j] = 1 / np.sqrt(2)
            v[k] = _PHASES[self.ell] / np.sqrt(2)
        return v


@dataclass(frozen=True)
class LoccSchedule:
    """Adaptive single-qubit measurement rule for the disentangled bases.

    Qubits are measured in order 0, 1, ..., n-1. Before measuring qubit
    ``q`` the basis-change gate (``H``, or ``SH`` when ``b_S``) fires when
    ``q`` is the first qubit and ``b_C`` is set, or when no gate has fired
    yet and the previous outcome was 1, or when ``q`` is the last qubit and
    no gate has fired yet. The gate fires at most once per run.
    """

    n: int
    b_C: bool
    b_S: bool

    @property
    def gate(self):
        return SH if self.b_S else H

    def fires(self, q, b_H, b_M):
        j = q + 1
        return bool(
            (j == 1 and self.b_C)
            or (j <= self.n - 1 and not b_H and b_M)
            or (j == self.n and not b_H)
        )

    def gated_qubit(self, outcome):
        """Qubit that received the gate in the run that produced ``outcome``."""
        b_H = False
        b_M = False
        for q in range(self.n):
            if self.fires(q, b_H, b_M):
                return q
            b_M = bool((outcome >> q) & 1)
        raise AssertionError("schedule never fired")  # last-qubit clause always fires

    def gated_qubits(self):
        """Vectorized :meth:`gated_qubit` over all ``2**n`` outcomes."""
        n = self.n
        labels = np.arange(1 << n, dtype=np.int64)
        if self.b_C:
            return np.zeros(1 << n, dtype=np.int64)
        q = np.full(1 << n, n - 1, dtype=np.int64)
        for p in range(n - 2, -1, -1):
            # first 1 among qubits 0..n-2 at position p sends the gate to p + 1
            first_one = ((labels >> p) & 1).astype(bool) & ((labels & ((1 << p) - 1)) == 0)
            q[first_one] = p + 1
        return q

    def induced_basis(self):
        return _adaptive_basis(self)


def locc_schedule(n, b_C, b_S) -> LoccSchedule:
    n = check_qubits(n)
    if n < 2:
        raise DomainError("the adaptive schedule needs n >= 2")
    return LoccSchedule(n, bool(b_C), bool(b_S))


@dataclass(frozen=True)
class MeasurementBasis:
    """Orthonormal basis of ``2**n`` vectors with edge annotations.

    ``low``/``high`` hold the coupled labels (``high`` is -1 for
    computational vectors), ``ell`` the phase index and ``outcome`` the
    bitstring reporting each vector.
    """

    id: str
    n: int
    realization: str
    low: np.ndarray = field(repr=False)
    high: np.ndarray = field(repr=False)
    ell: np.ndarray = field(repr=False)
    outcome: np.ndarray = field(repr=False)
    gates: tuple | None = field(default=None, repr=False)
    schedule: LoccSchedule | None = None

    def __post_init__(self):
        for name in ("low", "high", "ell", "outcome"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.low)

    @property
    def is_computational(self):
        return bool(np.all(self.high < 0))

    @property
    def vectors(self):
        return [self.vector(i) for i in range(len(self))]

    def vector(self, i) -> BasisVector:
        if self.high[i] < 0:
            return BasisVector(self.n, "computational", int(self.low[i]), None, 0, int(self.outcome[i]))
        return BasisVector(
            self.n,
            "edge",
            int(self.low[i]),
            (int(self.low[i]), int(self.high[i])),
            int(self.ell[i]),
            int(self.outcome[i]),
        )

    def edges(self):
        """Set of coupled label pairs ``(low, high)``."""
        mask = self.high >= 0
        return set(zip(self.low[mask].tolist(), self.high[mask].tolist()))

    def matrix(self):
        """Dense ``2**n x 2**n`` matrix whose columns are the basis vectors."""
        dim = 1 << self.n
        m = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(len(self))
        comp = self.high < 0
        m[self.low[comp], cols[comp]] = 1.0
        e = ~comp
        m[self.low[e], cols[e]] = 1 / np.sqrt(2)
        m[self.high[e], cols[e]] = _PHASES[self.ell[e]] / np.sqrt(2)
        return m

    def overlaps(self, amplitudes):
        """``<v|psi>`` for every basis vector, vectorized. Accepts batches."""
        psi = np.asarray(amplitudes)
        out = psi[..., self.low].astype(complex)
        e = self.high >= 0
        if np.any(e):
            hi = np.where(e, self.high, 0)
            coupled = np.conj(_PHASES[self.ell]) * psi[..., hi]
            out = np.where(e, (out + coupled) / np.sqrt(2), out)
        return out

    def probabilities_by_outcome(self, amplitudes):
        """Born probabilities indexed by measured bitstring."""
        p = np.abs(self.overlaps(amplitudes)) ** 2
        out = np.zeros(p.shape[:-1] + (1 << self.n,))
        out[..., self.outcome] = p
        return out

    def to_json(self):
        vecs = []
        for i in range(len(self)):
            if self.high[i] < 0:
                amps = [[int(self.low[i]), 1.0, 0.0]]
                edge = None
            else:
                ph = _PHASES[self.ell[i]] / np.sqrt(2)
                amps = [
                    [int(self.low[i]), float(1 / np.sqrt(2)), 0.0],
                    [int(self.high[i]), float(ph.real), float(ph.imag)],
                ]
                edge = [int(self.low[i]), int(self.high[i])]
            vecs.append({"edge": edge, "ell": int(self.ell[i]), "outcome": int(self.outcome[i]), "amplitudes": amps})
        return {"id": self.id, "n": self.n, "realization": self.realization, "vectors": vecs}


# --- construction helpers ---------------------------------------------------


def _canonical(low, high, ell):
    """Swap pairs so the smaller label comes first, absorbing the phase."""
    low = np.asarray(low, dtype=np.int64)
    high = np.asarray(high, dtype=np.int64)
    ell = np.asarray(ell, dtype=np.int64) % 4
    swap = low > high
    lo = np.where(swap, high, low)
    hi = np.where(swap, low, high)
    ell = np.where(swap, (-ell) % 4, ell)
    return lo, hi, ell


def _edge_outcomes(lo, hi, ell):
    # ell 0/1 -> outcome bit 0 on the gated qubit (the smaller label), 2/3 -> bit 1
    return np.where(ell < 2, lo, hi)


def _sorted_basis(id, n, realization, lo, hi, ell, outcome, gates=None, schedule=None):
    order = np.lexsort((ell, lo))
    return MeasurementBasis(id, n, realization, lo[order], hi[order], ell[order], outcome[order], gates, schedule)


def computational_basis(n, id="Z") -> MeasurementBasis:
    labels = np.arange(1 << n, dtype=np.int64)
    return MeasurementBasis(
        id, n, "product-circuit", labels, np.full(1 << n, -1), np.zeros(1 << n), labels, gates=(None,) * n
    )


def product_basis(n, qubit, gate, id=None) -> MeasurementBasis:
    """Basis with ``H`` or ``SH`` on one qubit and the identity elsewhere."""
    if gate is H or np.allclose(gate, H):
        phases = (0, 2)
        tag = "H"
    elif gate is SH or np.allclose(gate, SH):
        phases = (1, 3)
        tag = "SH"
    else:
        raise DomainError("product bases use H or SH on the gated qubit")
    if not 0 <= qubit < n:
        raise DomainError(f"qubit {qubit} out of range for n={n}")
    labels = np.arange(1 << n, dtype=np.int64)
    base = labels[((labels >> qubit) & 1) == 0]
    lo = np.concatenate([base, base])
    hi = lo | (1 << qubit)
    ell = np.concatenate([np.full(len(base), phases[0]), np.full(len(base), phases[1])])
    gates = tuple(gate if q == qubit else None for q in range(n))
    return _sorted_basis(id or f"{tag}{qubit}", n, "product-circuit", lo, hi, ell, _edge_outcomes(lo, hi, ell), gates)


def _cycle_pairs(n, start):
    """Pairs (2m + start, 2m + start + 1 mod 2**n) for m = 0 .. 2**(n-1) - 1."""
    dim = 1 << n
    a = np.arange(start, dim, 2, dtype=np.int64)
    return a, (a + 1) % dim


def _pair_basis(n, a, b, phases):
    lo = np.concatenate([a, a])
    hi = np.concatenate([b, b])
    ell = np.concatenate([np.full(len(a), phases[0]), np.full(len(a), phases[1])])
    return _canonical(lo, hi, ell)


def original_five_bases(n):
    """Computational basis plus the four bases pairing consecutive labels.

    B1/B2 pair ``2m`` with ``2m+1`` (real / imaginary phases), B3/B4 pair
    ``2m+1`` with ``2m+2 mod 2**n``; together they trace the ``2**n`` cycle.
    B3 and B4 contain entangled vectors for n >= 2 and are realized by
    applying the CNOT chain before the adaptive product measurement.
    """
    n = check_qubits(n)
    out = [computational_basis(n, "B0")]
    for idx, start, phases in ((1, 0, (0, 2)), (2, 0, (1, 3)), (3, 1, (0, 2)), (4, 1, (1, 3))):
        a, b = _cycle_pairs(n, start)
        lo, hi, ell = _pair_basis(n, a, b, phases)
        if n >= 2 and idx >= 3:
            rlo, rhi, rell = _canonical(rotate_index(lo, n), rotate_index(hi, n), ell)
            outcome = _edge_outcomes(rlo, rhi, rell)
            realization = "rotated-circuit"
            gates = None
            sched = LoccSchedule(n, False, phases[0] == 1)
        else:
            outcome = _edge_outcomes(lo, hi, ell)
            realization = "product-circuit"
            gates = tuple((H if idx in (1, 3) else SH) if q == 0 else None for q in range(n))
            sched = None
        out.append(_sorted_basis(f"B{idx}", n, realization, lo, hi, ell, outcome, gates, sched))
    return out


def disentangled_five_bases(n):
    """The five bases rotated by the CNOT chain; all vectors are product states.

    Edges are ``{S(j), S(j+1)}``: the first two rotated bases are plain
    product circuits (gate on qubit 0), the last two need the adaptive
    schedule with ``b_C = 0``.
    """
    n = check_qubits(n)
    if n < 2:
        raise DomainError("disentangled bases need n >= 2")
    out = [computational_basis(n, "Bt0")]
    for idx, start, phases in ((1, 0, (0, 2)), (2, 0, (1, 3)), (3, 1, (0, 2)), (4, 1, (1, 3))):
        a, b = _cycle_pairs(n, start)
        lo, hi, ell = _canonical(rotate_index(a, n), rotate_index(b, n), np.zeros(len(a)))
        lo2, hi2, ell2 = _pair_basis(n, lo, hi, phases)
        outcome = _edge_outcomes(lo2, hi2, ell2)
        b_S = phases[0] == 1
        if idx <= 2:
            gates = tuple((SH if b_S else H) if q == 0 else None for q in range(n))
            out.append(_sorted_basis(f"Bt{idx}", n, "product-circuit", lo2, hi2, ell2, outcome, gates))
        else:
            sched = LoccSchedule(n, False, b_S)
            out.append(_sorted_basis(f"Bt{idx}", n, "adaptive", lo2, hi2, ell2, outcome, schedule=sched))
    return out


def two_n_plus_one_bases(n):
    """Computational basis, ``H`` on each qubit, then ``SH`` on each qubit."""
    n = check_qubits(n)
    out = [computational_basis(n, "Z")]
    out += [product_basis(n, k, H) for k in range(n)]
    out += [product_basis(n, k, SH) for k in range(n)]
    return out


def _adaptive_basis(schedule: LoccSchedule) -> MeasurementBasis:
    n = schedule.n
    labels = np.arange(1 << n, dtype=np.int64)
    q = schedule.gated_qubits()
    bit = (labels >> q) & 1
    lo = labels & ~(np.int64(1) << q)
    hi = lo | (np.int64(1) << q)
    ell = bit * 2 + (1 if schedule.b_S else 0)
    bid = f"locc{int(schedule.b_C)}{int(schedule.b_S)}"
    return _sorted_basis(bid, n, "adaptive", lo, hi, ell, labels, schedule=schedule)


def basis_family(method, n):
    if method in ("five", "5"):
        return disentangled_five_bases(n)
    if method in ("2n+1", "two_n_plus_one"):
        return two_n_plus_one_bases(n)
    if method in ("five-entangled", "original"):
        return original_five_bases(n)
    raise DomainError(f"unknown basis family {method!r}")


# --- separability -----------------------------------------------------------


def largest_schmidt_per_qubit(vectors, n):
    """Largest squared Schmidt coefficient for every single-qubit cut.

    ``vectors`` has shape ``(m, 2**n)`` (or ``(2**n,)``); the result has
    shape ``(m, n)``.
    """
    v = np.atleast_2d(np.asarray(vectors, dtype=complex))
    m = v.shape[0]
    out = np.empty((m, n))
    for q in range(n):
        t = v.reshape(m, 1 << (n - 1 - q), 2, 1 << q)
        rho = np.einsum("mhal,mhbl->mab", t, t.conj())
        tr = (rho[:, 0, 0] + rho[:, 1, 1]).real
        det = (rho[:, 0, 0] * rho[:, 1, 1] - rho[:, 0, 1] * rho[:, 1, 0]).real
        disc = np.sqrt(np.maximum(tr**2 - 4 * det, 0.0))
        out[:, q] = (tr + disc) / 2 / tr
    return out


def is_product_state(v, n=None, return_coefficients=False):
    """True when every qubit is unentangled from the rest.

    Accepts a :class:`BasisVector` or a raw amplitude vector. The test is
    ``largest Schmidt coefficient >= 1 - 1e-10`` on every single-qubit cut,
    which for a pure state is equivalent to full separability.
    """
    if isinstance(v, BasisVector):
        n = v.n
        amps = v.amplitudes()
    else:
        amps = np.asarray(v, dtype=complex).reshape(-1)
        if n is None:
            n = int(round(np.log2(amps.shape[0])))
    if np.linalg.norm(amps) == 0:
        raise DomainError("zero vector has no Schmidt decomposition")
    amps = amps / np.linalg.norm(amps)
    coeffs = largest_schmidt_per_qubit(amps, n)[0]
    ok = bool(np.all(coeffs >= 1 - PRODUCT_TOL))
    return (ok, coeffs) if return_coefficients else ok


def projector_set(basis: MeasurementBasis, decimals=9):
    """Hashable set of rank-1 projectors, insensitive to order and phases."""
    m = basis.matrix()
    out = set()
    for i in range(m.shape[1]):
        p = np.outer(m[:, i], m[:, i].conj())
        key = tuple(np.round(p.real, decimals).ravel() + 0.0) + tuple(np.round(p.imag, decimals).ravel() + 0.0)
        out.add(key)
    return out
