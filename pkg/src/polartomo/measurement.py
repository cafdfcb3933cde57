"""Outcome probabilities, seeded shot sampling and counts I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bases import LoccSchedule, MeasurementBasis
from .errors import DomainError, SchemaError
from .state import StateVector, _apply_matrix, check_qubits

SHOT_BLOCK = 1 << 20


@dataclass(frozen=True)
class NoiseModel:
    """Per-bit readout flips plus depolarizing after each basis-change gate."""

    readout_flip: float = 0.0
    depolarizing: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.readout_flip <= 0.5:
            raise DomainError(f"readout_flip must lie in [0, 0.5], got {self.readout_flip}")
        if not 0.0 <= self.depolarizing <= 1.0:
            raise DomainError(f"depolarizing must lie in [0, 1], got {self.depolarizing}")

    @property
    def is_noiseless(self):
        return self.readout_flip == 0.0 and self.depolarizing == 0.0

    def to_json(self):
        return {"readout_flip": self.readout_flip, "depolarizing": self.depolarizing}


NOISELESS = NoiseModel()


@dataclass(frozen=True)
class Distribution:
    """Probabilities indexed by measured bitstring for one basis."""

    basis_id: str
    n: int
    probabilities: np.ndarray = field(repr=False)

    def __getitem__(self, label):
        return float(self.probabilities[label])


@dataclass(frozen=True)
class CountsTable:
    basis_id: str
    n: int
    counts: np.ndarray = field(repr=False)
    shots: int
    seed: int | None = None
    noise: NoiseModel | None = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (1 << self.n,):
            raise SchemaError(f"counts for {self.basis_id} must have 2**n entries", "counts")
        if np.any(c < 0):
            raise SchemaError(f"negative count in {self.basis_id}", "counts")
        if int(c.sum()) != self.shots:
            raise SchemaError(f"counts of {self.basis_id} sum to {int(c.sum())}, not {self.shots}", "shots")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def frequencies(self) -> Distribution:
        if self.shots == 0:
            return Distribution(self.basis_id, self.n, np.zeros(1 << self.n))
        return Distribution(self.basis_id, self.n, self.counts / self.shots)

    def as_dict(self, bit_order="msb"):
        nz = np.flatnonzero(self.counts)
        return {format_label(int(x), self.n, bit_order): int(self.counts[x]) for x in nz}


# --- probabilities ----------------------------------------------------------


def _flip_bits(p, n, eps):
    """Independent bit flips with probability ``eps`` on every bit."""
    t = np.asarray(p, dtype=float).reshape((2,) * n)
    for ax in range(n):
        t = (1 - eps) * t + eps * np.flip(t, axis=ax)
    return t.reshape(-1)


def _gated_qubits(basis: MeasurementBasis):
    """Per-outcome list of qubits that carry a basis-change gate."""
    n = basis.n
    if basis.schedule is not None:
        return None, basis.schedule.gated_qubits()
    if basis.gates is None:
        return [], None
    return [q for q in range(n) if basis.gates[q] is not None], None


def apply_noise(p, basis: MeasurementBasis, noise: NoiseModel | None):
    if noise is None or noise.is_noiseless:
        return p
    n = basis.n
    out = np.asarray(p, dtype=float)
    if noise.depolarizing > 0:
        f = noise.depolarizing / 2
        fixed, per_outcome = _gated_qubits(basis)
        if per_outcome is not None:
            labels = np.arange(1 << n, dtype=np.int64)
            moved = np.zeros_like(out)
            np.add.at(moved, labels ^ (np.int64(1) << per_outcome), out)
            out = (1 - f) * out + f * moved
        else:
            t = out.reshape((2,) * n)
            for q in fixed:
                ax = n - 1 - q
                t = (1 - f) * t + f * np.flip(t, axis=ax)
            out = t.reshape(-1)
    if noise.readout_flip > 0:
        out = _flip_bits(out, n, noise.readout_flip)
    return out


def outcome_probabilities(state: StateVector, basis: MeasurementBasis, noise: NoiseModel | None = None):
    if state.n != basis.n:
        raise DomainError(f"state has n={state.n}, basis has n={basis.n}")
    p = basis.probabilities_by_outcome(state.amplitudes)
    return Distribution(basis.id, basis.n, apply_noise(p, basis, noise))


def mixture_probabilities(states, weights, basis: MeasurementBasis, noise=None):
    """Outcome distribution of the mixed state ``sum_i w_i |psi_i><psi_i|``."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise DomainError("mixture weights must be a probability vector")
    p = sum(wi * basis.probabilities_by_outcome(s.amplitudes) for wi, s in zip(w, states))
    return Distribution(basis.id, basis.n, apply_noise(p, basis, noise))


# --- sampling ---------------------------------------------------------------


def stream_rng(seed, *key):
    """Generator for the sub-stream ``key`` of the root ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def sample_counts(dist: Distribution, N, seed, stream=(), noise=None) -> CountsTable:
    """Multinomial draw of ``N`` shots, split into fixed-size seeded blocks."""
    N = int(N)
    if N < 0:
        raise DomainError("shot count must be nonnegative")
    p = np.clip(np.asarray(dist.probabilities, dtype=float), 0.0, None)
    total = p.sum()
    if total <= 0:
        raise DomainError("distribution has no mass")
    p = p / total
    counts = np.zeros(len(p), dtype=np.int64)
    for block, start in enumerate(range(0, N, SHOT_BLOCK)):
        m = min(SHOT_BLOCK, N - start)
        counts += stream_rng(seed, *stream, block).multinomial(m, p)
    return CountsTable(dist.basis_id, dist.n, counts, N, int(seed), noise)


def _prefix_tables(probs, n):
    """``tables[q][x]``: probability that bits ``0..q`` equal ``x``."""
    tables = []
    for q in range(n):
        tables.append(probs.reshape(1 << (n - q - 1), 1 << (q + 1)).sum(axis=0))
    return tables


def simulate_adaptive_run(
    state: StateVector, schedule: LoccSchedule, N, seed, stream=(), noise=None
) -> CountsTable:
    """Shot-by-shot simulation of the sequential adaptive measurement.

    Qubits are sampled in order, conditioned on the true earlier outcomes.
    The controller sees the reported (possibly readout-flipped) bits, so
    readout errors also steer where the basis-change gate fires.
    """
    n = schedule.n
    if state.n != n:
        raise DomainError(f"state has n={state.n}, schedule has n={n}")
    noise = noise or NOISELESS
    psi = state.amplitudes
    udag = schedule.gate.conj().T
    # distribution 0: no gate yet; distribution 1 + g: gate fired on qubit g
    dists = [np.abs(psi) ** 2]
    for g in range(n):
        dists.append(np.abs(_apply_matrix(psi, n, udag, (g,))) ** 2)
    tables = [_prefix_tables(d, n) for d in dists]

    N = int(N)
    reported = np.zeros(N, dtype=np.int64)
    for block, start in enumerate(range(0, N, SHOT_BLOCK)):
        rng = stream_rng(seed, *stream, block)
        sl = slice(start, min(N, start + SHOT_BLOCK))
        m = sl.stop - sl.start
        t = np.zeros(m, dtype=np.int64)
        r = np.zeros(m, dtype=np.int64)
        g = np.full(m, -1, dtype=np.int64)
        for q in range(n):
            b_H = g >= 0
            b_M = ((r >> (q - 1)) & 1).astype(bool) if q > 0 else np.zeros(m, dtype=bool)
            j = q + 1
            fire = ~b_H & ((j == 1 and schedule.b_C) | ((j <= n - 1) & b_M) | (j == n))
            g[fire] = q
            u = rng.random(m)
            bit = np.zeros(m, dtype=np.int64)
            for d in np.unique(g):
                sel = g == d
                tab = tables[int(d) + 1][q]
                p0 = tab[t[sel]]
                p1 = tab[t[sel] | (1 << q)]
                tot = p0 + p1
                pr1 = np.divide(p1, tot, out=np.zeros_like(p1), where=tot > 0)
                bit[sel] = (u[sel] < pr1).astype(np.int64)
            t |= bit << q
            flip = np.zeros(m, dtype=bool)
            if noise.depolarizing > 0:
                flip ^= fire & (rng.random(m) < noise.depolarizing / 2)
            if noise.readout_flip > 0:
                flip ^= rng.random(m) < noise.readout_flip
            r |= (bit ^ flip.astype(np.int64)) << q
        reported[sl] = r
    counts = np.bincount(reported, minlength=1 << n).astype(np.int64)
    bid = f"locc{int(schedule.b_C)}{int(schedule.b_S)}"
    return CountsTable(bid, n, counts, N, int(seed), noise)


def hellinger(p, q):
    """``sqrt(1 - sum sqrt(p_i q_i))`` over the union of outcomes."""
    if isinstance(p, Distribution):
        p = p.probabilities
    if isinstance(q, Distribution):
        q = q.probabilities
    if isinstance(p, dict) or isinstance(q, dict):
        p = dict(p) if isinstance(p, dict) else dict(enumerate(p))
        q = dict(q) if isinstance(q, dict) else dict(enumerate(q))
        keys = sorted(set(p) | set(q), key=str)
        p = np.array([p.get(k, 0.0) for k in keys], dtype=float)
        q = np.array([q.get(k, 0.0) for k in keys], dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    size = max(len(p), len(q))
    p = np.pad(p, (0, size - len(p)))
    q = np.pad(q, (0, size - len(q)))
    bc = float(np.sum(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None))))
    return float(np.sqrt(max(0.0, 1.0 - bc)))


# --- labels and files -------------------------------------------------------


def format_label(x, n, bit_order="msb"):
    s = format(x, f"0{n}b")
    return s if bit_order == "msb" else s[::-1]


def parse_label(s, n, bit_order="msb", field_name="counts"):
    if len(s) != n or set(s) - {"0", "1"}:
        raise SchemaError(f"bad bitstring {s!r} for n={n}", field_name)
    if bit_order == "lsb":
        s = s[::-1]
    elif bit_order != "msb":
        raise SchemaError(f"bit_order must be 'msb' or 'lsb', got {bit_order!r}", "bit_order")
    return int(s, 2)


def _require(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing field {key!r} in {where}", key)
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaError(f"field {key!r} in {where} has wrong type", key)
    return val


def _dense_counts(raw, n, bit_order, where):
    if not isinstance(raw, dict):
        raise SchemaError(f"counts in {where} must be an object", "counts")
    counts = np.zeros(1 << n, dtype=np.int64)
    for k, v in raw.items():
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise SchemaError(f"count for {k!r} in {where} must be a nonnegative integer", "counts")
        counts[parse_label(k, n, bit_order)] += v
    return counts


def counts_to_json(tables, n, seed=None, bit_order="msb"):
    return {
        "n": n,
        "bit_order": bit_order,
        "seed": seed,
        "bases": [{"id": t.basis_id, "shots": t.shots, "counts": t.as_dict(bit_order)} for t in tables],
    }


def counts_from_json(doc):
    n = check_qubits(_require(doc, "n", "counts file", int))
    bit_order = doc.get("bit_order", "msb")
    seed = doc.get("seed")
    out = []
    for i, b in enumerate(_require(doc, "bases", "counts file", list)):
        where = f"bases[{i}]"
        bid = _require(b, "id", where, str)
        shots = _require(b, "shots", where, int)
        counts = _dense_counts(_require(b, "counts", where), n, bit_order, where)
        out.append(CountsTable(bid, n, counts, shots, seed))
    return out


def write_counts_file(path, tables, n, seed=None, bit_order="msb"):
    with open(path, "w") as fh:
        json.dump(counts_to_json(tables, n, seed, bit_order), fh, indent=1, sort_keys=True)


def read_counts_file(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc.msg})", "file") from exc
    return counts_from_json(doc)


# --- Pauli-subset ingestion -------------------------------------------------


def pauli_setting_basis(setting):
    """Basis id for a setting string; character ``i`` is the basis of qubit ``i``."""
    s = setting.upper()
    if set(s) - set("XYZ"):
        raise SchemaError(f"setting {setting!r} contains letters other than X, Y, Z", "setting")
    off = [(q, c) for q, c in enumerate(s) if c != "Z"]
    if len(off) > 1:
        raise SchemaError(
            f"setting {setting!r} measures {len(off)} qubits outside Z "
            f"({', '.join(f'{c} on qubit {q}' for q, c in off)}); only one is allowed",
            "setting",
        )
    if not off:
        return "Z", None
    q, c = off[0]
    return (f"H{q}" if c == "X" else f"SH{q}"), q


def ingest_pauli_counts(doc):
    """Map Pauli-setting counts onto the single-direction product bases.

    ``doc`` follows the counts-file layout with a ``setting`` string per
    entry instead of an ``id``. An X on qubit ``k`` is the ``H`` basis of
    direction ``k``, a Y is the ``SH`` basis. ``y_sign`` (default +1) states
    whether outcome bit 0 of a Y setting is the +i eigenvector; -1 flips it.
    Repeated settings are merged.
    """
    n = check_qubits(_require(doc, "n", "Pauli counts file", int))
    bit_order = doc.get("bit_order", "msb")
    merged: dict[str, np.ndarray] = {}
    for i, b in enumerate(_require(doc, "bases", "Pauli counts file", list)):
        where = f"bases[{i}]"
        setting = _require(b, "setting", where, str)
        if len(setting) != n:
            raise SchemaError(f"setting {setting!r} in {where} has length {len(setting)}, expected {n}", "setting")
        bid, q = pauli_setting_basis(setting)
        counts = _dense_counts(_require(b, "counts", where), n, bit_order, where)
        shots = _require(b, "shots", where, int)
        if int(counts.sum()) != shots:
            raise SchemaError(f"counts in {where} sum to {int(counts.sum())}, not {shots}", "shots")
        y_sign = b.get("y_sign", 1)
        if y_sign not in (1, -1):
            raise SchemaError(f"y_sign in {where} must be +1 or -1", "y_sign")
        if q is not None and setting[q].upper() == "Y" and y_sign == -1:
            counts = counts[np.arange(1 << n) ^ (1 << q)]
        merged[bid] = merged.get(bid, 0) + counts
    order = sorted(merged, key=_basis_sort_key)
    return [CountsTable(bid, n, merged[bid], int(merged[bid].sum()), doc.get("seed")) for bid in order]


def _basis_sort_key(bid):
    if bid == "Z":
        return (0, 0)
    if bid.startswith("SH"):
        return (2, int(bid[2:]))
    return (1, int(bid[1:]))
