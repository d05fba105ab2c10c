"""Exact state-vector simulation with seeded mid-circuit measurement.

Amplitudes are stored as parallel arrays of basis indices and complex
values, holding only non-zero entries. A fully dense state is the special
case where every index is present, so small circuits behave like an
ordinary dense simulator while wide circuits acting on basis inputs (the
oracle over ``(S + 1)(n + 1)`` qubits) stay cheap. Qubit ``i`` is bit ``i``
of the index.
"""

from __future__ import annotations

import cmath
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Gate, Kind, Qubit

HARD_MAX_QUBITS = 62
PRUNE = 1e-14
IMPOSSIBLE = 1e-15
MAX_QUBITS_ENV = "PIECEWISE_ORACLE_MAX_QUBITS"


class SimulationError(RuntimeError):
    pass


def max_qubits() -> int:
    """Width ceiling; ``$PIECEWISE_ORACLE_MAX_QUBITS`` overrides the default of 62."""
    value = int(os.environ.get(MAX_QUBITS_ENV, HARD_MAX_QUBITS))
    return min(value, HARD_MAX_QUBITS)


_SQ = 1 / math.sqrt(2)
_H = np.array([[_SQ, _SQ], [_SQ, -_SQ]], dtype=complex)
_DIAG = {
    Kind.Z: (1, -1),
    Kind.S: (1, 1j),
    Kind.SDG: (1, -1j),
    Kind.T: (1, cmath.exp(1j * math.pi / 4)),
    Kind.TDG: (1, cmath.exp(-1j * math.pi / 4)),
}


def rz_diag(angle: float) -> tuple[complex, complex]:
    return cmath.exp(-0.5j * angle), cmath.exp(0.5j * angle)


class StateVector:
    def __init__(self, num_qubits: int, indices, amplitudes):
        if num_qubits > HARD_MAX_QUBITS:
            raise SimulationError(f"{num_qubits} qubits exceeds the {HARD_MAX_QUBITS}-qubit index range")
        self.num_qubits = num_qubits
        self.indices = np.asarray(indices, dtype=np.int64)
        self.amps = np.asarray(amplitudes, dtype=complex)

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> StateVector:
        if not 0 <= index < 2**num_qubits:
            raise SimulationError(f"basis index {index} out of range for {num_qubits} qubits")
        return cls(num_qubits, [index], [1.0])

    @classmethod
    def from_dense(cls, vector) -> StateVector:
        vector = np.asarray(vector, dtype=complex)
        m = int(round(math.log2(len(vector))))
        if 2**m != len(vector):
            raise SimulationError("dense vector length must be a power of two")
        nz = np.flatnonzero(vector)
        return cls(m, nz, vector[nz])

    @classmethod
    def from_dict(cls, num_qubits: int, amplitudes: dict[int, complex]) -> StateVector:
        keys = sorted(amplitudes)
        return cls(num_qubits, keys, [amplitudes[k] for k in keys])

    def copy(self) -> StateVector:
        return StateVector(self.num_qubits, self.indices.copy(), self.amps.copy())

    def canonical(self) -> StateVector:
        order = np.argsort(self.indices, kind="stable")
        return StateVector(self.num_qubits, self.indices[order], self.amps[order])

    def to_dense(self) -> np.ndarray:
        if self.num_qubits > 26:
            raise SimulationError(f"refusing to densify a {self.num_qubits}-qubit state")
        out = np.zeros(2**self.num_qubits, dtype=complex)
        np.add.at(out, self.indices, self.amps)
        return out

    def to_dict(self) -> dict[int, complex]:
        return {int(i): complex(a) for i, a in zip(self.indices, self.amps)}

    def amplitude(self, index: int) -> complex:
        hit = self.indices == index
        return complex(self.amps[hit].sum())

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def vdot(self, other: StateVector) -> complex:
        """<self|other>."""
        a, b = self.canonical(), other.canonical()
        _, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
        return complex(np.vdot(a.amps[ia], b.amps[ib]))

    def fidelity(self, other: StateVector) -> float:
        return abs(self.vdot(other)) ** 2

    def allclose(self, other: StateVector, atol: float = 1e-9) -> bool:
        diff = self.to_dict()
        for k, v in other.to_dict().items():
            diff[k] = diff.get(k, 0) - v
        return all(abs(v) <= atol for v in diff.values())

    def bits(self, q: int) -> np.ndarray:
        return ((self.indices >> q) & 1).astype(bool)

    def register_values(self, offset: int, size: int) -> np.ndarray:
        return (self.indices >> offset) & ((1 << size) - 1)

    def dump(self, threshold: float = 0.0) -> list[tuple[int, float, float]]:
        s = self.canonical()
        return [(int(i), float(a.real), float(a.imag)) for i, a in zip(s.indices, s.amps) if abs(a) > threshold]

    def dumps(self, threshold: float = 0.0) -> str:
        return json.dumps({"num_qubits": self.num_qubits, "amplitudes": self.dump(threshold)})

    # --- primitive updates ---------------------------------------------------

    def _merge(self, idx, amps):
        uniq, inv = np.unique(idx, return_inverse=True)
        re = np.bincount(inv, weights=amps.real, minlength=len(uniq))
        im = np.bincount(inv, weights=amps.imag, minlength=len(uniq))
        vals = re + 1j * im
        keep = np.abs(vals) > PRUNE
        self.indices, self.amps = uniq[keep], vals[keep]

    def apply_matrix(self, q: int, u: np.ndarray):
        b = self.bits(q)
        base = self.indices & ~np.int64(1 << q)
        col = b.astype(int)
        idx = np.concatenate([base, base | np.int64(1 << q)])
        amps = np.concatenate([u[0, col] * self.amps, u[1, col] * self.amps])
        self._merge(idx, amps)

    def apply_diag(self, q: int, d0: complex, d1: complex):
        self.amps = self.amps * np.where(self.bits(q), d1, d0)

    def flip_where(self, target: int, mask: np.ndarray | None = None):
        flip = np.int64(1 << target)
        if mask is None:
            self.indices = self.indices ^ flip
        else:
            self.indices = np.where(mask, self.indices ^ flip, self.indices)

    def phase_where(self, mask: np.ndarray, phase: complex):
        self.amps = np.where(mask, self.amps * phase, self.amps)

    def prob_one(self, q: int) -> float:
        return float(np.sum(np.abs(self.amps[self.bits(q)]) ** 2))

    def collapse(self, q: int, outcome: int, prob: float):
        keep = self.bits(q) == bool(outcome)
        self.indices = self.indices[keep]
        self.amps = self.amps[keep] / math.sqrt(prob)


def _lookup(index: dict[Qubit, int], q: Qubit) -> int:
    try:
        return index[q]
    except KeyError:
        raise SimulationError(f"gate acts on undeclared qubit {q}") from None


def _apply_unitary(state: StateVector, g: Gate, index: dict[Qubit, int]):
    qs = [_lookup(index, q) for q in g.qubits]
    k = g.kind
    if k == Kind.H:
        state.apply_matrix(qs[0], _H)
    elif k == Kind.X:
        state.flip_where(qs[0])
    elif k in _DIAG:
        state.apply_diag(qs[0], *_DIAG[k])
    elif k == Kind.PREP_T:
        state.apply_matrix(qs[0], _H)
        state.apply_diag(qs[0], *_DIAG[Kind.T])
    elif k == Kind.RZ:
        state.apply_diag(qs[0], *rz_diag(g.angle))
    elif k == Kind.CNOT:
        ctrl = state.bits(qs[0])
        for t in qs[1:]:
            state.flip_where(t, ctrl)
    elif k == Kind.CZ:
        state.phase_where(state.bits(qs[0]) & state.bits(qs[1]), -1)
    elif k in (Kind.TOFFOLI, Kind.AND):
        state.flip_where(qs[2], state.bits(qs[0]) & state.bits(qs[1]))
    elif k == Kind.MCX:
        mask = np.ones(len(state.indices), dtype=bool)
        for c, p in zip(qs[:-1], g.polarity):
            mask &= state.bits(c) == bool(p)
        state.flip_where(qs[-1], mask)
    else:
        raise SimulationError(f"{k.value} is not a unitary gate")


def _measured_qubit(state: StateVector, g: Gate, index) -> int:
    """Apply the pre-measurement part of a measuring gate, return the qubit to read."""
    if g.kind == Kind.MEASURE_Z:
        return _lookup(index, g.qubits[0])
    if g.kind == Kind.MEASURE_X:
        q = _lookup(index, g.qubits[0])
        state.apply_matrix(q, _H)
        return q
    if g.kind == Kind.AND_DG:
        q = _lookup(index, g.qubits[2])
        state.apply_matrix(q, _H)
        return q
    raise SimulationError(f"{g.kind.value} does not measure")


def _after_measurement(state: StateVector, g: Gate, index, outcome: int):
    if g.kind == Kind.AND_DG and outcome:
        a, b, out = (_lookup(index, q) for q in g.qubits)
        state.phase_where(state.bits(a) & state.bits(b), -1)
        state.flip_where(out)


def _condition_holds(g: Gate, records: dict[str, int]) -> bool:
    try:
        return sum(records[r] for r in g.records) % 2 == 1
    except KeyError as e:
        raise SimulationError(f"condition reads record {e.args[0]!r} before it is written") from None


def _initial_state(width: int, initial) -> StateVector:
    if isinstance(initial, StateVector):
        if initial.num_qubits != width:
            raise SimulationError(f"initial state has {initial.num_qubits} qubits, circuit has {width}")
        n = initial.norm()
        if abs(n - 1) > 1e-10:
            raise SimulationError(f"initial state is not normalized (norm {n})")
        return initial.copy()
    return StateVector.basis(width, int(initial))


def _check_width(circuit: Circuit):
    ceiling = max_qubits()
    if circuit.width > ceiling:
        raise SimulationError(
            f"circuit width {circuit.width} exceeds the simulator ceiling of {ceiling} qubits; "
            "use a smaller n or fewer segments")


class Simulator:
    """Holds a state, a record table and a seeded RNG; applies gates one at a time."""

    def __init__(self, circuit: Circuit, initial=0, seed=None):
        _check_width(circuit)
        self.circuit = circuit
        self.index = circuit.qubit_index()
        self.state = _initial_state(circuit.width, initial)
        self.records: dict[str, int] = {}
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def apply(self, g: Gate) -> int | None:
        if g.conditional and not _condition_holds(g, self.records):
            return None
        if g.kind not in (Kind.MEASURE_Z, Kind.MEASURE_X, Kind.AND_DG):
            _apply_unitary(self.state, g, self.index)
            return None
        q = _measured_qubit(self.state, g, self.index)
        p1 = self.state.prob_one(q)
        if p1 < IMPOSSIBLE:
            outcome = 0
        elif 1 - p1 < IMPOSSIBLE:
            outcome = 1
        else:
            outcome = int(self.rng.random() < p1)
        self.state.collapse(q, outcome, p1 if outcome else 1 - p1)
        _after_measurement(self.state, g, self.index, outcome)
        self.records[g.records[0]] = outcome
        return outcome

    def run(self, gates=None) -> Simulator:
        for g in self.circuit.gates if gates is None else gates:
            self.apply(g)
        return self


@dataclass
class SimulationResult:
    state: StateVector
    records: dict[str, int]


def simulate(circuit: Circuit, initial=0, seed=None) -> SimulationResult:
    """Run ``circuit`` from a basis index or :class:`StateVector`."""
    sim = Simulator(circuit, initial, seed).run()
    return SimulationResult(sim.state, sim.records)


@dataclass
class Branch:
    outcomes: dict[str, int]
    probability: float
    state: StateVector = field(repr=False)

    @property
    def bitstring(self) -> str:
        return "".join(str(v) for v in self.outcomes.values())


def simulate_all_branches(circuit: Circuit, initial=0, max_branches: int = 4096) -> list[Branch]:
    """Every measurement-outcome branch with its exact probability."""
    _check_width(circuit)
    index = circuit.qubit_index()
    gates = circuit.gates
    done: list[Branch] = []
    pending = [(0, _initial_state(circuit.width, initial), {}, 1.0)]
    while pending:
        pos, state, records, prob = pending.pop()
        while pos < len(gates):
            g = gates[pos]
            pos += 1
            if g.conditional and not _condition_holds(g, records):
                continue
            if g.kind not in (Kind.MEASURE_Z, Kind.MEASURE_X, Kind.AND_DG):
                _apply_unitary(state, g, index)
                continue
            q = _measured_qubit(state, g, index)
            p1 = state.prob_one(q)
            options = [(o, p) for o, p in ((0, 1 - p1), (1, p1)) if p >= IMPOSSIBLE]
            for outcome, p in options[1:]:
                other = state.copy()
                other.collapse(q, outcome, p)
                _after_measurement(other, g, index, outcome)
                pending.append((pos, other, {**records, g.records[0]: outcome}, prob * p))
            outcome, p = options[0]
            state.collapse(q, outcome, p)
            _after_measurement(state, g, index, outcome)
            records = {**records, g.records[0]: outcome}
            prob *= p
            if len(done) + len(pending) + 1 > max_branches:
                raise SimulationError(f"more than {max_branches} measurement branches")
        done.append(Branch(records, prob, state))
    done.sort(key=lambda b: tuple(b.outcomes.items()))
    return done


def extract_phase(state: StateVector, x: int, reference: StateVector | None = None) -> float:
    """``arg(state[x] / reference[x])`` in (-pi, pi]; reference defaults to |x>."""
    a = state.amplitude(x)
    r = 1.0 if reference is None else reference.amplitude(x)
    if abs(a) < IMPOSSIBLE or abs(r) < IMPOSSIBLE:
        raise SimulationError(f"zero amplitude at basis index {x}")
    phase = cmath.phase(a / r)
    return math.pi if phase <= -math.pi else phase


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(w <= -np.pi, np.pi, w)


def reduced_density_matrix(state: StateVector, q: int) -> np.ndarray:
    """Single-qubit reduced state of qubit ``q``."""
    s = state.canonical()
    bit = s.bits(q)
    rest = s.indices & ~np.int64(1 << q)
    rho = np.zeros((2, 2), dtype=complex)
    rho[0, 0] = np.sum(np.abs(s.amps[~bit]) ** 2)
    rho[1, 1] = np.sum(np.abs(s.amps[bit]) ** 2)
    zero = dict(zip(rest[~bit].tolist(), s.amps[~bit]))
    off = 0j
    for r, a1 in zip(rest[bit].tolist(), s.amps[bit]):
        a0 = zero.get(r)
        if a0 is not None:
            off += a0 * np.conj(a1)
    rho[0, 1] = off
    rho[1, 0] = np.conj(off)
    return rho


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))
