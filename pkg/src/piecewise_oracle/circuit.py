"""Gate-level circuit IR with mid-circuit measurement and classical conditions.

Qubits are ``(register, index)`` pairs over registers declared up front.
Flattened qubit ``i`` (registers in declaration order, indices ascending) is
bit ``i`` of a basis-state index.

``Gate.records`` has two meanings. For ``MeasureZ``, ``MeasureX`` and
``AndUncompute`` it names the record the gate writes. For every other kind a
non-empty ``records`` makes the gate conditional: it is applied iff the XOR
of the named records is 1.

Rotations are kept as data: ``Rz`` carries its angle and a ``tag`` naming
how it is realised (``synthesis``, ``injection``, ``bootstrap``), which the
cost analyses price.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence


class Kind(str, Enum):
    H = "H"
    X = "X"
    Z = "Z"
    S = "S"
    SDG = "Sdg"
    T = "T"
    TDG = "Tdg"
    PREP_T = "PrepT"
    CNOT = "CNOT"
    CZ = "CZ"
    MCX = "MultiControlledX"
    TOFFOLI = "Toffoli"
    RZ = "Rz"
    AND = "AndCompute"
    AND_DG = "AndUncompute"
    MEASURE_Z = "MeasureZ"
    MEASURE_X = "MeasureX"


WRITES_RECORD = {Kind.MEASURE_Z, Kind.MEASURE_X, Kind.AND_DG}
SINGLE_QUBIT = {Kind.H, Kind.X, Kind.Z, Kind.S, Kind.SDG, Kind.T, Kind.TDG, Kind.PREP_T,
                Kind.RZ, Kind.MEASURE_Z, Kind.MEASURE_X}


class ContractError(ValueError):
    """An analysis was asked for something the circuit does not define."""


class Qubit(NamedTuple):
    register: str
    index: int

    def __str__(self):
        return f"{self.register}[{self.index}]"


@dataclass(frozen=True)
class Gate:
    """One operation. Operand order by kind:

    - ``CNOT``: control, then one or more targets
    - ``MultiControlledX``: controls, then the target; ``polarity[i]`` is the
      bit value control ``i`` must hold
    - ``Toffoli``, ``AndCompute``, ``AndUncompute``: a, b, then the target
    - ``CZ``: two qubits
    """

    kind: Kind
    qubits: tuple[Qubit, ...]
    angle: float | None = None
    polarity: tuple[int, ...] | None = None
    tag: str | None = None
    records: tuple[str, ...] = ()

    @property
    def conditional(self) -> bool:
        return bool(self.records) and self.kind not in WRITES_RECORD

    @property
    def controls(self) -> tuple[Qubit, ...]:
        if self.kind == Kind.CNOT:
            return self.qubits[:1]
        if self.kind in (Kind.MCX, Kind.TOFFOLI, Kind.AND, Kind.AND_DG):
            return self.qubits[:-1]
        return ()

    @property
    def targets(self) -> tuple[Qubit, ...]:
        if self.kind == Kind.CNOT:
            return self.qubits[1:]
        if self.kind in (Kind.MCX, Kind.TOFFOLI, Kind.AND, Kind.AND_DG):
            return self.qubits[-1:]
        return self.qubits

    def to_json(self) -> dict:
        params = {}
        if self.angle is not None:
            params["angle"] = self.angle
        if self.polarity is not None:
            params["polarity"] = list(self.polarity)
        if self.tag is not None:
            params["tag"] = self.tag
        return {
            "kind": self.kind.value,
            "operands": [[q.register, q.index] for q in self.qubits],
            "params": params,
            "records": list(self.records),
        }

    @classmethod
    def from_json(cls, d: dict) -> Gate:
        p = d.get("params", {})
        pol = p.get("polarity")
        return cls(
            Kind(d["kind"]),
            tuple(Qubit(r, int(i)) for r, i in d["operands"]),
            angle=None if p.get("angle") is None else float(p["angle"]),
            polarity=None if pol is None else tuple(int(b) for b in pol),
            tag=p.get("tag"),
            records=tuple(d.get("records", ())),
        )


@dataclass
class Circuit:
    """Ordered gate list over declared registers.

    Build with the helper methods, then treat as read-only; analyses never
    mutate a circuit.
    """

    registers: dict[str, int] = field(default_factory=dict)
    gates: list[Gate] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    _n_records: int = field(default=0, repr=False, compare=False)

    # --- construction -----------------------------------------------------

    def add_register(self, name: str, size: int) -> list[Qubit]:
        if name in self.registers:
            raise ValueError(f"register {name!r} already declared")
        if size < 0:
            raise ValueError("register size must be non-negative")
        self.registers[name] = size
        return self.reg(name)

    def reg(self, name: str) -> list[Qubit]:
        return [Qubit(name, i) for i in range(self.registers[name])]

    def append(self, gate: Gate) -> Gate:
        self.gates.append(gate)
        if gate.kind in WRITES_RECORD:
            self._n_records += 1
        return gate

    def extend(self, gates: Iterable[Gate]):
        for g in gates:
            self.append(g)

    def new_record(self) -> str:
        return f"m{self._n_records}"

    def _cond(self, when) -> tuple[str, ...]:
        if when is None:
            return ()
        return (when,) if isinstance(when, str) else tuple(when)

    def h(self, q, when=None):
        return self.append(Gate(Kind.H, (q,), records=self._cond(when)))

    def x(self, q, when=None):
        return self.append(Gate(Kind.X, (q,), records=self._cond(when)))

    def z(self, q, when=None):
        return self.append(Gate(Kind.Z, (q,), records=self._cond(when)))

    def s(self, q):
        return self.append(Gate(Kind.S, (q,)))

    def sdg(self, q):
        return self.append(Gate(Kind.SDG, (q,)))

    def t(self, q):
        return self.append(Gate(Kind.T, (q,)))

    def tdg(self, q):
        return self.append(Gate(Kind.TDG, (q,)))

    def prep_t(self, q):
        """Load a |T> = T|+> magic state into a fresh |0> qubit."""
        return self.append(Gate(Kind.PREP_T, (q,)))

    def cnot(self, control, *targets, tag=None, when=None):
        if not targets:
            raise ValueError("CNOT needs at least one target")
        return self.append(Gate(Kind.CNOT, (control, *targets), tag=tag, records=self._cond(when)))

    def cz(self, a, b, when=None):
        return self.append(Gate(Kind.CZ, (a, b), records=self._cond(when)))

    def mcx(self, controls: Sequence[Qubit], target, polarity: Sequence[int] | None = None, tag=None):
        controls = tuple(controls)
        pol = tuple(polarity) if polarity is not None else (1,) * len(controls)
        return self.append(Gate(Kind.MCX, (*controls, target), polarity=pol, tag=tag))

    def toffoli(self, a, b, target):
        return self.append(Gate(Kind.TOFFOLI, (a, b, target)))

    def rz(self, q, angle: float, tag: str | None = None, when=None):
        return self.append(Gate(Kind.RZ, (q,), angle=float(angle), tag=tag, records=self._cond(when)))

    def and_compute(self, a, b, out):
        return self.append(Gate(Kind.AND, (a, b, out)))

    def and_uncompute(self, a, b, out) -> str:
        rec = self.new_record()
        self.append(Gate(Kind.AND_DG, (a, b, out), records=(rec,)))
        return rec

    def measure_z(self, q) -> str:
        rec = self.new_record()
        self.append(Gate(Kind.MEASURE_Z, (q,), records=(rec,)))
        return rec

    def measure_x(self, q) -> str:
        rec = self.new_record()
        self.append(Gate(Kind.MEASURE_X, (q,), records=(rec,)))
        return rec

    # --- structure ----------------------------------------------------------

    @property
    def width(self) -> int:
        return sum(self.registers.values())

    def qubits(self) -> list[Qubit]:
        return [Qubit(r, i) for r, size in self.registers.items() for i in range(size)]

    def qubit_index(self) -> dict[Qubit, int]:
        return {q: i for i, q in enumerate(self.qubits())}

    def offset(self, register: str) -> int:
        off = 0
        for r, size in self.registers.items():
            if r == register:
                return off
            off += size
        raise KeyError(register)

    def basis_index(self, values: dict[str, int]) -> int:
        """Basis index with register ``r`` holding integer ``values[r]`` (little-endian)."""
        idx = 0
        for r, v in values.items():
            if v >> self.registers[r]:
                raise ValueError(f"value {v} does not fit register {r!r} of size {self.registers[r]}")
            idx |= v << self.offset(r)
        return idx

    def copy(self) -> Circuit:
        return Circuit(dict(self.registers), list(self.gates), dict(self.metadata), self._n_records)

    def __len__(self):
        return len(self.gates)

    # --- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "registers": [{"name": r, "size": s} for r, s in self.registers.items()],
            "gates": [g.to_json() for g in self.gates],
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, d: dict) -> Circuit:
        c = cls({r["name"]: int(r["size"]) for r in d["registers"]}, [], dict(d.get("metadata", {})))
        c.extend(Gate.from_json(g) for g in d["gates"])
        return c

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def loads(cls, text: str) -> Circuit:
        return cls.from_json(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return (list(self.registers.items()) == list(other.registers.items())
                and self.gates == other.gates and self.metadata == other.metadata)


def width(circuit: Circuit) -> int:
    return circuit.width


def validate(circuit: Circuit) -> list[str]:
    """All structural violations found in ``circuit``; an empty list means valid."""
    errors = []
    declared = set(circuit.qubits())
    written: set[str] = set()
    live_ands: dict[tuple, int] = {}
    for pos, g in enumerate(circuit.gates):
        where = f"gate {pos} ({g.kind.value})"
        for q in g.qubits:
            if q not in declared:
                errors.append(f"{where}: undeclared qubit {q}")
        if len(set(g.qubits)) != len(g.qubits):
            errors.append(f"{where}: repeated operand")
        if g.kind in SINGLE_QUBIT and len(g.qubits) != 1:
            errors.append(f"{where}: expects one operand")
        if g.kind == Kind.CNOT and len(g.qubits) < 2:
            errors.append(f"{where}: CNOT needs a control and a target")
        if g.kind in (Kind.CZ,) and len(g.qubits) != 2:
            errors.append(f"{where}: expects two operands")
        if g.kind in (Kind.TOFFOLI, Kind.AND, Kind.AND_DG) and len(g.qubits) != 3:
            errors.append(f"{where}: expects three operands")
        if g.kind == Kind.MCX:
            if not g.qubits:
                errors.append(f"{where}: missing target")
            elif g.polarity is None or len(g.polarity) != len(g.qubits) - 1:
                errors.append(f"{where}: polarity does not match control count")
            elif any(b not in (0, 1) for b in g.polarity):
                errors.append(f"{where}: polarity bits must be 0 or 1")
        if g.kind == Kind.RZ and (g.angle is None or not math.isfinite(g.angle)):
            errors.append(f"{where}: rotation without a finite angle")
        if g.kind in WRITES_RECORD:
            if len(g.records) != 1:
                errors.append(f"{where}: must write exactly one record")
            for r in g.records:
                if r in written:
                    errors.append(f"{where}: record {r!r} written twice")
                written.add(r)
        elif g.records:
            for r in g.records:
                if r not in written:
                    errors.append(f"{where}: condition on record {r!r} before it is measured")
        if g.kind == Kind.AND:
            key = g.qubits
            live_ands[key] = live_ands.get(key, 0) + 1
        if g.kind == Kind.AND_DG:
            key = g.qubits
            if live_ands.get(key, 0) <= 0:
                errors.append(f"{where}: no matching AndCompute on {', '.join(map(str, key))}")
            else:
                live_ands[key] -= 1
    return errors


@dataclass
class CostModel:
    """Per-gate measurement depth and T-count.

    Only measurement/injection layers cost depth; Clifford gates are free but
    still order their operands. ``rotation_depth`` and ``rotation_t`` map an
    ``Rz`` tag to its cost; an ``Rz`` whose tag is missing from the table is
    a :class:`ContractError`.
    """

    rotation_depth: dict[str, float] = field(default_factory=dict)
    rotation_t: dict[str, float] = field(default_factory=dict)
    t_depth: float = 1
    measure_depth: float = 1
    and_compute_depth: float = 1
    and_uncompute_depth: float = 1
    toffoli_depth: float = 1
    prep_t_depth: float = 0

    @classmethod
    def for_rot_t(cls, rot_t: float, injection_depth: float = 1.0) -> CostModel:
        """Synthesised rotations cost ``rot_t``; catalyst bootstrap is a prior-round cost."""
        return cls(
            rotation_depth={"synthesis": rot_t, "injection": injection_depth, "bootstrap": 0.0},
            rotation_t={"synthesis": rot_t, "injection": 0.0, "bootstrap": 0.0},
        )

    def _rotation(self, table, g: Gate) -> float:
        if g.tag is None or g.tag not in table:
            raise ContractError(f"rotation Rz({g.angle}) on {g.qubits[0]} has no priced method (tag={g.tag!r})")
        return table[g.tag]

    def depth(self, g: Gate) -> float:
        k = g.kind
        if k in (Kind.T, Kind.TDG):
            return self.t_depth
        if k == Kind.PREP_T:
            return self.prep_t_depth
        if k in (Kind.MEASURE_Z, Kind.MEASURE_X):
            return self.measure_depth
        if k == Kind.AND:
            return self.and_compute_depth
        if k == Kind.AND_DG:
            return self.and_uncompute_depth
        if k == Kind.TOFFOLI:
            return self.toffoli_depth
        if k == Kind.MCX:
            q = len(g.qubits) - 1
            return math.ceil(math.log2(q)) * self.and_compute_depth if q >= 2 else 0
        if k == Kind.RZ:
            return self._rotation(self.rotation_depth, g)
        return 0

    def t_count(self, g: Gate) -> float:
        k = g.kind
        if k in (Kind.T, Kind.TDG, Kind.PREP_T):
            return 1
        if k in (Kind.AND, Kind.TOFFOLI):
            return 4
        if k == Kind.MCX:
            q = len(g.qubits) - 1
            return 4 * q - 4 if q >= 2 else 0
        if k == Kind.RZ:
            return self._rotation(self.rotation_t, g)
        return 0


DepthModel = CostModel


def measurement_depth(circuit: Circuit, model: CostModel | None = None) -> float:
    """Longest chain of measurement/injection layers under ``model``."""
    model = model or CostModel()
    busy: dict[Qubit, float] = {}
    record_time: dict[str, float] = {}
    total = 0.0
    for g in circuit.gates:
        start = max((busy.get(q, 0.0) for q in g.qubits), default=0.0)
        if g.conditional:
            start = max([start] + [record_time.get(r, 0.0) for r in g.records])
        end = start + model.depth(g)
        for q in g.qubits:
            busy[q] = end
        if g.kind in WRITES_RECORD:
            for r in g.records:
                record_time[r] = end
        total = max(total, end)
    return total


def t_count(circuit: Circuit, model: CostModel | None = None) -> float:
    model = model or CostModel()
    return sum(model.t_count(g) for g in circuit.gates)
