"""Parallel piecewise phase and amplitude oracles.

Layout: register ``r0`` holds the input ``x`` on qubits ``0..n-1`` and an
extra qubit at index ``n``; registers ``r1..rS`` are copies, one per
segment. For each copy ``j`` a flag sets the extra qubit iff ``x`` lies in
segment ``j``; CNOTs from that flag complement the copy, so that
``Xi_z(-alpha_j/2)`` together with ``Rz(gamma_j)`` on the flag contributes
``+-(alpha_j x + beta_j)/2`` with the sign set by the flag. The top register's
``Xi_z(sum alpha/2)`` and ``Rz(-sum gamma)`` cancel every unflagged half,
leaving ``exp(i f~(x))`` with no global phase.

In the amplitude variant the top extra qubit starts in ``|+>`` and is fanned
out with ``x``. Each sign then follows that qubit, and a closing H turns
``(e^{if}|0> + e^{-if}|1>)/sqrt 2`` into ``cos f|0> + i sin f|1>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import catalyst
from .circuit import Circuit, Gate, Kind, Qubit
from .segmenter import PiecewiseSpec
from .simulator import StateVector, simulate, simulate_all_branches

PHASE_VARIANT = "phase"
AMPLITUDE_VARIANT = "amplitude"
VARIANTS = (PHASE_VARIANT, AMPLITUDE_VARIANT)

SYNTHESIS = "synthesis"
SYNTHESIS_INJECTION = "synthesis_injection"
IN_CIRCUIT_TOWERS = "in_circuit_towers"
INDEPENDENT_TOWERS = "independent_towers"
METHODS = (SYNTHESIS, SYNTHESIS_INJECTION, IN_CIRCUIT_TOWERS, INDEPENDENT_TOWERS)

FANOUT_CNOT = "multi-target-cnot"
FANOUT_GHZ = "ghz-measurement"
FANOUT_LOWERINGS = (FANOUT_CNOT, FANOUT_GHZ)

FANOUT = "fanout"
FANIN = "fanin"
FLAG = "flag"


class MalformedSpecError(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    variant: str = PHASE_VARIANT
    rotation_method: str = SYNTHESIS
    fanout_lowering: str = FANOUT_CNOT
    seed: int | None = None
    release_catalysts: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.rotation_method not in METHODS:
            raise ValueError(f"rotation_method must be one of {METHODS}")
        if self.fanout_lowering not in FANOUT_LOWERINGS:
            raise ValueError(f"fanout_lowering must be one of {FANOUT_LOWERINGS}")


@dataclass(frozen=True)
class RotationBlock:
    """``Xi_z(a)``: qubit ``i`` of the register gets ``Rz(2**i a)``."""

    qubits: tuple[Qubit, ...]
    angle: float

    def angles(self) -> list[float]:
        return [2**i * self.angle for i in range(len(self.qubits))]

    def phase(self, y: int) -> float:
        """Phase picked up by basis value ``y``: ``a (y - (2^n - 1)/2)``."""
        return self.angle * (y - (2 ** len(self.qubits) - 1) / 2)

    def emit(self, c: Circuit, tag: str = SYNTHESIS):
        for q, a in zip(self.qubits, self.angles()):
            c.rz(q, a, tag=tag)


def xi_z(c: Circuit, qubits, angle: float, tag: str = SYNTHESIS) -> RotationBlock:
    blk = RotationBlock(tuple(qubits), float(angle))
    blk.emit(c, tag)
    return blk


def check_prefixes(spec: PiecewiseSpec):
    """Every segment must be exactly the grid points sharing its prefix."""
    n = spec.n
    for j, seg in enumerate(spec.segments):
        k = len(seg.prefix)
        value = 0
        for bit in seg.prefix:
            value = 2 * value + bit
        lo = value << (n - k)
        hi = lo + 2 ** (n - k) - 1
        if (seg.lo, seg.hi) != (lo, hi):
            raise MalformedSpecError(
                f"segment {j} covers [{seg.lo}, {seg.hi}] but prefix {seg.prefix} covers [{lo}, {hi}]")


def flag_controls(data: list[Qubit], prefix) -> tuple[list[Qubit], list[int]]:
    """MSB-first prefix bit ``k`` sits on data qubit ``n - 1 - k``."""
    n = len(data)
    return [data[n - 1 - k] for k in range(len(prefix))], [int(b) for b in prefix]


def flag_cost(l: int) -> tuple[int, int]:
    """(T-count, measurement depth) of an ``l``-controlled Toffoli."""
    if l < 1:
        raise ValueError("a flag has at least one control")
    if l == 1:
        return 0, 0
    return 4 * l - 4, math.ceil(math.log2(l))


def build_and_tree(c: Circuit, controls, target: Qubit, ancillas, polarity=None) -> list[tuple]:
    """Compute the AND of ``controls`` into fresh ``target`` as a balanced AND tree.

    Uses ``len(controls) - 2`` fresh ancillas and leaves them holding partial
    products; returns the AND operand triples in order so that
    :func:`uncompute_and_tree` can erase them.
    """
    controls = list(controls)
    polarity = [1] * len(controls) if polarity is None else list(polarity)
    if len(controls) < 2:
        raise ValueError("an AND tree needs at least two controls")
    if len(ancillas) < len(controls) - 2:
        raise ValueError(f"{len(controls)} controls need {len(controls) - 2} ancillas")
    for q, p in zip(controls, polarity):
        if not p:
            c.x(q)
    free = iter(ancillas)
    layer = controls
    triples = []
    while len(layer) > 1:
        nxt = []
        for i in range(0, len(layer) - 1, 2):
            out = target if len(layer) == 2 else next(free)
            c.and_compute(layer[i], layer[i + 1], out)
            triples.append((layer[i], layer[i + 1], out))
            nxt.append(out)
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return triples


def uncompute_and_tree(c: Circuit, triples, controls, polarity=None):
    for a, b, out in reversed(triples):
        c.and_uncompute(a, b, out)
    polarity = [1] * len(controls) if polarity is None else list(polarity)
    for q, p in zip(controls, polarity):
        if not p:
            c.x(q)


def and_tree_circuit(l: int, uncompute: bool = False) -> Circuit:
    c = Circuit()
    ctrl = c.add_register("c", l)
    anc = c.add_register("anc", max(l - 2, 0))
    (t,) = c.add_register("t", 1)
    triples = build_and_tree(c, ctrl, t, anc)
    if uncompute:
        uncompute_and_tree(c, triples, ctrl)
    return c


@dataclass
class _Layout:
    n: int
    S: int
    registers: list[str]
    towers: bool

    def data(self, c, j) -> list[Qubit]:
        return c.reg(self.registers[j])[: self.n]

    def extra(self, j) -> Qubit:
        return Qubit(self.registers[j], self.n)


def _emit_rotations(c: Circuit, lay: _Layout, j: int, a: float, gamma: float, config: OracleConfig):
    data = lay.data(c, j)
    extra = lay.extra(j)
    method = config.rotation_method
    if method == IN_CIRCUIT_TOWERS:
        outs = [Qubit(f"dummy{j}", 0)] + data
        cats = c.reg(f"cat{j}")
        ancs = c.reg(f"anc{j}")
        catalyst.emit_in_circuit_tower(c, a, outs, cats, ancs, seed_tag=SYNTHESIS)
        c.rz(extra, gamma, tag=SYNTHESIS)
        return
    tag = SYNTHESIS if method == SYNTHESIS else catalyst.INJECTION
    xi_z(c, data, a, tag)
    c.rz(extra, gamma, tag=tag)


def build_oracle(spec: PiecewiseSpec, config: OracleConfig = OracleConfig()) -> Circuit:
    """The parallel piecewise oracle for ``spec``.

    With ``in_circuit_towers`` each ``Xi_z`` becomes an n-layer in-circuit
    tower; register ``j`` then also owns ``cat{j}`` and ``anc{j}`` (n qubits
    each) and ``dummy{j}`` (the unused tower output). Catalysts are
    bootstrapped at the start and, with ``release_catalysts``, returned to
    ``|0>`` at the end. Injection-based methods tag rotations ``injection``;
    their action is the same ``Rz``.
    """
    check_prefixes(spec)
    n, S = spec.n, spec.S
    towers = config.rotation_method == IN_CIRCUIT_TOWERS
    c = Circuit()
    names = [f"r{j}" for j in range(S + 1)]
    for name in names:
        c.add_register(name, n + 1)
    if towers:
        for j in range(S + 1):
            c.add_register(f"cat{j}", n)
            c.add_register(f"anc{j}", n)
            c.add_register(f"dummy{j}", 1)
    lay = _Layout(n, S, names, towers)
    amplitude = config.variant == AMPLITUDE_VARIANT
    alphas = [s.alpha for s in spec.segments]
    gammas = spec.gamma
    base = [sum(alphas) / 2] + [-a / 2 for a in alphas]
    offsets = [-sum(gammas)] + list(gammas)

    top = lay.data(c, 0)
    e0 = lay.extra(0)

    if towers:
        for j in range(S + 1):
            for i, q in enumerate(c.reg(f"cat{j}")):
                catalyst.prepare_catalyst(c, q, 2**i * base[j])

    if amplitude:
        c.h(e0)
    fan_controls = top + ([e0] if amplitude else [])
    for q in fan_controls:
        c.cnot(q, *[Qubit(name, q.index) for name in names[1:]], tag=FANOUT)
    if amplitude:
        c.cnot(e0, *top)

    flags = []
    for j, seg in enumerate(spec.segments, start=1):
        ctrl, pol = flag_controls(lay.data(c, j), seg.prefix)
        flags.append(c.mcx(ctrl, lay.extra(j), pol, tag=FLAG))
    for j in range(1, S + 1):
        c.cnot(lay.extra(j), *lay.data(c, j))

    for j in range(S + 1):
        _emit_rotations(c, lay, j, base[j], offsets[j], config)

    for j in range(1, S + 1):
        c.cnot(lay.extra(j), *lay.data(c, j))
    for g in reversed(flags):
        c.append(g)
    if amplitude:
        c.cnot(e0, *top)
    for q in reversed(fan_controls):
        c.cnot(q, *[Qubit(name, q.index) for name in names[1:]], tag=FANIN)
    if amplitude:
        c.h(e0)

    if towers and config.release_catalysts:
        for j in range(S + 1):
            for i, q in enumerate(c.reg(f"cat{j}")):
                c.rz(q, -(2**i) * base[j], tag=catalyst.BOOTSTRAP)
                c.h(q)

    # a tower's unused output sits in |0> and picks up exp(-i a / 2)
    global_phase = -sum(base) / 2 if towers else 0.0
    c.metadata.update(
        kind="piecewise_oracle", n=n, S=S, l=spec.l, variant=config.variant,
        rotation_method=config.rotation_method, mode=spec.mode,
        global_phase=global_phase, seed=config.seed,
    )
    if config.fanout_lowering == FANOUT_GHZ:
        c = lower_fanout(c)
    return c


def input_index(circuit: Circuit, x: int, extra: int = 0) -> int:
    """Basis index with ``r0`` holding ``x`` (and its extra qubit set to ``extra``)."""
    n = circuit.metadata["n"]
    return circuit.basis_index({"r0": x | (extra << n)})


# --- fan-out lowering ----------------------------------------------------------

def lower_fanout(circuit: Circuit) -> Circuit:
    """Replace fan-out and fan-in CNOTs by their measurement-based forms.

    Fan-out of ``x`` onto ``k`` fresh copies: a GHZ state over one helper
    qubit and the copies, CNOT ``x`` -> helper, Z-measure the helper, then
    X on the copies and the helper if the outcome is 1. Fan-in: X-measure
    every copy, apply Z to ``x`` on the parity of the outcomes, and reset
    each copy. One helper qubit per distinct fan-out control is added in
    register ``ghz``.
    """
    controls = []
    for g in circuit.gates:
        if g.kind == Kind.CNOT and g.tag == FANOUT and g.qubits[0] not in controls:
            controls.append(g.qubits[0])
    out = Circuit(dict(circuit.registers), [], dict(circuit.metadata))
    helpers = out.add_register("ghz", len(controls)) if controls else []
    helper_of = dict(zip(controls, helpers))
    count = 0

    def record():
        nonlocal count
        count += 1
        return f"lf{count - 1}"

    def measure(kind, q):
        r = record()
        out.append(Gate(kind, (q,), records=(r,)))
        return r

    for g in circuit.gates:
        if g.kind == Kind.CNOT and g.tag == FANOUT:
            x, copies = g.qubits[0], g.qubits[1:]
            h = helper_of[x]
            out.h(h)
            out.cnot(h, *copies)
            out.cnot(x, h)
            m = measure(Kind.MEASURE_Z, h)
            for q in copies:
                out.x(q, when=m)
            out.x(h, when=m)
        elif g.kind == Kind.CNOT and g.tag == FANIN:
            x, copies = g.qubits[0], g.qubits[1:]
            recs = [measure(Kind.MEASURE_X, q) for q in copies]
            out.z(x, when=recs)
            for q, r in zip(copies, recs):
                out.x(q, when=r)
        else:
            out.append(g)
    out.metadata["fanout_lowering"] = FANOUT_GHZ
    return out


# --- verification ----------------------------------------------------------------

@dataclass
class VerifyReport:
    passed: bool
    max_amplitude_error: float
    max_phase_error: float
    max_leakage: float
    fitted_constant: float
    constant_spread: float
    failures: list[int] = field(default_factory=list)
    tol: float = 1e-9

    def to_json(self) -> dict:
        return {
            "passed": self.passed, "tol": self.tol,
            "max_amplitude_error": self.max_amplitude_error,
            "max_phase_error": self.max_phase_error,
            "max_leakage": self.max_leakage,
            "fitted_constant": self.fitted_constant,
            "constant_spread": self.constant_spread,
            "failures": self.failures,
        }


def expected_output(circuit: Circuit, spec: PiecewiseSpec, x: int) -> dict[int, complex]:
    """Ideal output amplitudes for input ``|x>`` with all ancillas in ``|0>``."""
    f = float(spec.angles([x])[0])
    g = circuit.metadata.get("global_phase", 0.0)
    ph = complex(math.cos(g), math.sin(g))
    if circuit.metadata.get("variant") == AMPLITUDE_VARIANT:
        return {input_index(circuit, x, 0): ph * math.cos(f), input_index(circuit, x, 1): ph * 1j * math.sin(f)}
    return {input_index(circuit, x): ph * complex(math.cos(f), math.sin(f))}


def _compare(state: StateVector, expected: dict[int, complex]) -> tuple[float, float]:
    actual = state.to_dict()
    err = max(abs(actual.get(k, 0) - v) for k, v in expected.items())
    leak = math.sqrt(sum(abs(a) ** 2 for k, a in actual.items() if k not in expected))
    return err, leak


def verify_oracle(circuit: Circuit, spec: PiecewiseSpec, xs=None, tol: float = 1e-9,
                  all_branches: bool = False, seed=None) -> VerifyReport:
    """Simulate every basis input and compare against the classical ``f~``.

    ``all_branches`` enumerates every measurement outcome instead of
    sampling one with ``seed``; it is meant for lowered circuits.
    """
    xs = range(2**spec.n) if xs is None else xs
    amplitude = circuit.metadata.get("variant") == AMPLITUDE_VARIANT
    f = spec.angles(np.arange(2**spec.n))
    worst_err = worst_leak = worst_phase = 0.0
    consts = []
    failures = []
    for x in xs:
        exp = expected_output(circuit, spec, x)
        x_in = input_index(circuit, x)
        if all_branches:
            states = [b.state for b in simulate_all_branches(circuit, x_in)]
        else:
            states = [simulate(circuit, x_in, seed=seed).state]
        bad = False
        for st in states:
            err, leak = _compare(st, exp)
            worst_err, worst_leak = max(worst_err, err), max(worst_leak, leak)
            bad |= err > tol or leak > tol
            if not amplitude:
                a = st.amplitude(x_in)
                if abs(a) > 0.5:
                    d = math.remainder(np.angle(a) - f[x], 2 * math.pi)
                    consts.append(d)
        if bad:
            failures.append(int(x))
    if consts:
        c0 = math.atan2(np.mean(np.sin(consts)), np.mean(np.cos(consts)))
        devs = [abs(math.remainder(d - c0, 2 * math.pi)) for d in consts]
        g = circuit.metadata.get("global_phase", 0.0)
        worst_phase = max(abs(math.remainder(d - g, 2 * math.pi)) for d in consts)
        spread = max(devs)
    else:
        c0, spread = 0.0, 0.0
    return VerifyReport(not failures, worst_err, worst_phase, worst_leak, c0, spread, failures, tol)
