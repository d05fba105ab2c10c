"""Catalyst circuits, logical-AND fragments and repeat-until-success injection.

A CT block rotates two targets by ``theta`` using a catalyst qubit held in
``Rz(theta)|+>``, one logical AND and a single ``Rz(2 theta)`` seed on a
fresh ancilla. The block splits into a *pre* half (everything before the
seed) and a *post* half; stacking blocks so that one block's ancilla is
the next block's first target gives the towers. Towers are emitted as all
pre halves in order, the single seed, then the post halves reversed.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Gate, Kind, Qubit
from .simulator import Simulator

SYNTHESIS = "synthesis"
INJECTION = "injection"
BOOTSTRAP = "bootstrap"
IN_CIRCUIT = "in_circuit"
INDEPENDENT = "independent"


# --- logical AND -----------------------------------------------------------

def and_compute(c: Circuit, a: Qubit, b: Qubit, out: Qubit):
    """Write ``a AND b`` into fresh ``out`` with four T gates and one T layer."""
    c.prep_t(out)
    c.cnot(a, out)
    c.cnot(b, out)
    c.cnot(out, a, b)
    c.tdg(a)
    c.tdg(b)
    c.t(out)
    c.cnot(out, a, b)
    c.h(out)
    c.s(out)


def and_uncompute(c: Circuit, a: Qubit, b: Qubit, out: Qubit) -> str:
    """Erase ``out = a AND b`` by an X-basis measurement and a CZ fix-up; returns the record."""
    c.h(out)
    m = c.measure_z(out)
    c.cz(a, b, when=m)
    c.x(out, when=m)
    return m


def and_fragment(uncompute: bool = True) -> Circuit:
    """Registers ``in`` (a, b) and ``out``; explicit compute, optionally followed by uncompute."""
    c = Circuit()
    a, b = c.add_register("in", 2)
    (out,) = c.add_register("out", 1)
    and_compute(c, a, b, out)
    if uncompute:
        and_uncompute(c, a, b, out)
    return c


# --- CT blocks ----------------------------------------------------------------

@dataclass(frozen=True)
class CTBlock:
    theta: float
    a: Qubit
    b: Qubit
    catalyst: Qubit
    ancilla: Qubit

    @property
    def seed_angle(self) -> float:
        return 2 * self.theta


def ct_pre(c: Circuit, blk: CTBlock):
    c.x(blk.catalyst)
    c.cnot(blk.a, blk.b, blk.catalyst)
    c.and_compute(blk.b, blk.catalyst, blk.ancilla)
    c.cnot(blk.a, blk.ancilla)


def ct_post(c: Circuit, blk: CTBlock):
    c.cnot(blk.a, blk.ancilla)
    c.and_uncompute(blk.b, blk.catalyst, blk.ancilla)
    c.cnot(blk.b, blk.catalyst)
    c.cnot(blk.a, blk.b, blk.catalyst)
    c.x(blk.catalyst)


def prepare_catalyst(c: Circuit, q: Qubit, theta: float, tag: str = BOOTSTRAP):
    """``Rz(theta)|+>`` on a fresh qubit."""
    c.h(q)
    c.rz(q, theta, tag=tag)


def emit_ct_block(c: Circuit, blk: CTBlock, seed_tag: str = SYNTHESIS):
    ct_pre(c, blk)
    c.rz(blk.ancilla, blk.seed_angle, tag=seed_tag)
    ct_post(c, blk)


@dataclass
class CatalystCircuit:
    """A circuit plus the role of each qubit.

    ``outputs`` pairs each rotated qubit with the angle it receives;
    ``catalysts`` pairs each catalyst with the angle it holds. ``prepared``
    is the number of leading gates that only set up catalysts (and, for
    independent towers, the ``|+>`` outputs).
    """

    circuit: Circuit
    outputs: list[tuple[Qubit, float]]
    catalysts: list[tuple[Qubit, float]]
    ancillas: list[Qubit]
    seed: tuple[Qubit, float]
    blocks: list[CTBlock] = field(default_factory=list)
    prepared: int = 0

    @property
    def t_count_per_use(self) -> int:
        return 4 * len(self.blocks)

    def species(self, theta: float | None = None) -> Counter:
        """Multiset of output angles as powers of two of the smallest one."""
        base = theta if theta is not None else min(a for _, a in self.outputs)
        return Counter(int(round(math.log2(a / base))) for _, a in self.outputs)


def build_ct_block(theta: float, seed_source: str = SYNTHESIS, prepare_catalysts: bool = True) -> CatalystCircuit:
    """One CT block on registers ``t`` (two targets), ``cat`` and ``anc``.

    ``seed_source`` is the tag carried by the ``Rz(2 theta)`` seed:
    ``synthesis`` or ``injection``.
    """
    c = Circuit()
    a, b = c.add_register("t", 2)
    (cat,) = c.add_register("cat", 1)
    (anc,) = c.add_register("anc", 1)
    if prepare_catalysts:
        prepare_catalyst(c, cat, theta)
    pre = len(c)
    blk = CTBlock(theta, a, b, cat, anc)
    emit_ct_block(c, blk, seed_tag=seed_source)
    c.metadata.update(kind="ct_block", theta=theta)
    return CatalystCircuit(c, [(a, theta), (b, theta)], [(cat, theta)], [anc], (anc, 2 * theta), [blk], pre)


# --- in-circuit towers ----------------------------------------------------------

def in_circuit_angles(layers: int, theta: float) -> list[float]:
    """Angles an ``layers``-layer in-circuit tower applies to its ``layers + 1`` outputs."""
    return [theta] + [2**i * theta for i in range(layers)]


def emit_in_circuit_tower(c: Circuit, theta: float, outputs, catalysts, ancillas,
                          seed_tag: str = SYNTHESIS) -> list[CTBlock]:
    """Emit a tower over ``len(catalysts)`` layers.

    Layer ``i`` works at ``2**i * theta``; its targets are the previous
    layer's ancilla (``outputs[0]`` for layer 0) and ``outputs[i + 1]``.
    Output ``j`` ends rotated by ``in_circuit_angles(n, theta)[j]``.
    """
    n = len(catalysts)
    if n < 1 or len(ancillas) != n or len(outputs) != n + 1:
        raise ValueError("an n-layer tower needs n catalysts, n ancillas and n + 1 outputs")
    blocks = []
    first = outputs[0]
    for i in range(n):
        blocks.append(CTBlock(2**i * theta, first, outputs[i + 1], catalysts[i], ancillas[i]))
        first = ancillas[i]
    for blk in blocks:
        ct_pre(c, blk)
    c.rz(ancillas[-1], 2**n * theta, tag=seed_tag)
    for blk in reversed(blocks):
        ct_post(c, blk)
    return blocks


def build_in_circuit_tower(layers: int, theta: float, target_assignment=None,
                           prepare_catalysts: bool = True) -> CatalystCircuit:
    """Stand-alone ``layers``-layer in-circuit tower on registers ``out``, ``cat``, ``anc``.

    ``target_assignment`` optionally lists the angle multipliers (powers of
    two of ``theta``) the caller needs; it raises if the tower cannot
    supply them and otherwise reorders ``outputs`` to match.
    """
    if layers < 1:
        raise ValueError("a tower has at least one layer")
    c = Circuit()
    out = c.add_register("out", layers + 1)
    cat = c.add_register("cat", layers)
    anc = c.add_register("anc", layers)
    if prepare_catalysts:
        for i, q in enumerate(cat):
            prepare_catalyst(c, q, 2**i * theta)
    pre = len(c)
    blocks = emit_in_circuit_tower(c, theta, out, cat, anc)
    outputs = list(zip(out, in_circuit_angles(layers, theta)))
    if target_assignment is not None:
        outputs = _assign(outputs, target_assignment, theta)
    c.metadata.update(kind="in_circuit_tower", layers=layers, theta=theta)
    return CatalystCircuit(c, outputs, [(q, 2**i * theta) for i, q in enumerate(cat)], anc,
                           (anc[-1], 2**layers * theta), blocks, pre)


def _assign(outputs, multipliers, theta):
    pool = list(outputs)
    chosen = []
    for mlt in multipliers:
        for k, (q, a) in enumerate(pool):
            if math.isclose(a, mlt * theta, rel_tol=1e-12, abs_tol=1e-300):
                chosen.append(pool.pop(k))
                break
        else:
            have = sorted(round(a / theta, 6) for _, a in outputs) if theta else []
            raise ValueError(f"tower outputs {have} cannot supply multiplier {mlt}")
    return chosen + pool


# --- independent towers --------------------------------------------------------

def independent_species(layers: int) -> Counter:
    """Output multiset (powers of two of theta) of an independent tower."""
    if layers < 1:
        raise ValueError("a tower has at least one layer")
    if layers == 1:
        return Counter({0: 2})
    counts = Counter({0: 2})
    for i in range(1, layers - 1):
        counts[i] += 1  # top-chain block i
    if layers == 2:
        counts[1] += 1
    else:
        for j in range(2, layers - 1):
            counts[j] += 1  # bottom-chain block j
        counts[1] += 2  # bottom block 1 has two outputs
    return counts


def independent_qubits(layers: int) -> int:
    return 4 if layers == 1 else 6 * layers - 5


def build_independent_tower(layers: int, theta: float, prepare_catalysts: bool = True) -> CatalystCircuit:
    """Tower producing resource states ``Rz(2**k theta)|+>`` on register ``res``.

    For ``layers >= 2`` a top chain of ``layers`` blocks at ``theta .. 2**(layers-1) theta``
    is joined at its root to a bottom chain at ``2**(layers-2) theta .. 2 theta``,
    for ``2 layers - 2`` blocks in all.
    """
    if layers < 1:
        raise ValueError("a tower has at least one layer")
    n = layers
    n_blocks = 1 if n == 1 else 2 * n - 2
    n_out = 2 if n == 1 else 2 * n - 1
    c = Circuit()
    res = c.add_register("res", n_out)
    cat = c.add_register("cat", n_blocks)
    anc = c.add_register("anc", n_blocks)
    free = iter(res)

    top = []  # (exponent, block)
    prev = None
    bottom = []
    if n == 1:
        top.append((0, CTBlock(theta, next(free), next(free), cat[0], anc[0])))
    else:
        # bottom chain first so the root's second target exists
        b_prev = None
        for j in range(1, n - 1):
            k = n - 1 + j  # block index after the top chain
            if j == 1:
                a_q, b_q = next(free), next(free)
            else:
                a_q, b_q = b_prev, next(free)
            blk = CTBlock(2**j * theta, a_q, b_q, cat[k], anc[k])
            bottom.append((j, blk))
            b_prev = anc[k]
        for i in range(n):
            if i == 0:
                a_q, b_q = next(free), next(free)
            elif i < n - 1:
                a_q, b_q = prev, next(free)
            else:
                a_q, b_q = prev, (b_prev if n >= 3 else next(free))
            top.append((i, CTBlock(2**i * theta, a_q, b_q, cat[i], anc[i])))
            prev = anc[i]
    chain = sorted(top + bottom, key=lambda e: e[0])
    blocks = [blk for _, blk in chain]

    if prepare_catalysts:
        for blk in blocks:
            prepare_catalyst(c, blk.catalyst, blk.theta)
        for q in res:
            c.h(q)
    pre = len(c)
    for blk in blocks:
        ct_pre(c, blk)
    root = top[-1][1]
    c.rz(root.ancilla, root.seed_angle, tag=SYNTHESIS)
    for blk in reversed(blocks):
        ct_post(c, blk)

    # each output receives the angle of the one block that lists it as a target
    angle_of = {}
    for blk in blocks:
        for q in (blk.a, blk.b):
            if q.register == "res":
                angle_of[q] = blk.theta
    outputs = [(q, angle_of[q]) for q in res]
    c.metadata.update(kind="independent_tower", layers=layers, theta=theta)
    return CatalystCircuit(c, outputs, [(blk.catalyst, blk.theta) for blk in blocks],
                           list(anc), (root.ancilla, root.seed_angle), blocks, pre)


@dataclass(frozen=True)
class TowerSpec:
    layers: int
    seed_angle: float
    orientation: str = IN_CIRCUIT

    def build(self) -> CatalystCircuit:
        if self.orientation == IN_CIRCUIT:
            return build_in_circuit_tower(self.layers, self.seed_angle)
        if self.orientation == INDEPENDENT:
            return build_independent_tower(self.layers, self.seed_angle)
        raise ValueError(f"unknown orientation {self.orientation!r}")

    def species(self) -> Counter:
        if self.orientation == IN_CIRCUIT:
            return Counter({0: 2, **{i: 1 for i in range(1, self.layers)}})
        return independent_species(self.layers)

    def t_count(self, rot_t: float) -> float:
        """T per steady-state use: one synthesised seed plus 4 T per CT block."""
        blocks = self.layers if self.orientation == IN_CIRCUIT else (
            1 if self.layers == 1 else 2 * self.layers - 2)
        return rot_t + 4 * blocks


# --- repeat-until-success injection -------------------------------------------------

class ResourceUnderflowError(RuntimeError):
    pass


@dataclass
class Reservoir:
    """Resource states ``Rz(2**k base)|+>`` held per species ``k``.

    ``counts=None`` means an unlimited supply.
    """

    base_angle: float
    counts: dict[int, int] | None = None
    consumed: Counter = field(default_factory=Counter)

    def take(self, k: int) -> float:
        if self.counts is not None:
            if self.counts.get(k, 0) <= self.consumed[k]:
                raise ResourceUnderflowError(f"no resource state of species {k} left "
                                             f"({self.counts.get(k, 0)} stocked)")
        self.consumed[k] += 1
        return 2**k * self.base_angle

    @classmethod
    def sized_for(cls, base_angle: float, exponents, max_species: int, factor: float = 2.0) -> Reservoir:
        demand = expected_species_demand(exponents, max_species)
        return cls(base_angle, reservoir_sizes(demand, factor))


def expected_species_demand(exponents, max_species: int) -> dict[int, float]:
    """Expected use of each species when RUS-injecting targets ``2**e base`` for ``e`` in ``exponents``.

    A target at species ``e`` reaches attempt ``k`` with probability ``2**-k``
    and that attempt uses species ``e + k``; species above ``max_species``
    are dropped.
    """
    demand = {j: 0.0 for j in range(min(exponents), max_species + 1)}
    for e in exponents:
        for j in range(e, max_species + 1):
            demand[j] += 2.0 ** -(j - e)
    return demand


def reservoir_sizes(demand: dict[int, float], factor: float = 2.0) -> dict[int, int]:
    return {j: math.ceil(factor * d - 1e-12) for j, d in demand.items()}


@dataclass(frozen=True)
class RusAttempt:
    target: int
    attempt: int
    angle: float
    outcome: int

    @property
    def success(self) -> bool:
        return self.outcome == 0


@dataclass
class RusTrace:
    thetas: list[float]
    attempts: list[RusAttempt] = field(default_factory=list)

    def for_target(self, t: int) -> list[RusAttempt]:
        return [a for a in self.attempts if a.target == t]

    def attempt_counts(self) -> list[int]:
        counts = Counter(a.target for a in self.attempts)
        return [counts[t] for t in range(len(self.thetas))]

    @property
    def depth(self) -> int:
        return max(self.attempt_counts(), default=0)

    def net_angle(self, t: int) -> float:
        return sum(a.angle if a.success else -a.angle for a in self.for_target(t))

    def to_json(self) -> dict:
        return {
            "thetas": self.thetas,
            "depth": self.depth,
            "attempts": [{"target": a.target, "attempt": a.attempt, "angle": a.angle,
                          "outcome": a.outcome, "success": a.success} for a in self.attempts],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def rus_inject(sim: Simulator, target: Qubit, resource: Qubit, theta: float,
               reservoir: Reservoir | None = None, exponent: int = 0,
               max_attempts: int = 64, trace: RusTrace | None = None, index: int = 0) -> RusTrace:
    """Apply ``Rz(theta)`` to ``target`` inside a live simulation by gate teleportation.

    Each attempt loads ``Rz(a)|+>`` into the fresh ``resource`` qubit, applies
    CNOT target -> resource and measures the resource in Z. Outcome 0 applies
    ``Rz(a)``; outcome 1 applies ``Rz(-a)`` and the next attempt doubles ``a``.
    ``reservoir`` (species numbered from ``exponent``) accounts for the states
    used; without one the supply is unlimited.
    """
    trace = trace if trace is not None else RusTrace([theta])
    angle = theta
    for k in range(max_attempts):
        if reservoir is not None:
            angle = reservoir.take(exponent + k)
        sim.apply(Gate(Kind.H, (resource,)))
        sim.apply(Gate(Kind.RZ, (resource,), angle=angle, tag=INJECTION))
        sim.apply(Gate(Kind.CNOT, (target, resource)))
        rec = f"rus{index}_{k}_{len(sim.records)}"
        outcome = sim.apply(Gate(Kind.MEASURE_Z, (resource,), records=(rec,)))
        sim.apply(Gate(Kind.X, (resource,), records=(rec,)))
        trace.attempts.append(RusAttempt(index, k, angle, outcome))
        if outcome == 0:
            return trace
        angle = 2 * angle
    raise ResourceUnderflowError(f"target {index} did not succeed within {max_attempts} attempts")


def target_streams(seed, count: int) -> list[np.random.Generator]:
    """Independent per-target generators derived from ``(seed, target index)``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def rus_sample(thetas, seed=None, reservoir: Reservoir | None = None, exponents=None,
               max_attempts: int = 64) -> RusTrace:
    """Sample RUS outcomes for parallel targets without a state vector.

    Every attempt fails with probability 1/2, the Born probability of the
    live protocol for any target state.
    """
    thetas = list(thetas)
    exponents = list(exponents) if exponents is not None else [0] * len(thetas)
    trace = RusTrace(thetas)
    for t, (theta, rng) in enumerate(zip(thetas, target_streams(seed, len(thetas)))):
        angle = theta
        for k in range(max_attempts):
            if reservoir is not None:
                angle = reservoir.take(exponents[t] + k)
            outcome = int(rng.random() < 0.5)
            trace.attempts.append(RusAttempt(t, k, angle, outcome))
            if outcome == 0:
                break
            angle = 2 * angle
        else:
            raise ResourceUnderflowError(f"target {t} did not succeed within {max_attempts} attempts")
    return trace


def mean_attempts(runs: int, seed=None) -> tuple[float, float]:
    """Mean and standard error of attempts per target over ``runs`` sampled targets."""
    counts = np.array(rus_sample([1.0] * runs, seed).attempt_counts(), dtype=float)
    return float(counts.mean()), float(counts.std(ddof=1) / math.sqrt(runs))
