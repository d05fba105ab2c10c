import numpy as np
import pytest

from piecewise_oracle.circuit import Circuit
from piecewise_oracle.simulator import (StateVector, reduced_density_matrix, simulate,
                                        simulate_all_branches, trace_distance)


def random_state(rng, k: int) -> np.ndarray:
    v = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
    return v / np.linalg.norm(v)


def embed(circuit: Circuit, qubits, psi) -> StateVector:
    """``psi`` on ``qubits`` (qubits[0] is its bit 0), every other qubit in |0>."""
    index = circuit.qubit_index()
    pos = [index[q] for q in qubits]
    amps = {}
    for local, a in enumerate(np.asarray(psi)):
        if a == 0:
            continue
        g = 0
        for b, p in enumerate(pos):
            if (local >> b) & 1:
                g |= 1 << p
        amps[g] = complex(a)
    return StateVector.from_dict(circuit.width, amps)


def rz_plus(theta: float) -> np.ndarray:
    return np.array([np.exp(-0.5j * theta), np.exp(0.5j * theta)]) / np.sqrt(2)


def product_initial(cc, rng):
    """Random state on the outputs with every catalyst in its resource state."""
    outs = [q for q, _ in cc.outputs]
    cats = [q for q, _ in cc.catalysts]
    v = random_state(rng, len(outs))
    for _, a in cc.catalysts:
        v = np.kron(rz_plus(a), v)
    return embed(cc.circuit, outs + cats, v)


def ideal_state(cc, initial):
    ref = Circuit(dict(cc.circuit.registers))
    for q, a in cc.outputs:
        ref.rz(q, a)
    return simulate(ref, initial).state


def tower_errors(cc, rng, all_branches=False, seed=None):
    """(worst infidelity, worst catalyst trace distance) over the branches checked."""
    psi = product_initial(cc, rng)
    want = ideal_state(cc, psi)
    states = ([b.state for b in simulate_all_branches(cc.circuit, psi)] if all_branches
              else [simulate(cc.circuit, psi, seed=seed).state])
    index = cc.circuit.qubit_index()
    worst_f, worst_td = 0.0, 0.0
    for s in states:
        worst_f = max(worst_f, 1 - s.fidelity(want))
        for q, a in cc.catalysts:
            v = rz_plus(a)
            td = trace_distance(reduced_density_matrix(s, index[q]), np.outer(v, v.conj()))
            worst_td = max(worst_td, td)
    return worst_f, worst_td


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)
