import cmath
import math

import numpy as np
import pytest
from conftest import embed, random_state

from piecewise_oracle.circuit import Circuit, measurement_depth, t_count, validate
from piecewise_oracle.oracle import (AMPLITUDE_VARIANT, FANIN, FANOUT, FANOUT_GHZ, IN_CIRCUIT_TOWERS,
                                     METHODS, SYNTHESIS, SYNTHESIS_INJECTION, MalformedSpecError,
                                     OracleConfig, RotationBlock, build_oracle, flag_cost,
                                     input_index, lower_fanout, verify_oracle)
from piecewise_oracle.resources import (CostParams, meas_depth, oracle_cost_model,
                                        steady_state_t_per_round)
from piecewise_oracle.segmenter import AMPLITUDE, PiecewiseSpec, Segment, random_spec
from piecewise_oracle.simulator import simulate, simulate_all_branches


def uniform_spec(n, l, rng, scale=1.0):
    """``2**l`` segments, all with prefixes of length ``l``."""
    width = 2 ** (n - l)
    segs = []
    for j in range(2**l):
        prefix = tuple(int(b) for b in format(j, f"0{l}b")) if l else ()
        a, b = rng.uniform(-scale, scale, 2)
        segs.append(Segment(j * width, (j + 1) * width - 1, float(a), float(b), prefix, 0.0))
    return PiecewiseSpec(n, segs)


class TestPhaseOracle:
    def test_constant_single_segment(self):
        spec = PiecewiseSpec(3, [Segment(0, 7, 0.0, 0.7, (), 0.0)])
        c = build_oracle(spec)
        for x in range(8):
            amp = simulate(c, input_index(c, x)).state.amplitude(input_index(c, x))
            assert amp == pytest.approx(cmath.exp(0.7j), abs=1e-12)

    def test_two_segments_exact(self):
        spec = PiecewiseSpec(2, [Segment(0, 1, 0.5, 0.1, (0,), 0.0), Segment(2, 3, -0.25, 1.0, (1,), 0.0)])
        c = build_oracle(spec)
        f = [0.1, 0.6, 0.5, 0.25]
        for x in range(4):
            out = simulate(c, input_index(c, x)).state
            assert out.to_dict() == pytest.approx({input_index(c, x): cmath.exp(1j * f[x])}, abs=1e-12)

    def test_random_specs(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 5))
            spec = random_spec(n, int(rng.integers(1, min(6, 2**n) + 1)), rng)
            rep = verify_oracle(build_oracle(spec), spec)
            assert rep.passed and rep.max_phase_error < 1e-9 and rep.max_leakage < 1e-9

    def test_acts_on_superpositions(self, rng):
        spec = random_spec(3, 4, rng)
        c = build_oracle(spec)
        psi = random_state(rng, 3)
        out = simulate(c, embed(c, c.reg("r0")[:3], psi)).state
        f = spec.angles(np.arange(8))
        assert out.allclose(embed(c, c.reg("r0")[:3], psi * np.exp(1j * f)), 1e-10)

    def test_width(self, rng):
        assert build_oracle(random_spec(4, 5, rng)).width == 6 * 5

    def test_metadata(self, rng):
        c = build_oracle(random_spec(2, 3, rng), OracleConfig(seed=4))
        md = c.metadata
        assert (md["n"], md["S"], md["variant"], md["global_phase"], md["seed"]) == (2, 3, "phase", 0.0, 4)

    @pytest.mark.parametrize("method", METHODS)
    def test_every_method_same_action(self, method, rng):
        spec = random_spec(3, 3, rng)
        rep = verify_oracle(build_oracle(spec, OracleConfig(rotation_method=method)), spec)
        assert rep.passed, rep.failures


class TestAmplitudeOracle:
    def test_random_specs(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 5))
            spec = random_spec(n, int(rng.integers(1, min(6, 2**n) + 1)), rng, mode=AMPLITUDE)
            c = build_oracle(spec, OracleConfig(variant=AMPLITUDE_VARIANT))
            for x in range(2**n):
                f = float(spec.angles([x])[0])
                out = simulate(c, input_index(c, x)).state
                want = {input_index(c, x, 0): math.cos(f), input_index(c, x, 1): 1j * math.sin(f)}
                assert out.to_dict() == pytest.approx({k: v for k, v in want.items() if abs(v) > 1e-14},
                                                      abs=1e-10)

    def test_towers(self, rng):
        spec = random_spec(3, 3, rng, mode=AMPLITUDE)
        c = build_oracle(spec, OracleConfig(AMPLITUDE_VARIANT, IN_CIRCUIT_TOWERS))
        assert verify_oracle(c, spec, seed=1).passed


class TestTowersInOracle:
    def test_width(self, rng):
        spec = random_spec(3, 4, rng)
        c = build_oracle(spec, OracleConfig(rotation_method=IN_CIRCUIT_TOWERS))
        assert c.width == 5 * (3 * 3 + 2)

    def test_pricing_width(self, rng):
        spec = random_spec(15, 36, rng)
        c = build_oracle(spec, OracleConfig(rotation_method=IN_CIRCUIT_TOWERS))
        assert c.width == 37 * 47 == 1739
        assert validate(c) == []

    def test_every_branch(self, rng):
        spec = random_spec(2, 2, rng)
        c = build_oracle(spec, OracleConfig(rotation_method=IN_CIRCUIT_TOWERS))
        assert verify_oracle(c, spec, all_branches=True).passed

    def test_kept_catalysts(self, rng):
        spec = random_spec(2, 2, rng)
        c = build_oracle(spec, OracleConfig(rotation_method=IN_CIRCUIT_TOWERS, release_catalysts=False))
        assert sum(g.tag == "bootstrap" for g in c.gates) == 3 * 2


class TestLowering:
    def fanout_circuit(self, k=3):
        c = Circuit()
        (x,) = c.add_register("x", 1)
        copies = c.add_register("y", k)
        c.cnot(x, *copies, tag=FANOUT)
        return c, x, copies

    def test_fanout_of_one(self):
        c, x, copies = self.fanout_circuit()
        low = lower_fanout(c)
        for br in simulate_all_branches(low, embed(low, [x], [0, 1])):
            assert br.state.allclose(embed(low, [x] + copies, np.eye(16)[15]), 1e-12)

    def test_ghz_resource(self):
        c, x, copies = self.fanout_circuit()
        low = lower_fanout(c)
        head = Circuit(dict(low.registers), low.gates[:2])
        want = np.zeros(16)
        want[0] = want[15] = 1 / math.sqrt(2)
        assert simulate(head).state.allclose(embed(low, low.reg("ghz") + copies, want), 1e-12)

    def test_fanout_then_fanin_every_branch(self, rng):
        c, x, copies = self.fanout_circuit()
        c.cnot(x, *copies, tag=FANIN)
        low = lower_fanout(c)
        for _ in range(5):
            psi = embed(low, [x], random_state(rng, 1))
            branches = simulate_all_branches(low, psi)
            assert len(branches) == 2 * 2**3
            for br in branches:
                assert br.state.allclose(psi, 1e-10)

    def test_fanout_matches_cnot(self, rng):
        c, x, copies = self.fanout_circuit()
        low = lower_fanout(c)
        psi_c = embed(c, [x], random_state(rng, 1))
        want = simulate(c, psi_c).state
        for br in simulate_all_branches(low, embed(low, [x], psi_c.to_dense()[:2])):
            # the ghz helper returns to |0>, so the lowered state restricted to x, y matches
            assert br.state.to_dict().keys() == want.to_dict().keys()
            for k, v in want.to_dict().items():
                assert br.state.amplitude(k) == pytest.approx(v, abs=1e-10)

    @pytest.mark.parametrize("variant", ["phase", "amplitude"])
    def test_oracle_every_branch(self, variant, rng):
        mode = AMPLITUDE if variant == "amplitude" else "phase"
        for S in (1, 2):
            spec = random_spec(2, S, rng, mode=mode)
            c = build_oracle(spec, OracleConfig(variant, fanout_lowering=FANOUT_GHZ))
            assert "ghz" in c.registers
            assert verify_oracle(c, spec, all_branches=True).passed

    def test_sampled_branches_larger(self, rng):
        spec = random_spec(4, 6, rng)
        c = build_oracle(spec, OracleConfig(fanout_lowering=FANOUT_GHZ))
        for seed in range(3):
            assert verify_oracle(c, spec, seed=seed).passed


class TestFlags:
    @pytest.mark.parametrize("l,cost", [(1, (0, 0)), (2, (4, 1)), (3, (8, 2)), (4, (12, 2)), (5, (16, 3)), (6, (20, 3))])
    def test_flag_cost(self, l, cost):
        assert flag_cost(l) == cost

    def test_flag_cost_rejects_zero(self):
        with pytest.raises(ValueError):
            flag_cost(0)

    def test_malformed_prefix(self):
        spec = PiecewiseSpec(2, [Segment(0, 0, 0, 0, (0,), 0), Segment(1, 3, 0, 0, (1,), 0)])
        with pytest.raises(MalformedSpecError):
            build_oracle(spec)

    def test_rotation_block_phase(self):
        blk = RotationBlock(tuple(range(3)), 0.3)
        assert blk.angles() == pytest.approx([0.3, 0.6, 1.2])
        assert blk.phase(7) - blk.phase(0) == pytest.approx(7 * 0.3)


class TestCircuitCosts:
    """Costs read off built circuits agree with the closed forms (steady state, one round)."""

    @pytest.mark.parametrize("method", [SYNTHESIS, SYNTHESIS_INJECTION, IN_CIRCUIT_TOWERS])
    @pytest.mark.parametrize("n,l", [(4, 2), (5, 3), (3, 1)])
    def test_matches_formulas(self, method, n, l, rng):
        spec = uniform_spec(n, l, rng)
        p = CostParams(spec.S, n, 1, 1e-3)
        c = build_oracle(spec, OracleConfig(rotation_method=method))
        model = oracle_cost_model(method, p)
        assert t_count(c, model) == pytest.approx(steady_state_t_per_round(method, p), rel=1e-12)
        assert measurement_depth(c, model) == pytest.approx(meas_depth(method, p), rel=1e-12)
