import math

import numpy as np
import pytest

from piecewise_oracle.catalyst import build_ct_block
from piecewise_oracle.circuit import (Circuit, ContractError, CostModel, Gate, Kind, Qubit,
                                      measurement_depth, t_count, validate, width)
from piecewise_oracle.oracle import OracleConfig, and_tree_circuit, build_oracle
from piecewise_oracle.segmenter import random_spec


def test_width_of_empty_register():
    c = Circuit()
    c.add_register("q", 3)
    assert width(c) == 3


def test_oracle_width(rng):
    spec = random_spec(3, 4, rng)
    assert width(build_oracle(spec)) == 20


def test_width_is_sum_of_registers():
    c = Circuit()
    for name, size in (("a", 2), ("b", 5), ("c", 0)):
        c.add_register(name, size)
    assert c.width == 7 and len(c.qubits()) == 7


class TestValidate:
    def test_ct_block_ok(self):
        assert validate(build_ct_block(0.3).circuit) == []

    def test_undeclared_qubit(self):
        c = Circuit()
        c.add_register("q", 1)
        c.x(Qubit("q", 1))
        assert any("undeclared" in e for e in validate(c))

    def test_condition_before_measurement(self):
        c = Circuit()
        (q,) = c.add_register("q", 1)
        c.x(q, when="m7")
        assert any("before it is measured" in e for e in validate(c))

    def test_repeated_operand(self):
        c = Circuit()
        (q,) = c.add_register("q", 1)
        c.append(Gate(Kind.CNOT, (q, q)))
        assert any("repeated" in e for e in validate(c))

    def test_uncompute_without_compute(self):
        c = Circuit()
        a, b, t = c.add_register("q", 3)
        c.and_uncompute(a, b, t)
        assert any("AndCompute" in e for e in validate(c))

    def test_polarity_mismatch(self):
        c = Circuit()
        q = c.add_register("q", 3)
        c.append(Gate(Kind.MCX, tuple(q), polarity=(1,)))
        assert any("polarity" in e for e in validate(c))

    def test_reports_all_errors(self):
        c = Circuit()
        (q,) = c.add_register("q", 1)
        c.x(Qubit("r", 0))
        c.z(q, when="nope")
        assert len(validate(c)) == 2


def test_serialization_round_trip(rng):
    spec = random_spec(3, 3, rng)
    for cfg in (OracleConfig(), OracleConfig("amplitude", "in_circuit_towers", "ghz-measurement")):
        c = build_oracle(spec, cfg)
        again = Circuit.loads(c.dumps())
        assert again == c
        assert again.dumps() == c.dumps()


def test_json_field_order():
    c = Circuit()
    (q,) = c.add_register("q", 1)
    c.rz(q, 0.5, tag="synthesis")
    d = c.to_json()
    assert list(d) == ["registers", "gates", "metadata"]
    assert list(d["gates"][0]) == ["kind", "operands", "params", "records"]


class TestMeasurementDepth:
    def test_single_measurement(self):
        c = Circuit()
        (q,) = c.add_register("q", 1)
        c.measure_z(q)
        assert measurement_depth(c) == 1

    def test_and_compute_then_uncompute(self):
        # one AND layer plus one measurement layer under the fixed-depth table
        c = Circuit()
        a, b, t = c.add_register("q", 3)
        c.and_compute(a, b, t)
        c.and_uncompute(a, b, t)
        assert measurement_depth(c) == 2
        assert t_count(c) == 4

    def test_and_tree_six_controls(self):
        c = and_tree_circuit(6)
        assert measurement_depth(c) == 3 == math.ceil(math.log2(6))
        assert t_count(c) == 4 * 6 - 4

    @pytest.mark.parametrize("l", [2, 3, 4, 5, 7, 8, 9])
    def test_and_tree_depth(self, l):
        c = and_tree_circuit(l)
        assert measurement_depth(c) == math.ceil(math.log2(l))

    def test_cliffords_free(self):
        c = Circuit()
        a, b = c.add_register("q", 2)
        for _ in range(5):
            c.h(a)
            c.cnot(a, b)
            c.s(b)
        assert measurement_depth(c) == 0

    def test_classical_dependency_orders_layers(self):
        c = Circuit()
        a, b = c.add_register("q", 2)
        m = c.measure_z(a)
        c.x(b, when=m)
        c.measure_z(b)
        assert measurement_depth(c) == 2

    def test_unpriced_rotation_is_contract_error(self):
        c = Circuit()
        (q,) = c.add_register("q", 1)
        c.rz(q, 0.1)
        with pytest.raises(ContractError):
            measurement_depth(c)
        with pytest.raises(ContractError):
            t_count(c, CostModel.for_rot_t(10))

    def test_parallel_rotations(self):
        c = Circuit()
        qs = c.add_register("q", 4)
        for q in qs:
            c.rz(q, 0.2, tag="synthesis")
        model = CostModel.for_rot_t(12.5)
        assert measurement_depth(c, model) == 12.5
        assert t_count(c, model) == 50


def test_gate_json_round_trip():
    g = Gate(Kind.MCX, (Qubit("a", 0), Qubit("a", 1), Qubit("b", 0)), polarity=(0, 1), tag="flag")
    assert Gate.from_json(g.to_json()) == g
    assert g.controls == (Qubit("a", 0), Qubit("a", 1)) and g.targets == (Qubit("b", 0),)


def test_basis_index_little_endian():
    c = Circuit()
    c.add_register("a", 2)
    c.add_register("b", 3)
    assert c.basis_index({"a": 1, "b": 5}) == 1 | (5 << 2)
    with pytest.raises(ValueError):
        c.basis_index({"a": 4})


def test_rz_angle_kept_as_data():
    c = Circuit()
    (q,) = c.add_register("q", 1)
    c.rz(q, np.pi / 7, tag="synthesis")
    assert c.gates[0].angle == np.pi / 7
