import json

import pytest

from piecewise_oracle import __version__
from piecewise_oracle.circuit import Circuit
from piecewise_oracle.cli import main
from piecewise_oracle.segmenter import PiecewiseSpec
from piecewise_oracle.simulator import MAX_QUBITS_ENV


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


class TestSegment:
    @pytest.mark.parametrize("target,n,tol,S", [("payoff", 15, "1e-3", 36), ("coulomb", 6, "1e-3", 10),
                                                ("payoff", 7, "1e-2", 9)])
    def test_counts(self, capsys, target, n, tol, S):
        code, d = run_json(capsys, "segment", "--target", target, "--n", str(n), "--tol", tol)
        assert code == 0 and d["summary"]["S"] == S
        assert d["tool"] == "piecewise-oracle" and d["version"] == __version__
        assert d["params"]["seed"] == 0 and d["params"]["n"] == n

    def test_constant_input(self, capsys, tmp_path):
        path = tmp_path / "const.json"
        path.write_text(json.dumps([0.25] * 16))
        code, d = run_json(capsys, "segment", "--input", str(path), "--tol", "1e-6")
        assert code == 0 and d["summary"]["S"] == 1

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "segment", "--target", "coulomb", "--format", "csv")
        lines = out.strip().splitlines()
        assert code == 0 and lines[0] == "x,f,approx,error" and len(lines) == 65

    def test_zones_and_shaded(self, capsys):
        _, uni = run_json(capsys, "segment", "--target", "double_well")
        _, zon = run_json(capsys, "segment", "--target", "double_well", "--shaded-tol", "0.1")
        assert zon["summary"]["S"] < uni["summary"]["S"]
        code, d = run_json(capsys, "segment", "--target", "coulomb", "--zones", "0:31:1e-3,32:63:1e-2")
        assert code == 0 and d["summary"]["S"] >= 1

    def test_bytes_identical(self, capsys):
        a = run(capsys, "segment", "--target", "coulomb")[1]
        b = run(capsys, "segment", "--target", "coulomb")[1]
        assert a == b

    def test_errors(self, capsys):
        assert run(capsys, "segment")[0] == 2
        assert run(capsys, "segment", "--input", "/nonexistent.json")[0] == 2
        code, _, err = run(capsys, "segment", "--target", "coulomb", "--zones", "bad")
        assert code == 2 and "lo:hi:delta" in err


class TestBuildVerify:
    def test_build_width(self, capsys, tmp_path):
        out = tmp_path / "c.json"
        code, _, err = run(capsys, "build", "--random", "3", "4", "--summary", "-o", str(out))
        assert code == 0 and "width=20" in err
        assert Circuit.loads(out.read_text()).width == 20

    def test_amplitude_adds_gates(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run(capsys, "build", "--random", "3", "4", "-o", str(a))
        run(capsys, "build", "--random", "3", "4", "--variant", "amplitude", "-o", str(b))
        ca, cb = Circuit.loads(a.read_text()), Circuit.loads(b.read_text())
        assert len(cb) > len(ca) and cb.metadata["variant"] == "amplitude"

    def test_lower_fanout(self, capsys, tmp_path):
        out = tmp_path / "g.json"
        run(capsys, "build", "--random", "2", "2", "--lower-fanout", "ghz", "-o", str(out))
        c = Circuit.loads(out.read_text())
        assert "ghz" in c.registers
        code, d = run_json(capsys, "verify", "--random", "2", "2", "--circuit", str(out), "--all-branches")
        assert code == 0 and d["report"]["passed"]

    @pytest.mark.parametrize("variant", ["phase", "amplitude"])
    def test_verify_random(self, capsys, variant):
        code, d = run_json(capsys, "verify", "--random", "3", "4", "--variant", variant)
        assert code == 0
        rep = d["report"]
        assert rep["passed"] and rep["max_amplitude_error"] < 1e-9 and rep["max_leakage"] < 1e-9
        if variant == "phase":
            assert rep["max_phase_error"] < 1e-9

    def test_verify_table(self, capsys):
        code, out, _ = run(capsys, "verify", "--target", "coulomb", "--n", "4", "--tol", "1e-2",
                           "--format", "table")
        assert code == 0 and out.startswith("PASS")

    def test_sabotaged_spec(self, capsys, tmp_path):
        spec_path, circ_path = tmp_path / "spec.json", tmp_path / "c.json"
        _, d = run_json(capsys, "segment", "--target", "coulomb", "--n", "4", "--tol", "1e-2")
        spec_path.write_text(json.dumps(d["spec"]))
        assert run(capsys, "build", "--spec", str(spec_path), "-o", str(circ_path))[0] == 0
        spec = d["spec"]
        seg = spec["segments"][-1]
        seg["beta"] += 0.01
        spec_path.write_text(json.dumps(spec))
        code, out, _ = run(capsys, "verify", "--spec", str(spec_path), "--circuit", str(circ_path),
                           "--format", "table")
        assert code == 1 and out.startswith("FAIL")
        assert f"failing x={list(range(seg['lo'], seg['hi'] + 1))}" in out

    def test_width_ceiling(self, capsys, monkeypatch):
        monkeypatch.setenv(MAX_QUBITS_ENV, "10")
        code, _, err = run(capsys, "verify", "--random", "3", "4")
        assert code == 2 and "ceiling" in err

    def test_cost(self, capsys, tmp_path):
        out = tmp_path / "c.json"
        run(capsys, "build", "--random", "3", "4", "-o", str(out))
        code, d = run_json(capsys, "cost", str(out))
        assert code == 0 and d["width"] == 20 and d["t_count"] > 0

    def test_spec_round_trip(self, capsys, tmp_path):
        _, d = run_json(capsys, "segment", "--target", "coulomb")
        assert PiecewiseSpec.from_json(d["spec"]).S == 10


class TestEstimate:
    def test_pricing_column(self, capsys):
        code, d = run_json(capsys, "estimate", "--example", "pricing", "--all-methods")
        cells = [f"{r['t_count_per_round']}/{r['meas_depth_per_round']}" for r in d["reports"]]
        assert code == 0 and cells == ["16536/32", "31633/17", "5618/62", "8061/17"]

    def test_method_table(self, capsys):
        code, out, _ = run(capsys, "estimate", "--table", "--format", "table")
        assert code == 0
        for cell in ("16536/32", "1970/26", "2214/23", "1001/38", "1583/12"):
            assert cell in out

    def test_rus_depth(self, capsys):
        code, d = run_json(capsys, "estimate", "--rus-depth", "--m", "592", "--trials", "20000", "--seed", "7")
        r = d["rus_depth"]
        assert code == 0 and r["m"] == 592 and abs(r["fit_error"]) <= 0.04
        assert abs(r["monte_carlo"]["mean"] - r["exact"]) < 3 * r["monte_carlo"]["stderr"]

    def test_break_even(self, capsys):
        code, d = run_json(capsys, "estimate", "--break-even", "--example", "pricing")
        assert code == 0 and [b["rounds"] for b in d["break_even"]] == [2, 4]

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "p.json"
        cfg.write_text(json.dumps({"S": 10, "n": 6, "r": 500, "eps_circ": 1e-3}))
        code, d = run_json(capsys, "estimate", "--config", str(cfg), "--method", "in_circuit_towers")
        assert code == 0 and d["reports"][0]["t_count_per_round"] == 1001

    def test_missing_params(self, capsys):
        assert run(capsys, "estimate")[0] == 2
