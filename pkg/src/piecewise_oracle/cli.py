"""Command-line entry point: segment, build, verify, estimate."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import Circuit, measurement_depth, t_count, validate
from .oracle import (FANOUT_CNOT, FANOUT_GHZ, METHODS, VARIANTS, OracleConfig, build_oracle,
                     verify_oracle)
from .resources import (METHODS as EST_METHODS, CostParams, break_even_rounds, estimate,
                        format_table, oracle_cost_model, rus_depth_monte_carlo, rus_expected_depth,
                        method_table)
from .segmenter import (FITS, LSTSQ, MODES, DomainError, GridFunction, PiecewiseSpec,
                        approximation_table, random_spec, segment_function)
from .simulator import SimulationError
from .targets import EXAMPLES, default_mode, double_well_function, target_function

TARGETS = ("payoff", "pricing", "coulomb", "double_well", "qd")


class CliError(Exception):
    pass


def _envelope(command: str, params: dict, **body) -> dict:
    return {"tool": "piecewise-oracle", "version": __version__, "command": command, "params": params, **body}


def _emit(obj, path: str | None):
    text = obj if isinstance(obj, str) else json.dumps(obj, indent=2, sort_keys=False)
    if path:
        Path(path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _parse_zones(text: str) -> list[tuple[int, int, float]]:
    zones = []
    for part in text.split(","):
        try:
            lo, hi, d = part.split(":")
            zones.append((int(lo), int(hi), float(d)))
        except ValueError:
            raise CliError(f"bad zone {part!r}; expected lo:hi:delta") from None
    return zones


def _load_function(args) -> GridFunction:
    if args.input:
        return GridFunction.load(args.input)
    if args.target:
        return target_function(args.target, args.n)
    raise CliError("give --target or --input")


def _tolerance(args, f: GridFunction):
    if args.zones:
        return _parse_zones(args.zones)
    if args.target in ("double_well", "qd") and args.shaded_tol is not None:
        return double_well_function(f.n).tolerance_zones(args.tol, args.shaded_tol)
    return args.tol


def _spec_from_args(args) -> PiecewiseSpec:
    if getattr(args, "spec", None):
        return PiecewiseSpec.load(args.spec)
    if getattr(args, "random", None):
        n, S = args.random
        return random_spec(n, S, np.random.default_rng(args.seed))
    f = _load_function(args)
    mode = args.mode or (default_mode(args.target) if args.target else "phase")
    return segment_function(f, _tolerance(args, f), mode=mode, fit=args.fit)


# --- subcommands --------------------------------------------------------------

def cmd_segment(args) -> int:
    f = _load_function(args)
    mode = args.mode or (default_mode(args.target) if args.target else "phase")
    tol = _tolerance(args, f)
    spec = segment_function(f, tol, mode=mode, fit=args.fit)
    params = {"target": args.target, "input": args.input, "n": f.n, "tol": args.tol,
              "zones": args.zones, "mode": mode, "fit": args.fit, "seed": args.seed}
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["x", "f", "approx", "error"])
        w.writerows(approximation_table(f, spec))
        _emit(buf.getvalue().rstrip("\n"), args.output)
        return 0
    summary = {"S": spec.S, "l": spec.l, "max_dev": max(s.max_dev for s in spec.segments)}
    if args.format == "table":
        _emit(f"S={spec.S} l={spec.l} max_dev={summary['max_dev']:.3e}", args.output)
        return 0
    _emit(_envelope("segment", params, summary=summary, spec=spec.to_json()), args.output)
    return 0


def _config(args) -> OracleConfig:
    lowering = FANOUT_GHZ if args.lower_fanout == "ghz" else FANOUT_CNOT
    return OracleConfig(args.variant, args.method, lowering, args.seed)


def cmd_build(args) -> int:
    spec = _spec_from_args(args)
    circuit = build_oracle(spec, _config(args))
    errors = validate(circuit)
    if errors:
        raise CliError("built circuit is invalid: " + "; ".join(errors[:5]))
    _emit(circuit.dumps(), args.output)
    if args.summary:
        sys.stderr.write(f"width={circuit.width} gates={len(circuit)}\n")
    return 0


def cmd_verify(args) -> int:
    spec = _spec_from_args(args)
    circuit = Circuit.loads(Path(args.circuit).read_text()) if args.circuit else build_oracle(spec, _config(args))
    report = verify_oracle(circuit, spec, tol=args.check_tol, all_branches=args.all_branches, seed=args.seed)
    out = _envelope("verify", {"n": spec.n, "S": spec.S, "variant": circuit.metadata.get("variant"),
                               "method": circuit.metadata.get("rotation_method"), "tol": args.check_tol,
                               "seed": args.seed, "all_branches": args.all_branches},
                    width=circuit.width, report=report.to_json())
    if args.format == "table":
        status = "PASS" if report.passed else "FAIL"
        line = (f"{status} width={circuit.width} max_amp_err={report.max_amplitude_error:.3e} "
                f"max_phase_err={report.max_phase_error:.3e} leakage={report.max_leakage:.3e}")
        if report.failures:
            line += f" failing x={report.failures}"
        _emit(line, args.output)
    else:
        _emit(out, args.output)
    return 0 if report.passed else 1


def _cost_params(args) -> CostParams:
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        return CostParams(int(cfg["S"]), int(cfg["n"]), float(cfg.get("r", 1)), float(cfg.get("eps_circ", 1e-3)))
    if args.example:
        p = CostParams.example(args.example)
    elif args.S and args.n:
        p = CostParams(args.S, args.n)
    else:
        raise CliError("give --example, --config, or --S and --n")
    return CostParams(args.S or p.S, args.n or p.n, args.r or p.r, args.eps or p.eps_circ)


def cmd_estimate(args) -> int:
    if args.rus_depth:
        res = rus_expected_depth(args.m)
        if args.trials:
            res.monte_carlo = rus_depth_monte_carlo(args.m, args.trials, args.seed)
        body = res.to_json()
        if args.format == "table":
            line = f"m={res.m} exact={res.exact:.6f} fit={res.fit:.6f} |diff|={res.fit_error:.4f}"
            if res.monte_carlo:
                line += f" mc={res.monte_carlo[0]:.4f}+-{res.monte_carlo[1]:.4f}"
            _emit(line, args.output)
        else:
            _emit(_envelope("estimate", {"m": args.m, "trials": args.trials, "seed": args.seed},
                            rus_depth=body), args.output)
        return 0
    if args.table:
        t = method_table()
        if args.format == "table":
            _emit(format_table(t), args.output)
        else:
            _emit(_envelope("estimate", {"table": True},
                            table={m: {e: r.to_json() for e, r in row.items()} for m, row in t.items()}),
                  args.output)
        return 0
    p = _cost_params(args)
    if args.break_even:
        res = [break_even_rounds(m, p.n, p.rot_t) for m in ("in_circuit", "independent")]
        if args.format == "table":
            _emit("\n".join(f"{b.method}: {b.rounds if b.rounds else 'never'} (threshold {b.threshold})"
                            for b in res), args.output)
        else:
            _emit(_envelope("estimate", p.to_json(), break_even=[b.to_json() for b in res]), args.output)
        return 0
    methods = EST_METHODS if args.all_methods or not args.method else [args.method]
    reports = [estimate(m, p) for m in methods]
    if args.format == "table":
        label = args.example or "params"
        _emit(format_table({r.method: {label: r} for r in reports}), args.output)
    else:
        _emit(_envelope("estimate", p.to_json(), reports=[r.to_json() for r in reports]), args.output)
    return 0


def cmd_cost(args) -> int:
    """Circuit-level T-count and depth of a built circuit."""
    circuit = Circuit.loads(Path(args.circuit).read_text())
    p = CostParams(max(circuit.metadata.get("S", 1), 1), max(circuit.metadata.get("n", 1), 1), 1, args.eps)
    method = circuit.metadata.get("rotation_method", "synthesis")
    model = oracle_cost_model(method, p)
    _emit(_envelope("cost", {"circuit": args.circuit, "eps_circ": args.eps, "method": method},
                    width=circuit.width, t_count=t_count(circuit, model),
                    measurement_depth=measurement_depth(circuit, model)), args.output)
    return 0


# --- parser -----------------------------------------------------------------------

def _add_source(p, need_function=True):
    p.add_argument("--target", choices=TARGETS)
    p.add_argument("--input", help="grid function: JSON array or one value per line")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--zones", help="zoned tolerance lo:hi:delta,...")
    p.add_argument("--shaded-tol", type=float, default=None, help="double well: tolerance in the shaded zones")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--fit", choices=FITS, default=LSTSQ)
    if not need_function:
        p.add_argument("--spec", help="PiecewiseSpec JSON")
        p.add_argument("--random", type=int, nargs=2, metavar=("N", "S"), help="random spec")


def _add_oracle(p):
    p.add_argument("--variant", choices=VARIANTS, default="phase")
    p.add_argument("--method", choices=METHODS, default="synthesis")
    p.add_argument("--lower-fanout", choices=("none", "ghz"), default="none")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="piecewise-oracle", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a grid function")
    _add_source(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv", "table"), default="json")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("build", help="build the oracle circuit")
    _add_source(p, need_function=False)
    _add_oracle(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--summary", action="store_true")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="simulate every basis input against f~")
    _add_source(p, need_function=False)
    _add_oracle(p)
    p.add_argument("--circuit", help="circuit JSON to verify instead of building one")
    p.add_argument("--all-branches", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--output", "-o")
    p.add_argument("--check-tol", type=float, default=1e-9, help="amplitude tolerance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate", help="closed-form resource estimates")
    p.add_argument("--example", choices=sorted(EXAMPLES))
    p.add_argument("--config", help="JSON with S, n, r, eps_circ")
    p.add_argument("--S", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--method", choices=EST_METHODS)
    p.add_argument("--all-methods", action="store_true")
    p.add_argument("--table", action="store_true", help="all methods for all built-in examples")
    p.add_argument("--break-even", action="store_true")
    p.add_argument("--rus-depth", action="store_true")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials for --rus-depth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("cost", help="T-count and depth of a built circuit")
    p.add_argument("circuit")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_cost)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DomainError, SimulationError, ValueError, OSError, KeyError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
