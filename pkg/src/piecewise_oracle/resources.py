"""Closed-form T-count and measurement-depth models for the four rotation methods.

All intermediate quantities stay in double precision; only the reported
per-round T-count and depth are rounded, half away from zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .circuit import CostModel
from .oracle import INDEPENDENT_TOWERS, IN_CIRCUIT_TOWERS, METHODS, SYNTHESIS, SYNTHESIS_INJECTION
from .targets import EXAMPLES

METHOD_LABELS = {
    SYNTHESIS: "Gate synthesis",
    SYNTHESIS_INJECTION: "Gate synthesis with injection",
    IN_CIRCUIT_TOWERS: "In-circuit towers",
    INDEPENDENT_TOWERS: "Independent towers",
}


def round_half_up(x: float) -> int:
    """Round half away from zero."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def rot_t(eps: float) -> float:
    """T-count of one synthesised rotation at accuracy ``eps``: ``1.03 log2(1/eps) + 5.75``."""
    if not 0 < eps < 1:
        raise ValueError(f"rotation accuracy must lie in (0, 1), got {eps}")
    return 1.03 * math.log2(1 / eps) + 5.75


def ceil_log2(x: float) -> int:
    """``ceil(log2 x)``, taken as 0 for ``x <= 1``."""
    return math.ceil(math.log2(x)) if x > 1 else 0


@dataclass(frozen=True)
class CostParams:
    S: int
    n: int
    r: float = 1
    eps_circ: float = 1e-3

    def __post_init__(self):
        if self.S < 1 or self.n < 1 or self.r < 1:
            raise ValueError("S, n and r must be at least 1")
        if not 0 < self.eps_circ < 1:
            raise ValueError("eps_circ must lie in (0, 1)")

    @property
    def l(self) -> int:
        return ceil_log2(self.S)

    @property
    def k(self) -> int:
        return (self.S + 1) * (self.n + 1)

    @property
    def eps(self) -> float:
        return self.eps_circ / self.k

    @property
    def rot_t(self) -> float:
        return rot_t(self.eps)

    @property
    def flag_t_per_round(self) -> float:
        """Two ``l``-controlled Toffolis (flag and its mirror) per copy register."""
        return 8 * self.S * max(self.l - 1, 0)

    @property
    def flag_depth(self) -> int:
        return 2 * ceil_log2(self.l)

    @property
    def injection_depth(self) -> int:
        return math.ceil(math.log2(2.5 * self.k + 1.5))

    def with_r(self, r) -> CostParams:
        return CostParams(self.S, self.n, r, self.eps_circ)

    def to_json(self) -> dict:
        return {**asdict(self), "l": self.l, "k": self.k, "eps": self.eps, "rot_T": self.rot_t}

    @classmethod
    def example(cls, name: str) -> CostParams:
        ex = EXAMPLES[name]
        return cls(ex.S, ex.n, ex.r, ex.eps_circ)


@dataclass
class ResourceReport:
    method: str
    params: CostParams
    t_count_total: float
    depth: float
    terms: dict = field(default_factory=dict)

    @property
    def t_count_per_round_exact(self) -> float:
        return self.t_count_total / self.params.r

    @property
    def t_count_per_round(self) -> int:
        return round_half_up(self.t_count_per_round_exact)

    @property
    def meas_depth_per_round(self) -> int:
        return round_half_up(self.depth)

    @property
    def cell(self) -> str:
        return f"{self.t_count_per_round}/{self.meas_depth_per_round}"

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "params": self.params.to_json(),
            "t_count_total": self.t_count_total,
            "t_count_per_round_exact": self.t_count_per_round_exact,
            "t_count_per_round": self.t_count_per_round,
            "meas_depth_exact": self.depth,
            "meas_depth_per_round": self.meas_depth_per_round,
            "terms": self.terms,
        }


def t_count_total(method: str, p: CostParams) -> float:
    S, n, r, R = p.S, p.n, p.r, p.rot_t
    flags = r * p.flag_t_per_round
    if method == SYNTHESIS:
        return r * p.k * R + flags
    if method == SYNTHESIS_INJECTION:
        return 2 * r * p.k * R + flags
    if method == IN_CIRCUIT_TOWERS:
        return (S + 1) * ((R * (n + 1) + 4 * n) + (r - 1) * (R + 4 * n) + r * R) + flags
    if method == INDEPENDENT_TOWERS:
        return (S + 1) * ((R * (2 * n + 3) + 8 * n + 4) + (r - 1) * (2 * R + 8 * n + 4)) + flags
    raise ValueError(f"unknown method {method!r}")


def independent_t_count_split(p: CostParams) -> float:
    """Independent-tower T-count written as an (n+1)-layer tower term plus a 1-layer term."""
    S, n, r, R = p.S, p.n, p.r, p.rot_t
    big = (S + 1) * ((R * (2 * n + 1) + 8 * n) + (r - 1) * (R + 8 * n))
    small = (S + 1) * ((2 * R + 4) + (r - 1) * (R + 4))
    return big + small + r * p.flag_t_per_round


def meas_depth(method: str, p: CostParams) -> float:
    if method == SYNTHESIS:
        return p.rot_t + p.flag_depth
    if method in (SYNTHESIS_INJECTION, INDEPENDENT_TOWERS):
        return p.injection_depth + p.flag_depth
    if method == IN_CIRCUIT_TOWERS:
        return p.rot_t + 2 * p.n + p.flag_depth
    raise ValueError(f"unknown method {method!r}")


def steady_state_t_per_round(method: str, p: CostParams) -> float:
    """Per-round T-count as ``r -> infinity``."""
    S, n, R = p.S, p.n, p.rot_t
    flags = p.flag_t_per_round
    if method == SYNTHESIS:
        return p.k * R + flags
    if method == SYNTHESIS_INJECTION:
        return 2 * p.k * R + flags
    if method == IN_CIRCUIT_TOWERS:
        return (S + 1) * (R + 4 * n + R) + flags
    if method == INDEPENDENT_TOWERS:
        return (S + 1) * (2 * R + 8 * n + 4) + flags
    raise ValueError(f"unknown method {method!r}")


def estimate(method: str, params: CostParams) -> ResourceReport:
    terms = {
        "rot_T": params.rot_t, "l": params.l, "k": params.k, "eps": params.eps,
        "flag_t_per_round": params.flag_t_per_round, "flag_depth": params.flag_depth,
        "steady_state_t_per_round": steady_state_t_per_round(method, params),
    }
    if method in (SYNTHESIS_INJECTION, INDEPENDENT_TOWERS):
        terms["injection_depth"] = params.injection_depth
    return ResourceReport(method, params, t_count_total(method, params), meas_depth(method, params), terms)


def estimate_all(params: CostParams) -> list[ResourceReport]:
    return [estimate(m, params) for m in METHODS]


def method_table(examples=("pricing", "coulomb", "qd")) -> dict[str, dict[str, ResourceReport]]:
    """``{method: {example: report}}`` for the built-in examples."""
    return {m: {e: estimate(m, CostParams.example(e)) for e in examples} for m in METHODS}


def format_table(table: dict[str, dict[str, ResourceReport]]) -> str:
    examples = list(next(iter(table.values())).keys())
    width = max(len(v) for v in METHOD_LABELS.values())
    lines = [f"{'':<{width}}  " + "  ".join(f"{e:>12}" for e in examples)]
    for m, row in table.items():
        lines.append(f"{METHOD_LABELS[m]:<{width}}  " + "  ".join(f"{row[e].cell:>12}" for e in examples))
    return "\n".join(lines)


def table_json(table) -> str:
    return json.dumps({m: {e: rep.to_json() for e, rep in row.items()} for m, row in table.items()}, indent=2)


def oracle_cost_model(method: str, params: CostParams) -> CostModel:
    """Per-gate costs for analysing a built oracle circuit under ``method``."""
    R = params.rot_t
    if method in (SYNTHESIS, IN_CIRCUIT_TOWERS):
        return CostModel.for_rot_t(R)
    if method in (SYNTHESIS_INJECTION, INDEPENDENT_TOWERS):
        # two resource states per rotation on average, injected in parallel
        return CostModel(
            rotation_depth={"injection": params.injection_depth, "synthesis": R, "bootstrap": 0.0},
            rotation_t={"injection": 2 * R, "synthesis": R, "bootstrap": 0.0},
        )
    raise ValueError(f"unknown method {method!r}")


# --- break-even -----------------------------------------------------------------

@dataclass(frozen=True)
class BreakEven:
    method: str
    threshold: float | None

    @property
    def rounds(self) -> int | None:
        """Smallest integer ``r`` strictly above the threshold; ``None`` means never."""
        if self.threshold is None:
            return None
        return math.floor(self.threshold) + 1

    def to_json(self) -> dict:
        return {"method": self.method, "threshold": self.threshold, "rounds": self.rounds}


def break_even_rounds(method: str, n: int, rot_T: float) -> BreakEven:
    """Rounds after which a tower method uses fewer T than plain synthesis."""
    if method in ("in_circuit", IN_CIRCUIT_TOWERS):
        denom = 1 - 1 / n - 4 / rot_T
        method = IN_CIRCUIT_TOWERS
    elif method in ("independent", INDEPENDENT_TOWERS):
        denom = 1 - (n + 2) / (2 * n + 1) - 4 / rot_T
        method = INDEPENDENT_TOWERS
    else:
        raise ValueError(f"break-even is defined for tower methods, not {method!r}")
    return BreakEven(method, 1 / denom if denom > 0 else None)


# --- repeat-until-success depth ------------------------------------------------------

@dataclass
class RusDepthResult:
    m: int
    exact: float
    fit: float
    terms: int
    tail_bound: float
    monte_carlo: tuple[float, float] | None = None

    @property
    def fit_error(self) -> float:
        return abs(self.exact - self.fit)

    @property
    def fit_ceiled(self) -> int:
        return math.ceil(self.fit)

    def to_json(self) -> dict:
        out = {"m": self.m, "exact": self.exact, "fit": self.fit, "fit_ceiled": self.fit_ceiled,
               "fit_error": self.fit_error, "terms": self.terms, "tail_bound": self.tail_bound}
        if self.monte_carlo is not None:
            out["monte_carlo"] = {"mean": self.monte_carlo[0], "stderr": self.monte_carlo[1]}
        return out


def rus_fit(m) -> float:
    return math.log2(2.5 * m + 1.5)


def rus_expected_depth(m: int, truncation_tol: float = 1e-9) -> RusDepthResult:
    """``E[max of m geometric(1/2) depths]`` summed as ``sum_{d>=0} P(D_m > d)``.

    ``P(D_m <= d) = (1 - 2^-d)^m`` is evaluated as ``exp(m log1p(-2^-d))``.
    Summation stops once the tail bound ``m d 2^-d`` is below
    ``truncation_tol`` and the next term no longer changes the sum.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    total = 1.0  # d = 0: P(D_m > 0) = 1
    d = 1
    while True:
        term = -math.expm1(m * math.log1p(-(2.0**-d)))
        total += term
        bound = m * d * 2.0**-d
        if bound < truncation_tol and term <= total * 2**-54:
            break
        d += 1
    return RusDepthResult(m, total, rus_fit(m), d + 1, bound)


def rus_fit_sweep(m_max: int = 10**6, points: int = 2000) -> tuple[float, int]:
    """Largest ``|E[D_m] - log2(2.5m + 1.5)|`` over all m <= 1000 and a log grid up to ``m_max``."""
    ms = set(range(1, min(1000, m_max) + 1))
    ms.update(int(v) for v in np.unique(np.round(np.logspace(0, math.log10(m_max), points))))
    worst, at = 0.0, 1
    for m in sorted(ms):
        e = rus_expected_depth(m).fit_error
        if e > worst:
            worst, at = e, m
    return worst, at


def rus_depth_monte_carlo(m: int, trials: int, seed=None, chunk: int = 1 << 22) -> tuple[float, float]:
    """Mean and standard error of ``max`` over ``m`` geometric(1/2) attempt counts."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    per = max(1, chunk // m)
    samples = []
    done = 0
    while done < trials:
        k = min(per, trials - done)
        samples.append(rng.geometric(0.5, size=(k, m)).max(axis=1))
        done += k
    depths = np.concatenate(samples).astype(float)
    stderr = depths.std(ddof=1) / math.sqrt(trials) if trials > 1 else float("nan")
    return float(depths.mean()), float(stderr)


# --- QROM interpolation baseline -----------------------------------------------------

def qrom_interpolation_cost(n: int) -> dict:
    """Depth and T-count of computing ``a_i x + b_i`` by lookup and arithmetic.

    ``L = ceil(log2 n)``. Component depths are clamped at zero for the
    smallest registers; the total is the stated ``9L - 4``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    L = math.ceil(math.log2(n))
    return {
        "n": n,
        "log_n": L,
        "add_depth": max(3 * L - 4, 0),
        "add_tcount": 15 * n,
        "qq_add_depth": max(3 * L - 1, 0),
        "qq_add_tcount": 22 * n,
        "mult_depth": 4,
        "total_depth": 9 * L - 4,
    }
