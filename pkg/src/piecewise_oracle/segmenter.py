"""Recursive-bisection segmentation of a sampled function into prefix-aligned pieces.

Every accepted interval holds 2^k consecutive grid points sharing the same
n-k most significant bits, so membership in a segment is a single
multi-(anti-)controlled Toffoli on those bits.

In phase mode each piece is a line ``alpha * x + beta``. In amplitude mode
the piece is ``cos(alpha * x + beta)``, fitted in angle space through the
clamped arccos of the samples and checked in function space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PHASE = "phase"
AMPLITUDE = "amplitude"
MODES = (PHASE, AMPLITUDE)

LSTSQ = "lstsq"
MINIMAX = "minimax"
FITS = (LSTSQ, MINIMAX)


class DomainError(ValueError):
    """Input outside the domain an operation is defined on."""


@dataclass(frozen=True)
class GridFunction:
    """Values of a real function on the integer grid 0 .. 2^n - 1."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.n < 0:
            raise DomainError(f"qubit count must be non-negative, got {self.n}")
        if values.shape != (2**self.n,):
            raise DomainError(f"expected {2**self.n} values for n={self.n}, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.flatnonzero(~np.isfinite(values))
            raise DomainError(f"non-finite values at grid points {bad[:10].tolist()}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> GridFunction:
        values = np.asarray(values, dtype=float)
        n = int(round(math.log2(len(values)))) if len(values) else -1
        if n < 0 or 2**n != len(values):
            raise DomainError(f"value count {len(values)} is not a power of two")
        return cls(n, values)

    @classmethod
    def load(cls, path: str | Path) -> GridFunction:
        """Read a JSON array, or a text file with one value per line."""
        text = Path(path).read_text()
        stripped = text.lstrip()
        if stripped.startswith("[") or stripped.startswith("{"):
            data = json.loads(text)
            if isinstance(data, dict):
                data = data["values"]
        else:
            data = [float(tok) for line in text.splitlines() if (tok := line.split("#")[0].strip())]
        return cls.from_values(data)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ToleranceProfile:
    """Either one bound for the whole grid or disjoint zones ``(lo, hi, delta)``."""

    uniform: float | None = None
    zones: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if (self.uniform is None) == (not self.zones):
            raise DomainError("give either a uniform tolerance or a list of zones")
        if self.uniform is not None and not self.uniform > 0:
            raise DomainError(f"tolerance must be positive, got {self.uniform}")
        zones = tuple(sorted((int(lo), int(hi), float(d)) for lo, hi, d in self.zones))
        for lo, hi, d in zones:
            if lo > hi or not d > 0:
                raise DomainError(f"bad zone ({lo}, {hi}, {d})")
        object.__setattr__(self, "zones", zones)

    @classmethod
    def of(cls, tol: float | ToleranceProfile | Iterable[tuple[int, int, float]]) -> ToleranceProfile:
        if isinstance(tol, ToleranceProfile):
            return tol
        if isinstance(tol, (int, float)):
            return cls(uniform=float(tol))
        return cls(zones=tuple(tol))

    def per_point(self, size: int) -> np.ndarray:
        """Tolerance at every grid point; zones must tile ``[0, size - 1]`` exactly."""
        if self.uniform is not None:
            return np.full(size, self.uniform)
        expected = 0
        out = np.empty(size)
        for lo, hi, d in self.zones:
            if lo != expected:
                raise DomainError(f"zones leave a gap or overlap at grid point {expected}")
            out[lo : hi + 1] = d
            expected = hi + 1
        if expected != size:
            raise DomainError(f"zones cover [0, {expected - 1}] but the grid is [0, {size - 1}]")
        return out

    def to_json(self):
        if self.uniform is not None:
            return self.uniform
        return [list(z) for z in self.zones]


@dataclass(frozen=True)
class Segment:
    lo: int
    hi: int
    alpha: float
    beta: float
    prefix: tuple[int, ...]
    max_dev: float

    def contains(self, x: int) -> bool:
        return self.lo <= x <= self.hi

    def angle(self, x):
        return self.alpha * np.asarray(x, dtype=float) + self.beta

    def to_json(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "alpha": self.alpha,
            "beta": self.beta,
            "prefix": list(self.prefix),
            "max_dev": self.max_dev,
        }

    @classmethod
    def from_json(cls, d: dict) -> Segment:
        return cls(int(d["lo"]), int(d["hi"]), float(d["alpha"]), float(d["beta"]),
                   tuple(int(b) for b in d["prefix"]), float(d["max_dev"]))


@dataclass(frozen=True)
class PiecewiseSpec:
    """Segmentation result: ordered, contiguous segments covering the grid."""

    n: int
    segments: tuple[Segment, ...]
    mode: str = PHASE
    tolerance: object = None
    fit: str = LSTSQ
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}")
        if not self.segments:
            raise DomainError("a piecewise spec needs at least one segment")
        expected = 0
        for seg in self.segments:
            if seg.lo != expected or seg.hi < seg.lo:
                raise DomainError(f"segments are not contiguous at grid point {expected}")
            if len(seg.prefix) > self.n:
                raise DomainError(f"prefix {seg.prefix} longer than n={self.n}")
            expected = seg.hi + 1
        if expected != 2**self.n:
            raise DomainError(f"segments cover [0, {expected - 1}], grid is [0, {2**self.n - 1}]")

    @property
    def S(self) -> int:
        return len(self.segments)

    @property
    def l(self) -> int:
        return math.ceil(math.log2(self.S)) if self.S > 1 else 0

    @property
    def phi(self) -> float:
        return (2**self.n - 1) / 2

    @property
    def gamma(self) -> list[float]:
        return [s.alpha * self.phi + s.beta for s in self.segments]

    def segment_index(self, x) -> np.ndarray:
        his = np.array([s.hi for s in self.segments])
        return np.searchsorted(his, np.asarray(x), side="left")

    def angles(self, x=None) -> np.ndarray:
        """f~(x) = alpha_j x + beta_j for the segment j containing x (the phase or rotation angle)."""
        x = np.arange(2**self.n) if x is None else np.asarray(x)
        j = self.segment_index(x)
        alpha = np.array([s.alpha for s in self.segments])[j]
        beta = np.array([s.beta for s in self.segments])[j]
        return alpha * x + beta

    def approx(self, x=None) -> np.ndarray:
        """The approximating function in the segmented function's own space."""
        a = self.angles(x)
        return np.cos(a) if self.mode == AMPLITUDE else a

    def to_json(self) -> dict:
        out = {"n": self.n, "mode": self.mode, "fit": self.fit, "tolerance": self.tolerance,
               "S": self.S, "l": self.l,
               "segments": [s.to_json() for s in self.segments]}
        return out

    @classmethod
    def from_json(cls, d: dict) -> PiecewiseSpec:
        return cls(int(d["n"]), tuple(Segment.from_json(s) for s in d["segments"]),
                   d.get("mode", PHASE), d.get("tolerance"), d.get("fit", LSTSQ))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def load(cls, path: str | Path) -> PiecewiseSpec:
        return cls.from_json(json.loads(Path(path).read_text()))


# --- line fits ---------------------------------------------------------------

def _as_points(points) -> tuple[np.ndarray, np.ndarray]:
    pts = list(points)
    if not pts:
        raise DomainError("cannot fit an empty point set")
    xs = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts], dtype=float)
    if len(np.unique(xs)) != len(xs):
        raise DomainError("x values must be distinct")
    return xs, ys


def _half_hull(xs, ys, upper: bool) -> list[int]:
    # monotone chain over x-sorted points
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            cross = (xs[k] - xs[j]) * (ys[i] - ys[j]) - (ys[k] - ys[j]) * (xs[i] - xs[j])
            if (cross >= 0) if upper else (cross <= 0):
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _lines_fit(xs: np.ndarray, ys: np.ndarray, fit: str) -> tuple[float, float]:
    """Return (intercept, slope) for sorted, distinct xs."""
    if len(xs) == 1:
        return float(ys[0]), 0.0
    if fit == LSTSQ:
        xm, ym = xs.mean(), ys.mean()
        dx = xs - xm
        slope = float(np.dot(dx, ys - ym) / np.dot(dx, dx))
        return float(ym - slope * xm), slope
    if fit == MINIMAX:
        slopes = set()
        for upper in (True, False):
            h = _half_hull(xs, ys, upper)
            for i, j in zip(h, h[1:]):
                slopes.add((ys[j] - ys[i]) / (xs[j] - xs[i]))
        cand = np.array(sorted(slopes))

        def width(b):
            r = ys - b * xs
            return r.max() - r.min()

        # width(b) is convex and piecewise linear with kinks at hull edge slopes
        lo, hi = 0, len(cand) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if width(cand[mid]) <= width(cand[mid + 1]):
                hi = mid
            else:
                lo = mid + 1
        slope = float(cand[lo])
        r = ys - slope * xs
        return float((r.max() + r.min()) / 2), slope
    raise DomainError(f"unknown fit {fit!r}")


def minimax_linear_fit(points) -> tuple[float, float, float]:
    """Chebyshev line through ``(x, y)`` points.

    Returns ``(A, B, max_dev)`` with ``A + B x`` minimizing the largest
    absolute residual over the points.
    """
    xs, ys = _as_points(points)
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    a, b = _lines_fit(xs, ys, MINIMAX)
    return a, b, float(np.max(np.abs(ys - (a + b * xs))))


def least_squares_linear_fit(points) -> tuple[float, float, float]:
    xs, ys = _as_points(points)
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    a, b = _lines_fit(xs, ys, LSTSQ)
    return a, b, float(np.max(np.abs(ys - (a + b * xs))))


# --- segmentation ------------------------------------------------------------

def _fit_interval(xs, ys, mode, fit):
    if mode == PHASE:
        a, b = _lines_fit(xs, ys, fit)
        dev = np.abs(ys - (a + b * xs))
    else:
        theta = np.arccos(np.clip(ys, -1.0, 1.0))
        a, b = _lines_fit(xs, theta, fit)
        dev = np.abs(ys - np.cos(a + b * xs))
    return a, b, dev


def segment_function(f: GridFunction, tol, mode: str = PHASE, fit: str = LSTSQ) -> PiecewiseSpec:
    """Bisect the grid until every interval's fit satisfies its tolerance.

    ``tol`` is a float, a :class:`ToleranceProfile`, or a list of
    ``(lo, hi, delta)`` zones. An interval is kept iff every point x in it
    has ``|f(x) - fit(x)| <= delta(x)``. ``fit`` selects the line-fit
    criterion: ``"lstsq"`` (default) or ``"minimax"``.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    if fit not in FITS:
        raise DomainError(f"unknown fit {fit!r}")
    profile = ToleranceProfile.of(tol)
    deltas = profile.per_point(len(f))
    ys_all = f.values
    if mode == AMPLITUDE and (ys_all.min() < -1 or ys_all.max() > 1):
        raise DomainError("amplitude mode needs all values in [-1, 1]")
    xs_all = np.arange(len(f), dtype=float)

    segments: list[Segment] = []
    # explicit stack keeps left-to-right order without deep recursion
    stack = [(0, len(f) - 1, ())]
    while stack:
        lo, hi, prefix = stack.pop()
        xs, ys = xs_all[lo : hi + 1], ys_all[lo : hi + 1]
        a, b, dev = _fit_interval(xs, ys, mode, fit)
        if lo == hi or np.all(dev <= deltas[lo : hi + 1]):
            segments.append(Segment(lo, hi, b, a, prefix, float(dev.max())))
            continue
        mid = (lo + hi + 1) // 2
        stack.append((mid, hi, prefix + (1,)))
        stack.append((lo, mid - 1, prefix + (0,)))
    return PiecewiseSpec(f.n, tuple(segments), mode, profile.to_json(), fit)


def sweep_tolerance(f: GridFunction, tolerances: Sequence[float], mode: str = PHASE,
                    fit: str = LSTSQ) -> list[tuple[float, int]]:
    tols = [float(t) for t in tolerances]
    if any(t <= 0 for t in tols):
        raise DomainError("tolerances must be positive")
    if tols != sorted(tols, reverse=True):
        raise DomainError("tolerances must be sorted in descending order")
    return [(t, segment_function(f, t, mode, fit).S) for t in tols]


def prefix_of(x: int, n: int, length: int) -> tuple[int, ...]:
    """The ``length`` most significant bits of ``x`` as an n-bit word, MSB first."""
    return tuple((x >> (n - 1 - k)) & 1 for k in range(length))


def approximation_table(f: GridFunction, spec: PiecewiseSpec) -> list[tuple[int, float, float, float]]:
    """Rows ``(x, f(x), approx(x), error(x))`` for plotting."""
    approx = spec.approx()
    return [(x, float(v), float(a), float(v - a)) for x, (v, a) in enumerate(zip(f.values, approx))]


def random_spec(n: int, S: int, rng=None, mode: str = PHASE, scale: float = 1.0) -> PiecewiseSpec:
    """A random prefix-aligned partition into ``S`` pieces with random lines.

    Leaves are split at random until there are ``S`` of them; slopes and
    intercepts are uniform in ``[-scale, scale]``.
    """
    if not 1 <= S <= 2**n:
        raise DomainError(f"cannot cut 2^{n} points into {S} prefix-aligned pieces")
    rng = np.random.default_rng(rng)
    leaves = [(0, 2**n - 1, ())]
    while len(leaves) < S:
        splittable = [i for i, (lo, hi, _) in enumerate(leaves) if hi > lo]
        i = splittable[rng.integers(len(splittable))]
        lo, hi, prefix = leaves.pop(i)
        mid = (lo + hi + 1) // 2
        leaves[i:i] = [(lo, mid - 1, prefix + (0,)), (mid, hi, prefix + (1,))]
    segs = tuple(Segment(lo, hi, float(rng.uniform(-scale, scale)), float(rng.uniform(-scale, scale)), p, 0.0)
                 for lo, hi, p in leaves)
    return PiecewiseSpec(n, segs, mode)
