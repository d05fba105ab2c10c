"""Target functions for the three worked examples and a 1D eigensolver.

Grid point ``k`` of an n-qubit register is mapped to ``x = k / 2**n`` for the
payoff and Coulomb targets. The double well has no published data; a
symmetric quartic stands in for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .segmenter import AMPLITUDE, PHASE, DomainError, GridFunction


@dataclass(frozen=True)
class PayoffParams:
    K_T: float = 1.0
    p: float = 5.0
    s: float = 2.0**5


def grid_points(n: int, endpoint: bool = False) -> np.ndarray:
    """``k / 2**n`` for k in the grid, or ``k / (2**n - 1)`` when ``endpoint``."""
    k = np.arange(2**n, dtype=float)
    return k / (2**n - 1 if endpoint else 2**n)


def payoff_function(params: PayoffParams = PayoffParams(), n: int = 15, *,
                    endpoint: bool = False, clip: bool = False) -> GridFunction:
    """``sqrt(1 - (K_T - exp(x 2^p) exp(-s)))`` on the grid.

    A negative radicand raises :class:`DomainError` unless ``clip`` is set,
    in which case it is clamped to zero.
    """
    x = grid_points(n, endpoint)
    radicand = 1.0 - (params.K_T - np.exp(x * 2.0**params.p) * np.exp(-params.s))
    if np.any(radicand < 0):
        if not clip:
            bad = np.flatnonzero(radicand < 0)
            raise DomainError(f"negative radicand at grid points {bad[:10].tolist()}...")
        radicand = np.maximum(radicand, 0.0)
    return GridFunction(n, np.sqrt(radicand))


def coulomb_function(n: int = 6, *, rescale: bool = True) -> GridFunction:
    """``1/x`` with the singular point replaced by ``2**n * 30 / 16``, scaled to max 1."""
    if n < 1:
        raise DomainError("coulomb target needs n >= 1")
    k = np.arange(2**n, dtype=float)
    v = np.empty_like(k)
    v[1:] = 2.0**n / k[1:]
    v[0] = 2.0**n * 30 / 16
    if rescale:
        v = v / v.max()
    return GridFunction(n, v)


@dataclass(frozen=True)
class PotentialGrid:
    """Dimensionless potential (max 1) on the grid with per-zone tolerance labels.

    ``zones`` is a list of ``(lo, hi, label)`` with label ``"shaded"`` for the
    confining outer region and ``"inner"`` for the region the wavefunction
    lives in. ``length`` and ``depth`` give the physical box length and the
    energy scale used by :func:`ground_state_1d`.
    """

    n: int
    values: np.ndarray
    zones: tuple[tuple[int, int, str], ...]
    length: float = 8.0
    depth: float = 50.0

    @property
    def grid(self) -> GridFunction:
        return GridFunction(self.n, self.values)

    def tolerance_zones(self, inner: float, shaded: float) -> list[tuple[int, int, float]]:
        return [(lo, hi, inner if label == "inner" else shaded) for lo, hi, label in self.zones]

    def with_values(self, values) -> PotentialGrid:
        return PotentialGrid(self.n, np.asarray(values, dtype=float), self.zones, self.length, self.depth)


def double_well_function(n: int = 6, wells: tuple[float, float] = (0.3, 0.7),
                         shaded_fraction: float = 0.15, length: float = 8.0,
                         depth: float = 50.0) -> PotentialGrid:
    """Quartic double well ``(x - c1)^2 (x - c2)^2`` on ``x = k / (2**n - 1)``, max scaled to 1.

    ``wells`` must be symmetric about 1/2 for the grid to be mirror symmetric.
    The outer ``shaded_fraction`` of grid points on each side is labelled
    shaded.
    """
    c1, c2 = wells
    x = grid_points(n, endpoint=True)
    v = (x - c1) ** 2 * (x - c2) ** 2
    v = v / v.max()
    size = 2**n
    edge = int(round(shaded_fraction * size))
    if edge <= 0 or 2 * edge >= size:
        raise DomainError(f"shaded fraction {shaded_fraction} leaves no inner or shaded zone on {size} points")
    zones = ((0, edge - 1, "shaded"), (edge, size - 1 - edge, "inner"), (size - edge, size - 1, "shaded"))
    return PotentialGrid(n, v, zones, length, depth)


def ground_state_1d(potential, count: int = 2, *, length: float | None = None,
                    depth: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Lowest eigenpairs of ``-(1/2) d^2/dx^2 + depth * V`` with Dirichlet walls.

    The N grid values sit at interior points with spacing ``length / (N + 1)``;
    the wavefunction vanishes one spacing beyond each end. Returns ascending
    energies and unit-norm eigenvectors as columns.
    """
    if isinstance(potential, PotentialGrid):
        values = potential.values
        length = potential.length if length is None else length
        depth = potential.depth if depth is None else depth
    else:
        values = np.asarray(potential, dtype=float)
        length = 1.0 if length is None else length
        depth = 1.0 if depth is None else depth
    size = len(values)
    if size < 8:
        raise DomainError("eigensolver needs at least 8 grid points")
    dx = length / (size + 1)
    diag = 1.0 / dx**2 + depth * values
    off = np.full(size - 1, -0.5 / dx**2)
    energies, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, count - 1))
    # fix the sign so that the largest-magnitude component is positive
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] = -vecs[:, j]
    return energies, vecs


def infidelity(g, g_pw) -> float:
    """``1 - |<g|g_pw>|`` for unit vectors on the same grid."""
    g = np.asarray(g)
    g_pw = np.asarray(g_pw)
    if g.shape != g_pw.shape:
        raise DomainError(f"state lengths differ: {g.shape} vs {g_pw.shape}")
    return float(1.0 - abs(np.vdot(g, g_pw)))


@dataclass(frozen=True)
class Example:
    name: str
    S: int
    n: int
    eps_circ: float
    r: float
    tol: float | None = None
    mode: str = PHASE


EXAMPLES = {
    "pricing": Example("pricing", S=36, n=15, eps_circ=1e-3, r=200, tol=1e-3, mode=AMPLITUDE),
    "coulomb": Example("coulomb", S=10, n=6, eps_circ=1e-3, r=500, tol=1e-3, mode=PHASE),
    "qd": Example("qd", S=13, n=6, eps_circ=1e-2, r=5e5, tol=None, mode=PHASE),
}


def target_function(name: str, n: int) -> GridFunction:
    if name == "payoff" or name == "pricing":
        return payoff_function(PayoffParams(), n)
    if name == "coulomb":
        return coulomb_function(n)
    if name in ("double_well", "qd"):
        return double_well_function(n).grid
    raise KeyError(f"unknown target {name!r}")


def default_mode(name: str) -> str:
    return AMPLITUDE if name in ("payoff", "pricing") else PHASE


def box_ground_energy(length: float) -> float:
    return math.pi**2 / (2 * length**2)
