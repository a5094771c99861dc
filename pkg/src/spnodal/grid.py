"""Radial grids on [0, R_out] and quadrature for 3D radial integrals.

Functions on a grid are treated as continuous piecewise-linear profiles.
Quadrature weights integrate the nodal interpolant exactly against the
measure r^2 dr, so constants (and any P1 function) are integrated exactly.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FOUR_PI = 4.0 * math.pi
MIN_INTERVALS = 16


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes ``0 = r_0 < ... < r_n = R_out`` with r^2-weighted P1 weights.

    ``R_support`` must itself be a node; candidate profiles vanish at and
    beyond it.
    """

    R_support: float
    R_out: float
    nodes: np.ndarray
    weights: np.ndarray = field(init=False, repr=False)
    spacing: np.ndarray = field(init=False, repr=False)
    elem_mass: np.ndarray = field(init=False, repr=False)
    support_index: int = field(init=False)

    def __post_init__(self) -> None:
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or r.size < MIN_INTERVALS + 1:
            raise ValueError(f"need at least {MIN_INTERVALS} intervals")
        if r[0] != 0.0 or not np.all(np.diff(r) > 0.0):
            raise ValueError("nodes must start at 0 and increase strictly")
        if r[-1] != self.R_out:
            raise ValueError("last node must equal R_out")
        hits = np.flatnonzero(r == self.R_support)
        if hits.size != 1:
            raise ValueError("R_support must be a grid node")
        r.setflags(write=False)
        a = r[:-1]
        h = np.diff(r)
        # closed forms in (a, h) avoid cancellation at large radii
        left = h * (a * a / 2.0 + a * h / 3.0 + h * h / 12.0)
        right = h * (a * a / 2.0 + 2.0 * a * h / 3.0 + h * h / 4.0)
        w = np.zeros_like(r)
        w[:-1] += left
        w[1:] += right
        m = h * (a * a + a * h + h * h / 3.0)
        for arr in (w, h, m):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", r)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "elem_mass", m)
        object.__setattr__(self, "support_index", int(hits[0]))

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.nodes.size - 1

    @property
    def h_max(self) -> float:
        return float(self.spacing.max())

    def with_node(self, r: float) -> "RadialGrid":
        """Return a copy of the grid with one extra node inserted at ``r``."""
        if not 0.0 < r < self.R_out:
            raise ValueError("inserted node must lie strictly inside the grid")
        if np.any(self.nodes == r):
            return self
        nodes = np.insert(self.nodes, np.searchsorted(self.nodes, r), r)
        return RadialGrid(self.R_support, self.R_out, nodes)

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.R_support == other.R_support
            and self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
        )


@dataclass(eq=False)
class RadialFunction:
    """Nodal values of a radial profile on ``grid``."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError("values must have one entry per node")
        if not np.all(np.isfinite(v)):
            raise ValueError("radial function values must be finite")
        self.values = v

    @classmethod
    def sample(cls, grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "RadialFunction":
        return cls(grid, np.broadcast_to(fn(grid.nodes), grid.nodes.shape).astype(float))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "RadialFunction":
        return cls(grid, np.zeros_like(grid.nodes))

    def with_values(self, values: np.ndarray) -> "RadialFunction":
        return RadialFunction(self.grid, values)

    def scaled(self, t: float) -> "RadialFunction":
        return RadialFunction(self.grid, t * self.values)

    def is_supported(self) -> bool:
        """True if the profile vanishes beyond R_support."""
        return not np.any(self.values[self.grid.support_index + 1 :])

    def interpolate_to(self, grid: RadialGrid) -> "RadialFunction":
        """Piecewise-linear transfer onto another grid over the same range."""
        return RadialFunction(grid, np.interp(grid.nodes, self.grid.nodes, self.values))


def make_grid(R_support: float, R_out: float | None = None, n: int = 1024) -> RadialGrid:
    """Uniform grid with ``n`` intervals on [0, R_out].

    ``R_out`` defaults to ``R_support``. When ``R_out > R_support`` the
    support radius must fall on a node of the uniform spacing.
    """
    if R_out is None:
        R_out = R_support
    for name, val in (("R_support", R_support), ("R_out", R_out)):
        if not (isinstance(val, numbers.Real) and math.isfinite(val) and val > 0):
            raise ValueError(f"{name} must be a finite positive number, got {val!r}")
    if R_out < R_support:
        raise ValueError("R_out must be >= R_support")
    if int(n) != n or n < MIN_INTERVALS:
        raise ValueError(f"n must be an integer >= {MIN_INTERVALS}, got {n!r}")
    n = int(n)
    nodes = np.linspace(0.0, float(R_out), n + 1)
    if R_out != R_support:
        k = R_support / R_out * n
        if abs(k - round(k)) > 1e-9:
            raise ValueError("R_support must coincide with a uniform grid node")
        nodes[int(round(k))] = float(R_support)
    return RadialGrid(float(R_support), float(R_out), nodes)


def integrate_radial(g: RadialFunction) -> float:
    """4*pi * sum(w_i g_i): the integral over R^3 of a radial function."""
    return FOUR_PI * float(np.dot(g.grid.weights, g.values))


def differentiate(u: RadialFunction) -> RadialFunction:
    """Second-order finite-difference derivative; u'(0) = 0 is enforced."""
    du = np.gradient(u.values, u.grid.nodes, edge_order=2)
    du[0] = 0.0
    return RadialFunction(u.grid, du)


def stiffness_coefficients(grid: RadialGrid) -> np.ndarray:
    """Per-element coefficients c_e = (int_e r^2 dr) / h_e^2 of the P1 Dirichlet form."""
    return grid.elem_mass / grid.spacing**2


def stiffness_apply(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """(K u)_i with K the matrix of  int u' v' r^2 dr  (no 4*pi factor)."""
    c = stiffness_coefficients(grid)
    flux = c * np.diff(u)
    out = np.zeros_like(u)
    out[:-1] -= flux
    out[1:] += flux
    return out


def stiffness_form(grid: RadialGrid, u: np.ndarray, v: np.ndarray) -> float:
    """int u' v' r^2 dr for the piecewise-linear interpolants (no 4*pi factor)."""
    return float(np.dot(stiffness_coefficients(grid), np.diff(u) * np.diff(v)))


GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(4)
GAUSS_NODES = (GAUSS_NODES + 1.0) / 2.0
GAUSS_WEIGHTS = GAUSS_WEIGHTS / 2.0


def gauss_weights(grid: RadialGrid) -> np.ndarray:
    """(n, 4) weights h * omega_q * r_q^2 of 4-point Gauss rules per element.

    Exact for polynomials of degree 7 in r, so for |u|^5 of a one-signed
    piecewise-linear u times r^2.
    """
    a = grid.nodes[:-1, None]
    h = grid.spacing[:, None]
    r = a + h * GAUSS_NODES
    return h * GAUSS_WEIGHTS * r * r


def at_gauss(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolant of nodal values at the Gauss points, shape (n, 4)."""
    return u[:-1, None] * (1.0 - GAUSS_NODES) + u[1:, None] * GAUSS_NODES


def gauss_load(grid: RadialGrid, weighted: np.ndarray) -> np.ndarray:
    """Nodal vector sum_q weighted[e, q] * hat_i(r_q): the transpose of :func:`at_gauss`."""
    out = np.zeros_like(grid.nodes)
    out[:-1] += weighted @ (1.0 - GAUSS_NODES)
    out[1:] += weighted @ GAUSS_NODES
    return out
