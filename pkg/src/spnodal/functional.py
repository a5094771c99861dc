"""Energy functional J, its derivative, and the V-weighted H^1 gradient.

Discretization: the Dirichlet and F terms are integrated exactly for the
piecewise-linear interpolant (the latter by 4-point Gauss rules, exact
for p = 5); the V and nonlocal terms use the nodal r^2 quadrature of
:mod:`spnodal.grid`. J' is the exact gradient of this discrete J.

Nodal quadrature of F would be cheaper, but it overweights a profile
concentrated on the first element by an order of magnitude, and the
descent then collapses a sign part into a grid-scale spike at the origin.

Positive and negative parts are taken nodewise. On any element whose end
values have strictly opposite signs the Dirichlet and F terms couple the
two parts (see :func:`stiffness_cross`); every identity based on the
split is exact when each sign change sits on a node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grid import (
    FOUR_PI,
    RadialFunction,
    at_gauss,
    gauss_load,
    gauss_weights,
    stiffness_apply,
    stiffness_coefficients,
    stiffness_form,
)
from .models import NonlinearityModel, PotentialModel
from .poisson import potential_values


@dataclass
class EnergyBreakdown:
    norm_sq: float
    nonlocal_term: float
    potential_term: float
    J: float
    slope_plus: float
    slope_minus: float
    slope_full: float

    def to_dict(self) -> dict:
        return {
            "norm_sq": self.norm_sq,
            "nonlocal": self.nonlocal_term,
            "potential_term": self.potential_term,
            "J": self.J,
            "slope_plus": self.slope_plus,
            "slope_minus": self.slope_minus,
            "slope_full": self.slope_full,
        }


def _require_same_grid(u: RadialFunction, v: RadialFunction) -> None:
    if not u.grid.same_as(v.grid):
        raise ValueError("functions live on different grids")


def split_parts(u: RadialFunction) -> tuple[RadialFunction, RadialFunction]:
    """Nodewise positive and negative parts, u = u+ + u- exactly."""
    return (
        RadialFunction(u.grid, np.maximum(u.values, 0.0)),
        RadialFunction(u.grid, np.minimum(u.values, 0.0)),
    )


def norm_sq(u: RadialFunction, V: PotentialModel) -> float:
    """||u||^2 = int |grad u|^2 + V u^2."""
    return inner(u, u, V)


def inner(u: RadialFunction, v: RadialFunction, V: PotentialModel) -> float:
    """V-weighted H^1 inner product  int grad u . grad v + V u v."""
    _require_same_grid(u, v)
    g = u.grid
    mass = float(np.dot(g.weights * V.V(g.nodes), u.values * v.values))
    return FOUR_PI * (stiffness_form(g, u.values, v.values) + mass)


def stiffness_cross(u_plus: RadialFunction, u_minus: RadialFunction) -> float:
    """4 pi int grad u+ . grad u-  (nonzero only on elements straddling a sign change)."""
    return FOUR_PI * stiffness_form(u_plus.grid, u_plus.values, u_minus.values)


def cross_nonlocal(a: RadialFunction, b: RadialFunction) -> float:
    """int phi_b a^2 dx."""
    _require_same_grid(a, b)
    phi_b = potential_values(b.grid, b.values**2)
    return FOUR_PI * float(np.dot(a.grid.weights, phi_b * a.values**2))


def nonlinear_terms(grid, fmodel: NonlinearityModel, x: np.ndarray) -> tuple[float, float]:
    """(int F(u), int f(u) u) over R^3 for the interpolant of nodal values ``x``."""
    W = gauss_weights(grid)
    uq = at_gauss(grid, x)
    return FOUR_PI * float(np.sum(W * fmodel.F(uq))), FOUR_PI * float(np.sum(W * fmodel.f(uq) * uq))


def nonlinear_load(grid, fmodel: NonlinearityModel, x: np.ndarray) -> np.ndarray:
    """Nodal vector int f(u) hat_i r^2 dr (no 4 pi), the gradient of int F(u) r^2 dr."""
    return gauss_load(grid, gauss_weights(grid) * fmodel.f(at_gauss(grid, x)))


def _gradient_vector(u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel):
    """Nodal coefficients b with J'(u)v = 4 pi sum_i b_i v_i, plus the pieces of J."""
    g = u.grid
    x = u.values
    w = g.weights
    Vr = V.V(g.nodes)
    phi = potential_values(g, x * x)
    Ku = stiffness_apply(g, x)
    b = Ku + w * (Vr * x + phi * x) - nonlinear_load(g, fmodel, x)
    nsq = FOUR_PI * (float(np.dot(Ku, x)) + float(np.dot(w * Vr, x * x)))
    nl = FOUR_PI * float(np.dot(w, phi * x * x))
    pt = nonlinear_terms(g, fmodel, x)[0]
    return b, nsq, nl, pt


def energy(u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel) -> EnergyBreakdown:
    b, nsq, nl, pt = _gradient_vector(u, V, fmodel)
    x = u.values
    sp = FOUR_PI * float(np.dot(b, np.maximum(x, 0.0)))
    sm = FOUR_PI * float(np.dot(b, np.minimum(x, 0.0)))
    J = 0.5 * nsq + 0.25 * nl - pt
    return EnergyBreakdown(nsq, nl, pt, J, sp, sm, FOUR_PI * float(np.dot(b, x)))


def energy_value(u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel) -> float:
    g = u.grid
    x = u.values
    w = g.weights
    phi = potential_values(g, x * x)
    quad = stiffness_form(g, x, x) + float(np.dot(w * V.V(g.nodes), x * x))
    return FOUR_PI * (0.5 * quad + 0.25 * float(np.dot(w, phi * x * x))) - nonlinear_terms(g, fmodel, x)[0]


def derivative_action(u: RadialFunction, v: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel) -> float:
    """J'(u)v = int grad u.grad v + V u v + phi_u u v - f(u) v."""
    _require_same_grid(u, v)
    b, *_ = _gradient_vector(u, V, fmodel)
    return FOUR_PI * float(np.dot(b, v.values))


def _h1_banded(grid, V: PotentialModel) -> np.ndarray:
    """Banded (K + diag(w V)) restricted to the free nodes 0..k-1."""
    k = grid.support_index
    c = stiffness_coefficients(grid)[:k]
    diag = grid.weights[:k] * V.V(grid.nodes[:k])
    diag = diag + np.concatenate([c[:1], c[:-1] + c[1:]])
    ab = np.zeros((3, k))
    ab[0, 1:] = -c[: k - 1]
    ab[1] = diag
    ab[2, :-1] = -c[: k - 1]
    return ab


def riesz(u: RadialFunction, b: np.ndarray, V: PotentialModel) -> RadialFunction:
    """Solve <g, v>_H = 4 pi b.v for all v vanishing at R_support."""
    grid = u.grid
    k = grid.support_index
    ab = _h1_banded(grid, V)
    if np.any(ab[1] <= 0):
        raise np.linalg.LinAlgError("H^1 operator not positive: V violates the lower bound")
    out = np.zeros_like(grid.nodes)
    out[:k] = solve_banded((1, 1), ab, b[:k])
    return RadialFunction(grid, out)


def h1_gradient(u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel) -> RadialFunction:
    """Riesz representative of J'(u) in the V-weighted H^1_0(B_R) inner product."""
    b, *_ = _gradient_vector(u, V, fmodel)
    return riesz(u, b, V)


def energy_split_check(u: RadialFunction, V: PotentialModel, fmodel: NonlinearityModel) -> float:
    """Defect of the two splitting identities

        J(u) = J(u+) + J(u-) + 1/2 int phi_{u-} (u+)^2
        J'(u)u+ = J'(u+)u+ + int phi_{u-} (u+)^2

    returned as the larger absolute defect. Exact (to rounding) when no
    grid element straddles a sign change.
    """
    up, um = split_parts(u)
    cross = cross_nonlocal(up, um)
    d_energy = energy_value(u, V, fmodel) - energy_value(up, V, fmodel) - energy_value(um, V, fmodel) - 0.5 * cross
    d_slope = derivative_action(u, up, V, fmodel) - derivative_action(up, up, V, fmodel) - cross
    return max(abs(d_energy), abs(d_slope))
