"""Nonlocal term: the decaying solution of -Laplace(phi) = u^2 in R^3.

For radial u supported in B_R the Newton potential reduces to

    phi(r) = (1/r) int_0^r s^2 rho(s) ds + int_r^R s rho(s) ds,   rho = u^2.

The density is taken piecewise linear between nodes; its potential Phi is
then piecewise rational and is integrated exactly against each hat
function. Nodal values are the hat averages

    phi_i = int hat_i r^2 Phi dr / int hat_i r^2 dr,

so  sum_i w_i sigma_i phi_i[rho]  is the exact continuum pairing of the two
interpolated densities: symmetric in (rho, sigma) and second order at every
node, the origin included. The last node carries the exact exterior value
M/R_out instead; candidates vanish there, so the pairing is unaffected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grid import FOUR_PI, RadialFunction, RadialGrid


@dataclass
class PoissonSolution:
    phi: RadialFunction
    total_mass: float
    dirichlet_energy: float


def _check_support(u: RadialFunction) -> None:
    if not u.is_supported():
        raise ValueError("u has nonzero values beyond R_support")


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)
_GAUSS_X = (_GAUSS_X + 1.0) / 2.0
_GAUSS_W = _GAUSS_W / 2.0


def _element_profile(grid: RadialGrid, rho: np.ndarray):
    """Enclosed mass m and outer integral T at 4 Gauss points per element."""
    a = grid.nodes[:-1, None]
    h = grid.spacing[:, None]
    ra = rho[:-1, None]
    beta = (rho[1:, None] - ra) / h

    # polynomials in the offset y = s - a, stable for large a
    def m_inc(y):
        return a * a * ra * y + (2 * a * ra + a * a * beta) * y**2 / 2 + (ra + 2 * a * beta) * y**3 / 3 + beta * y**4 / 4

    def t_inc(y):
        return a * ra * y + (ra + a * beta) * y**2 / 2 + beta * y**3 / 3

    m_elem = m_inc(h)[:, 0]
    t_elem = t_inc(h)[:, 0]
    m_left = np.concatenate([[0.0], np.cumsum(m_elem)[:-1]])
    t_right = np.concatenate([np.cumsum(t_elem[::-1])[::-1][1:], [0.0]])
    y = h * _GAUSS_X
    x = a + y
    m = m_left[:, None] + m_inc(y)
    t = t_right[:, None] + (t_elem[:, None] - t_inc(y))
    return x, m, t, float(m_elem.sum())


def potential_values(grid: RadialGrid, rho: np.ndarray) -> np.ndarray:
    """Nodal Newton potential of the density ``rho`` (= u^2), O(n)."""
    x, m, t, mass = _element_profile(grid, rho)
    integrand = (m * x + t * x * x) * (grid.spacing[:, None] * _GAUSS_W)
    acc = np.zeros_like(grid.nodes)
    acc[:-1] += integrand @ (1.0 - _GAUSS_X)
    acc[1:] += integrand @ _GAUSS_X
    phi = acc / grid.weights
    # one-sided hat at R_out biases the average to O(h); use the exact M/r
    phi[-1] = mass / grid.R_out
    return phi


def newton_potential(u: RadialFunction) -> PoissonSolution:
    _check_support(u)
    grid = u.grid
    rho = u.values**2
    phi = potential_values(grid, rho)
    x, m, _, mass = _element_profile(grid, rho)
    # |grad phi| = m(r)/r^2; exact exterior tail beyond R_out
    inside = float(np.sum((m / x) ** 2 * (grid.spacing[:, None] * _GAUSS_W)))
    energy = FOUR_PI * (inside + mass**2 / grid.R_out)
    return PoissonSolution(RadialFunction(grid, phi), mass, float(energy))


def nonlocal_energy(u: RadialFunction) -> float:
    """int phi_u u^2 dx  (>= 0, quartic in u)."""
    _check_support(u)
    rho = u.values**2
    phi = potential_values(u.grid, rho)
    return FOUR_PI * float(np.dot(u.grid.weights, phi * rho))


def poisson_bvp_oracle(u: RadialFunction) -> RadialFunction:
    """Finite-difference solve of -(phi'' + 2 phi'/r) = u^2 on (0, R_support].

    phi'(0) = 0 and the Robin condition phi'(R) + phi(R)/R = 0 (exterior M/r
    decay). Beyond R_support the exterior closed form is used. Independent of
    :func:`newton_potential`; intended for verification only.
    """
    _check_support(u)
    grid = u.grid
    k = grid.support_index
    r = grid.nodes[: k + 1]
    g = u.values[: k + 1] ** 2
    h = np.diff(r)
    R = r[-1]

    hl = np.empty(k + 1)
    hr = np.empty(k + 1)
    hl[1:] = h
    hr[:-1] = h
    hr[-1] = h[-1]
    hl[0] = h[0]
    r_minus = r - hl / 2.0
    r_plus = r + hr / 2.0
    vol = (r_plus**3 - r_minus**3) / 3.0

    lower = np.zeros(k + 1)
    diag = np.zeros(k + 1)
    upper = np.zeros(k + 1)
    rhs = g * vol

    # interior flux-form stencil
    cl = r_minus**2 / hl
    cr = r_plus**2 / hr
    diag[1:] = cl[1:] + cr[1:]
    lower[1:] = -cl[1:]
    upper[:-1] = -cr[:-1]

    # origin: Laplacian -> 3 phi'', phi'' ~ 2 (phi_1 - phi_0)/h^2
    diag[0] = 6.0 / h[0] ** 2
    upper[0] = -6.0 / h[0] ** 2
    rhs[0] = g[0]

    # ghost node phi_{k+1} = phi_{k-1} - 2 h phi_k / R folded into row k
    diag[-1] += cr[-1] * 2.0 * hr[-1] / R
    lower[-1] -= cr[-1]

    ab = np.zeros((3, k + 1))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    phi_in = solve_banded((1, 1), ab, rhs)

    phi = np.empty_like(grid.nodes)
    phi[: k + 1] = phi_in
    phi[k + 1 :] = phi_in[-1] * R / grid.nodes[k + 1 :]
    return RadialFunction(grid, phi)
