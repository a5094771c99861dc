import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spnodal.functional import (
    cross_nonlocal,
    derivative_action,
    energy,
    energy_split_check,
    energy_value,
    h1_gradient,
    inner,
    norm_sq,
    split_parts,
)
from spnodal.grid import RadialFunction, make_grid
from spnodal.models import NonlinearityModel, constant_potential, default_potential

F5 = NonlinearityModel(5)
V = default_potential()


def _profile(grid, coef):
    r = grid.nodes / grid.R_support
    vals = np.polynomial.polynomial.polyval(r, coef) * (1 - r)
    return RadialFunction(grid, np.where(r <= 1, vals, 0.0))


def _aligned(n=128, R=2.0, node=0.75):
    # sign change exactly on a node: (node - r)(R - r) changes sign at r = node
    g = make_grid(R, n=n)
    r = g.nodes
    return RadialFunction(g, 3.0 * (node - r) * (R - r) * np.exp(-r))


def test_constant_one_on_unit_ball():
    # ||u||^2 = 4pi/3, int F = 4pi/15, int phi u^2 = 8pi/15, J = 8pi/15
    g = make_grid(1.0, n=256)
    e = energy(RadialFunction(g, np.ones(257)), constant_potential(1.0), F5)
    assert e.norm_sq == pytest.approx(4 * np.pi / 3, rel=1e-14)
    assert e.potential_term == pytest.approx(4 * np.pi / 15, rel=1e-14)
    assert e.nonlocal_term == pytest.approx(8 * np.pi / 15, rel=1e-5)
    assert e.J == pytest.approx(8 * np.pi / 15, rel=1e-5)


def test_energy_value_matches_breakdown():
    u = _aligned()
    assert energy_value(u, V, F5) == pytest.approx(energy(u, V, F5).J, rel=1e-13)


def test_slopes_add_up():
    u = _aligned()
    e = energy(u, V, F5)
    assert e.slope_plus + e.slope_minus == pytest.approx(e.slope_full, rel=1e-12)
    assert set(e.to_dict()) == {"norm_sq", "nonlocal", "potential_term", "J", "slope_plus", "slope_minus", "slope_full"}


def test_derivative_matches_finite_difference_second_order():
    g = make_grid(2.0, n=128)
    u = _profile(g, [1.0, 0.5, -2.0])
    v = _profile(g, [0.3, -1.0, 0.7])
    exact = derivative_action(u, v, V, F5)
    errs = []
    for eps in (1e-2, 5e-3):
        fd = (energy_value(u.with_values(u.values + eps * v.values), V, F5)
              - energy_value(u.with_values(u.values - eps * v.values), V, F5)) / (2 * eps)
        errs.append(abs(fd - exact))
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_h1_gradient_represents_derivative():
    g = make_grid(2.0, n=128)
    u = _profile(g, [1.0, 0.5, -2.0])
    grad = h1_gradient(u, V, F5)
    assert grad.values[g.support_index] == 0.0
    assert inner(grad, grad, V) == pytest.approx(derivative_action(u, grad, V, F5), rel=1e-10)
    v = _profile(g, [0.2, 0.1, 0.4])
    assert inner(grad, v, V) == pytest.approx(derivative_action(u, v, V, F5), rel=1e-10)


def test_split_parts_bit_exact():
    g = make_grid(1.0, n=64)
    rng = np.random.default_rng(0)
    vals = rng.normal(size=65)
    vals[-1] = 0.0
    up, um = split_parts(RadialFunction(g, vals))
    assert np.array_equal(up.values + um.values, vals)
    assert np.all(up.values >= 0) and np.all(um.values <= 0)


@pytest.mark.parametrize("node", [0.25, 0.75, 1.5])
def test_split_identities_on_node_aligned_profiles(node):
    u = _aligned(node=node)
    J = energy_value(u, V, F5)
    assert energy_split_check(u, V, F5) <= 1e-10 * (1 + abs(J))


def test_cross_nonlocal_symmetric():
    up, um = split_parts(_aligned())
    assert cross_nonlocal(up, um) == pytest.approx(cross_nonlocal(um, up), rel=1e-4)
    assert cross_nonlocal(up, um) > 0


def test_mismatched_grids_rejected():
    a = RadialFunction(make_grid(1.0, n=16), np.zeros(17))
    b = RadialFunction(make_grid(1.0, n=32), np.zeros(33))
    with pytest.raises(ValueError):
        inner(a, b, V)


@settings(max_examples=30, deadline=None)
@given(coef=st.lists(st.floats(-2, 2), min_size=3, max_size=3), t=st.floats(0.1, 3.0))
def test_norm_scaling_and_positivity(coef, t):
    g = make_grid(1.0, n=32)
    u = _profile(g, coef)
    base = norm_sq(u, V)
    assert base >= 0
    assert norm_sq(u.scaled(t), V) == pytest.approx(t * t * base, rel=1e-12, abs=1e-300)
