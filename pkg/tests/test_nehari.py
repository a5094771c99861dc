import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spnodal.functional import derivative_action, energy_value, norm_sq, split_parts
from spnodal.grid import RadialFunction, make_grid
from spnodal.models import NonlinearityModel, default_potential
from spnodal.nehari import (
    NehariFiber,
    NodalFiber,
    PartVanished,
    SignConditionViolated,
    miranda_root,
    project_nehari,
    project_nodal,
    rescale_parts,
)

F5 = NonlinearityModel(5)
V = default_potential()


def _one_signed(n=128, R=4.0, amp=1.0):
    g = make_grid(R, n=n)
    r = g.nodes
    return RadialFunction(g, amp * np.exp(-r) * (1 - r / R))


def _two_signed(n=128, R=4.0, node=1.0, amp=(1.0, 1.0)):
    g = make_grid(R, n=n)
    r = g.nodes
    vals = (node - r) * (1 - r / R) * np.exp(-r / 2)
    vals = np.where(vals > 0, amp[0] * vals, amp[1] * vals)
    return RadialFunction(g, vals)


# -- Miranda ---------------------------------------------------------------


def test_miranda_linear_field():
    res = miranda_root(lambda x, y: (x - 0.3, y - 0.7), ((0.0, 1.0), (0.0, 1.0)), tol=1e-10)
    assert res.point[0] == pytest.approx(0.3, abs=1e-9)
    assert res.point[1] == pytest.approx(0.7, abs=1e-9)
    (a1, b1), (a2, b2) = res.box
    assert a1 <= 0.3 <= b1 and a2 <= 0.7 <= b2


def test_miranda_reverse_orientation_and_coupling():
    field = lambda x, y: (1.0 - 2 * x + 0.3 * y, 0.2 * x - y + 0.5)
    res = miranda_root(field, ((0.0, 1.0), (0.0, 1.0)), tol=1e-10)
    f1, f2 = field(*res.point)
    assert max(abs(f1), abs(f2)) <= 1e-10


def test_miranda_root_on_split_line():
    res = miranda_root(lambda x, y: (x - 0.5, y - 0.5), ((0.0, 1.0), (0.0, 1.0)), tol=1e-12)
    assert np.allclose(res.point, (0.5, 0.5), atol=1e-11)


def test_miranda_rejects_box_without_pattern():
    with pytest.raises(SignConditionViolated):
        miranda_root(lambda x, y: (x + 1.0, y - 0.5), ((0.0, 1.0), (0.0, 1.0)))


# -- Nehari projection -----------------------------------------------------


def _scan_root(fib):
    t = np.logspace(-4, 4, 100_000)
    g = fib.reduced(t)
    i = np.nonzero((g[:-1] > 0) & (g[1:] <= 0))[0]
    assert i.size == 1
    return 0.5 * (t[i[0]] + t[i[0] + 1])


@pytest.mark.parametrize("amp", [1e-2, 1.0, 30.0])
def test_nehari_matches_dense_scan(amp):
    u = _one_signed(amp=amp)
    t = project_nehari(u, V, F5)
    assert t == pytest.approx(_scan_root(NehariFiber.from_profile(u, V, F5)), rel=1e-4)


def test_nehari_point_is_on_the_set():
    u = _one_signed()
    t = project_nehari(u, V, F5)
    w = u.scaled(t)
    assert abs(derivative_action(w, w, V, F5)) <= 1e-10 * norm_sq(w, V)


def test_nehari_reparametrization():
    u = _one_signed()
    t = project_nehari(u, V, F5)
    for lam in (0.1, 3.0):
        assert project_nehari(u.scaled(lam), V, F5) == pytest.approx(t / lam, rel=1e-10)


def test_nehari_maximizes_fiber():
    u = _one_signed()
    t = project_nehari(u, V, F5)
    best = energy_value(u.scaled(t), V, F5)
    for tt in t * np.array([0.5, 0.9, 0.99, 1.01, 1.1, 2.0]):
        assert energy_value(u.scaled(tt), V, F5) < best


def test_nehari_zero_function():
    g = make_grid(1.0, n=16)
    with pytest.raises(ValueError):
        project_nehari(RadialFunction.zeros(g), V, F5)


# -- nodal projection ------------------------------------------------------


def test_nodal_fiber_matches_direct_derivative():
    u = _two_signed()
    fib = NodalFiber.from_profile(u, V, F5)
    up, um = split_parts(u)
    for t, s in [(0.5, 2.0), (1.3, 0.7)]:
        w = rescale_parts(u, t, s)
        psi = fib.psi(t, s)
        assert psi[0] == pytest.approx(derivative_action(w, up.scaled(t), V, F5), rel=1e-10)
        assert psi[1] == pytest.approx(derivative_action(w, um.scaled(s), V, F5), rel=1e-10)
        assert fib.energy(t, s) == pytest.approx(energy_value(w, V, F5), rel=1e-10)


def test_nodal_matches_grid_scan():
    u = _two_signed(amp=(1.0, 0.4))
    pair = project_nodal(u, V, F5)
    fib = NodalFiber.from_profile(u, V, F5)
    ts = np.logspace(np.log10(pair.t) - 1, np.log10(pair.t) + 1, 400)
    ss = np.logspace(np.log10(pair.s) - 1, np.log10(pair.s) + 1, 400)
    T, S = np.meshgrid(ts, ss, indexing="ij")
    p1, p2 = fib.psi(T, S)
    # each component relative to its own quadratic term
    res = np.maximum(np.abs(p1) / (T * T * fib.a_plus), np.abs(p2) / (S * S * fib.a_minus))
    i, j = np.unravel_index(np.argmin(res), res.shape)
    ci = np.searchsorted(ts, pair.t)
    cj = np.searchsorted(ss, pair.s)
    assert abs(i - ci) <= 2 and abs(j - cj) <= 2


def test_nodal_point_satisfies_both_constraints():
    u = _two_signed(amp=(2.0, 0.3))
    pair = project_nodal(u, V, F5)
    w = rescale_parts(u, pair.t, pair.s)
    wp, wm = split_parts(w)
    scale = norm_sq(w, V)
    assert pair.residual <= 1e-10
    assert abs(derivative_action(w, wp, V, F5)) <= 1e-9 * scale
    assert abs(derivative_action(w, wm, V, F5)) <= 1e-9 * scale
    (t0, t1), (s0, s1) = pair.box
    assert t0 <= pair.t <= t1 and s0 <= pair.s <= s1


def test_nodal_scaling_covariance():
    u = _two_signed()
    pair = project_nodal(u, V, F5)
    lam = 2.5
    scaled = project_nodal(u.scaled(lam), V, F5)
    assert scaled.t == pytest.approx(pair.t / lam, rel=1e-8)
    assert scaled.s == pytest.approx(pair.s / lam, rel=1e-8)


def test_nodal_fixed_point():
    u = _two_signed(amp=(1.0, 0.5))
    pair = project_nodal(u, V, F5)
    again = project_nodal(rescale_parts(u, pair.t, pair.s), V, F5)
    assert again.t == pytest.approx(1.0, abs=1e-8)
    assert again.s == pytest.approx(1.0, abs=1e-8)


def test_nodal_fiber_maximum_at_projection():
    u = _two_signed(amp=(1.0, 0.5))
    pair = project_nodal(u, V, F5)
    fib = NodalFiber.from_profile(u, V, F5)
    best = fib.energy(pair.t, pair.s)
    for dt in (0.9, 1.0, 1.1):
        for ds in (0.9, 1.0, 1.1):
            if (dt, ds) != (1.0, 1.0):
                assert fib.energy(pair.t * dt, pair.s * ds) < best


def test_nodal_bound_when_both_slopes_nonpositive():
    # J'(u)u+ <= 0 and J'(u)u- <= 0 put the projection inside (0, 1]^2
    u = _two_signed(amp=(100.0, 1000.0))
    psi = NodalFiber.from_profile(u, V, F5).psi(1.0, 1.0)
    assert psi[0] <= 0 and psi[1] <= 0
    pair = project_nodal(u, V, F5)
    assert pair.t <= 1.0 and pair.s <= 1.0


def test_part_vanished():
    with pytest.raises(PartVanished):
        project_nodal(_one_signed(), V, F5)


@settings(max_examples=8, deadline=None)
@given(
    node=st.floats(0.3, 3.0),
    ap=st.floats(-2.0, 2.0),
    am=st.floats(-2.0, 2.0),
)
def test_nodal_residual_on_random_profiles(node, ap, am):
    u = _two_signed(node=node, amp=(10.0**ap, 10.0**am))
    pair = project_nodal(u, V, F5)
    assert pair.residual <= 1e-10
    assert pair.t > 0 and pair.s > 0
